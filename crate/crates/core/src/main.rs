use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use activesep::harness::{
    reliability_violations, run_experiment_with, Emitter, ExperimentConfig, ExperimentKind,
    OutputFormat,
};
use activesep::Error;

#[derive(Parser)]
#[command(name = "activesep", version, about = "Seeded query-complexity experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Doubling learner queries against sample size.
    #[command(name = "rpu_vs_n")]
    RpuVsN(RunArgs),
    /// Doubling learner queries against dimension.
    #[command(name = "rpu_vs_d")]
    RpuVsD(RunArgs),
    /// Comparison pool PAC learner against epsilon.
    #[command(name = "pac_error_curve")]
    PacErrorCurve(RunArgs),
    /// Point location depth against arrangement size.
    #[command(name = "pointloc_depth")]
    PointlocDepth(RunArgs),
    /// Samples with no inferable point, against sample size.
    #[command(name = "g_estimate")]
    GEstimate(RunArgs),
    /// Passive coverage against sample size.
    #[command(name = "coverage_curve")]
    CoverageCurve(RunArgs),
    /// Planar membership-query learner against epsilon.
    #[command(name = "mqs2d")]
    Mqs2d(RunArgs),
    /// Print the desk-scale default config of an experiment.
    Defaults {
        #[arg(value_parser = kind_parser())]
        kind: String,
    },
}

#[derive(Args)]
struct RunArgs {
    /// TOML config; desk-scale defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    /// Output file; stdout when neither this nor the config sets one.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Record wall-clock milliseconds per trial (output is then not
    /// reproducible).
    #[arg(long)]
    timing: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Jsonl,
}

fn kind_parser() -> clap::builder::PossibleValuesParser {
    clap::builder::PossibleValuesParser::new(ExperimentKind::ALL.map(|k| k.name()))
}

fn kind_named(name: &str) -> ExperimentKind {
    *ExperimentKind::ALL
        .iter()
        .find(|k| k.name() == name)
        .expect("clap restricts the names")
}

enum Failure {
    Config(Error),
    Io(Error),
    Reliability(usize),
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let (kind, args) = match cli.command {
        Command::RpuVsN(a) => (ExperimentKind::RpuVsN, a),
        Command::RpuVsD(a) => (ExperimentKind::RpuVsD, a),
        Command::PacErrorCurve(a) => (ExperimentKind::PacErrorCurve, a),
        Command::PointlocDepth(a) => (ExperimentKind::PointlocDepth, a),
        Command::GEstimate(a) => (ExperimentKind::GEstimate, a),
        Command::CoverageCurve(a) => (ExperimentKind::CoverageCurve, a),
        Command::Mqs2d(a) => (ExperimentKind::Mqs2d, a),
        Command::Defaults { kind } => {
            return match ExperimentConfig::desk_default(kind_named(&kind)).to_toml() {
                Ok(text) => {
                    print!("{text}");
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(1)
                }
            };
        }
    };
    match run(kind, args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(e)) | Err(Failure::Io(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
        Err(Failure::Reliability(n)) => {
            eprintln!("reliability violated: {n} rows report mislabelled points");
            ExitCode::from(2)
        }
    }
}

fn run(kind: ExperimentKind, args: RunArgs) -> Result<(), Failure> {
    let mut config = match &args.config {
        Some(path) => ExperimentConfig::load(path).map_err(Failure::Config)?,
        None => ExperimentConfig::desk_default(kind),
    };
    if config.kind != kind {
        return Err(Failure::Config(Error::Config(format!(
            "config describes {} but the subcommand is {kind}",
            config.kind
        ))));
    }
    if let Some(s) = args.seed {
        config.seed = s;
    }
    if let Some(t) = args.trials {
        config.trials = t;
    }
    if let Some(w) = args.workers {
        config.workers = Some(w);
    }
    if let Some(f) = args.format {
        config.format = match f {
            Format::Csv => OutputFormat::Csv,
            Format::Jsonl => OutputFormat::Jsonl,
        };
    }
    if args.out.is_some() {
        config.output = args.out.clone();
    }
    config.timing |= args.timing;
    config.validate().map_err(Failure::Config)?;
    for flag in config.full_scale_flags() {
        log::warn!("beyond desk scale ({flag}); expect a long run");
    }

    let sink: Box<dyn Write> = match &config.output {
        Some(path) => Box::new(BufWriter::new(File::create(path).map_err(|source| {
            Failure::Io(Error::Io {
                path: path.clone(),
                source,
            })
        })?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    };
    let mut emitter = Emitter::new(sink, config.format).map_err(Failure::Io)?;
    let mut violations = 0;
    run_experiment_with(&config, |rows| {
        violations += reliability_violations(rows);
        for r in rows {
            emitter.push(r)?;
        }
        Ok(())
    })
    .map_err(|e| match e {
        Error::Io { .. } => Failure::Io(e),
        other => Failure::Config(other),
    })?;
    let mut w = emitter.finish().map_err(Failure::Io)?;
    w.flush().map_err(|source| {
        Failure::Io(Error::Io {
            path: config.output.clone().unwrap_or_else(|| "<stdout>".into()),
            source,
        })
    })?;
    if violations > 0 {
        return Err(Failure::Reliability(violations));
    }
    Ok(())
}
