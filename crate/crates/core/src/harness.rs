//! Experiment configuration, seeded orchestration and result emission.
//!
//! Configs are TOML files carrying a `schema_version`. Every trial draws from
//! its own ChaCha substream `grid_index * trials + trial`, so the rows do not
//! depend on how many workers run them.

use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{coverage_trial, g_trial, EstimateParams};
use crate::distributions::{ClassifierFamily, DistributionSpec, RngSeed};
use crate::error::{Error, Result};
use crate::oracle::{Oracle, QueryKind};
use crate::pac::{comparison_pool_pac, label_mqs_pac_2d, measure_error, PacParams};
use crate::pointloc::depth_trial;
use crate::rpu::{perfect_learning, Resolution, RpuParams};

pub const SCHEMA_VERSION: u32 = 1;

pub const CSV_HEADER: &str = "experiment,seed,grid,trial,labels,comparisons,total,errors,metric,ms";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    /// Doubling learner, total queries against sample size.
    RpuVsN,
    /// Doubling learner at a fixed sample size, against dimension.
    RpuVsD,
    /// Comparison pool PAC learner, error and queries against epsilon.
    PacErrorCurve,
    /// Point location depth against arrangement size.
    PointlocDepth,
    /// Indicator of "no inferable point" per sample, against sample size.
    GEstimate,
    /// Passive coverage of fresh points against sample size.
    CoverageCurve,
    /// Planar membership-query learner against epsilon.
    Mqs2d,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 7] = [
        ExperimentKind::RpuVsN,
        ExperimentKind::RpuVsD,
        ExperimentKind::PacErrorCurve,
        ExperimentKind::PointlocDepth,
        ExperimentKind::GEstimate,
        ExperimentKind::CoverageCurve,
        ExperimentKind::Mqs2d,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::RpuVsN => "rpu_vs_n",
            ExperimentKind::RpuVsD => "rpu_vs_d",
            ExperimentKind::PacErrorCurve => "pac_error_curve",
            ExperimentKind::PointlocDepth => "pointloc_depth",
            ExperimentKind::GEstimate => "g_estimate",
            ExperimentKind::CoverageCurve => "coverage_curve",
            ExperimentKind::Mqs2d => "mqs2d",
        }
    }

    /// Rows of these kinds carry reliability errors that must be zero.
    pub fn is_reliable(self) -> bool {
        matches!(
            self,
            ExperimentKind::RpuVsN | ExperimentKind::RpuVsD | ExperimentKind::PointlocDepth
        )
    }

    fn uses_query_kinds(self) -> bool {
        matches!(
            self,
            ExperimentKind::RpuVsN
                | ExperimentKind::RpuVsD
                | ExperimentKind::GEstimate
                | ExperimentKind::CoverageCurve
        )
    }

    fn grid_is_integral(self) -> bool {
        !matches!(self, ExperimentKind::PacErrorCurve | ExperimentKind::Mqs2d)
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    #[default]
    Csv,
    Jsonl,
}

/// One experiment: a grid of sample sizes, dimensions or epsilons, times
/// `trials` seeded repetitions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub kind: ExperimentKind,
    /// Instance distribution. For `rpu_vs_d` its dimension is replaced by
    /// each grid value.
    pub distribution: DistributionSpec,
    #[serde(default)]
    pub classifier: ClassifierFamily,
    /// `n` for sample-size sweeps, `d` for `rpu_vs_d`, epsilon for the PAC
    /// kinds.
    pub grid: Vec<f64>,
    /// Sample size for `rpu_vs_d`.
    #[serde(default)]
    pub n: Option<usize>,
    #[serde(default = "default_query_kinds")]
    pub query_kinds: Vec<QueryKind>,
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    /// Worker threads; all available cores when unset.
    #[serde(default)]
    pub workers: Option<usize>,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub format: OutputFormat,
    /// Fill the `ms` column. Off by default so output is byte-reproducible.
    #[serde(default)]
    pub timing: bool,
    /// Fresh points per coverage trial.
    #[serde(default = "default_fresh")]
    pub fresh_points: usize,
    /// Monte Carlo points per PAC error measurement.
    #[serde(default = "default_error_samples")]
    pub error_samples: usize,
    /// Vertex constant of the planar membership learner.
    #[serde(default = "default_mqs_constant")]
    pub mqs_constant: f64,
    #[serde(default)]
    pub rpu: RpuParams,
    #[serde(default)]
    pub pac: PacParams,
}

fn default_query_kinds() -> Vec<QueryKind> {
    vec![QueryKind::Comparison]
}

fn default_fresh() -> usize {
    500
}

fn default_error_samples() -> usize {
    20_000
}

fn default_mqs_constant() -> f64 {
    2.0
}

fn powers_of_two(lo: u32, hi: u32) -> Vec<f64> {
    (lo..=hi).map(|i| 2f64.powi(i as i32)).collect()
}

impl ExperimentConfig {
    /// Desk-scale defaults for `kind`.
    pub fn desk_default(kind: ExperimentKind) -> ExperimentConfig {
        let mut c = ExperimentConfig {
            schema_version: SCHEMA_VERSION,
            kind,
            distribution: DistributionSpec::uniform_ball(3),
            classifier: ClassifierFamily::Tangent,
            grid: Vec::new(),
            n: None,
            query_kinds: default_query_kinds(),
            trials: 50,
            seed: 0,
            workers: None,
            output: None,
            format: OutputFormat::Csv,
            timing: false,
            fresh_points: default_fresh(),
            error_samples: default_error_samples(),
            mqs_constant: default_mqs_constant(),
            rpu: RpuParams::default(),
            pac: PacParams::default(),
        };
        match kind {
            ExperimentKind::RpuVsN => {
                c.grid = powers_of_two(0, 10);
                c.query_kinds = vec![QueryKind::Label, QueryKind::Comparison];
            }
            ExperimentKind::RpuVsD => {
                c.grid = (2..=8).map(f64::from).collect();
                c.n = Some(256);
            }
            ExperimentKind::PacErrorCurve => {
                c.distribution = DistributionSpec::gaussian(3);
                c.classifier = ClassifierFamily::UniformOffset { max_offset: 1.0 };
                c.grid = vec![0.1, 0.05, 0.025, 0.0125];
            }
            ExperimentKind::PointlocDepth => {
                c.distribution = DistributionSpec::gaussian(3);
                c.grid = powers_of_two(6, 10);
            }
            ExperimentKind::GEstimate => {
                c.distribution = DistributionSpec::uniform_ball(2);
                c.grid = vec![8.0, 12.0, 16.0, 20.0];
                c.trials = 2000;
            }
            ExperimentKind::CoverageCurve => {
                c.grid = powers_of_two(4, 8);
                c.query_kinds = vec![QueryKind::Label, QueryKind::Comparison];
            }
            ExperimentKind::Mqs2d => {
                c.distribution = DistributionSpec::uniform_ball(2);
                c.classifier = ClassifierFamily::UniformOffset { max_offset: 0.9 };
                c.grid = vec![0.04, 0.005];
                c.trials = 100;
            }
        }
        c
    }

    pub fn from_toml(text: &str) -> Result<ExperimentConfig> {
        let c: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::Config(format!("config parse: {e}")))?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<ExperimentConfig> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        ExperimentConfig::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(format!("config serialize: {e}")))
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if self.grid.is_empty() {
            return Err(Error::Config("grid must be nonempty".into()));
        }
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if self.workers == Some(0) {
            return Err(Error::Config("workers must be at least 1".into()));
        }
        if self.kind.uses_query_kinds() && self.query_kinds.is_empty() {
            return Err(Error::Config("query_kinds must be nonempty".into()));
        }
        self.distribution.validate()?;
        self.rpu.validate()?;
        self.pac.validate()?;
        for &g in &self.grid {
            if !g.is_finite() {
                return Err(Error::Config(format!("grid value {g} is not finite")));
            }
            if self.kind.grid_is_integral() && (g < 1.0 || g.fract() != 0.0) {
                return Err(Error::Config(format!("grid value {g} must be a positive integer")));
            }
            if !self.kind.grid_is_integral() && !(g > 0.0 && g < 1.0) {
                return Err(Error::Config(format!("epsilon {g} must lie in (0, 1)")));
            }
        }
        match self.kind {
            ExperimentKind::RpuVsD => {
                if self.n.unwrap_or(0) == 0 {
                    return Err(Error::Config("rpu_vs_d needs a positive n".into()));
                }
                for &g in &self.grid {
                    spec_in_dim(&self.distribution, g as usize)?;
                }
            }
            ExperimentKind::GEstimate => {
                if self.grid.iter().any(|&g| g < 2.0) {
                    return Err(Error::Config("g_estimate needs n >= 2".into()));
                }
            }
            ExperimentKind::CoverageCurve => {
                if self.fresh_points == 0 {
                    return Err(Error::Config("fresh_points must be positive".into()));
                }
            }
            ExperimentKind::PacErrorCurve => {
                if self.error_samples == 0 {
                    return Err(Error::Config("error_samples must be positive".into()));
                }
            }
            ExperimentKind::Mqs2d => {
                if self.distribution != DistributionSpec::uniform_ball(2) {
                    return Err(Error::Config("mqs2d runs on the uniform unit disk".into()));
                }
                if !(self.mqs_constant > 0.0) || self.error_samples == 0 {
                    return Err(Error::Config(
                        "mqs_constant and error_samples must be positive".into(),
                    ));
                }
            }
            ExperimentKind::RpuVsN | ExperimentKind::PointlocDepth => {}
        }
        Ok(())
    }

    /// Settings beyond desk scale, for a runtime warning.
    pub fn full_scale_flags(&self) -> Vec<String> {
        let mut flags = Vec::new();
        let desk_trials = ExperimentConfig::desk_default(self.kind).trials;
        if self.trials > desk_trials {
            flags.push(format!("trials {} > {desk_trials}", self.trials));
        }
        if self.kind.grid_is_integral() {
            let max = self.grid.iter().cloned().fold(0.0, f64::max);
            if self.kind == ExperimentKind::RpuVsD && max > 8.0 {
                flags.push(format!("dimension {max} > 8"));
            } else if self.kind != ExperimentKind::RpuVsD && max > 1024.0 {
                flags.push(format!("n {max} > 1024"));
            }
        }
        if self.kind == ExperimentKind::RpuVsD && self.n.unwrap_or(0) > 1024 {
            flags.push(format!("n {} > 1024", self.n.unwrap_or(0)));
        }
        if self.distribution.dim() > 8 {
            flags.push(format!("dimension {} > 8", self.distribution.dim()));
        }
        flags
    }
}

fn spec_in_dim(spec: &DistributionSpec, d: usize) -> Result<DistributionSpec> {
    if d == 0 {
        return Err(Error::Config("dimension must be positive".into()));
    }
    match spec {
        DistributionSpec::UniformBall { .. } => Ok(DistributionSpec::uniform_ball(d)),
        DistributionSpec::Gaussian { .. } => Ok(DistributionSpec::gaussian(d)),
        _ => Err(Error::Config(
            "rpu_vs_d sweeps only uniform_ball or gaussian distributions".into(),
        )),
    }
}

/// One trial's outcome.
///
/// `metric` is the inferred fraction for the RPU kinds, depth / n for point
/// location, the failure indicator for `g_estimate`, coverage for
/// `coverage_curve` and measured error for the PAC kinds. `errors` counts
/// wrong labels or signs and is zero for non-reliable kinds. A trial that
/// hit a solver or sampler failure has zero counts and a NaN metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub experiment: String,
    pub seed: u64,
    pub grid: f64,
    pub trial: usize,
    pub labels: u64,
    pub comparisons: u64,
    pub total: u64,
    pub errors: u64,
    pub metric: f64,
    pub ms: u64,
}

impl ResultRow {
    pub fn failed(&self) -> bool {
        self.metric.is_nan()
    }
}

/// Experiment id for a row: the kind name, suffixed with the query kind
/// when the experiment sweeps more than one.
fn experiment_id(kind: ExperimentKind, q: Option<QueryKind>) -> String {
    match q {
        Some(QueryKind::Label) => format!("{kind}/label"),
        Some(QueryKind::Comparison) => format!("{kind}/comparison"),
        None => kind.name().to_string(),
    }
}

struct Measured {
    labels: u64,
    comparisons: u64,
    errors: u64,
    metric: f64,
}

impl Measured {
    fn from_counts(labels: u64, comparisons: u64, errors: u64, metric: f64) -> Measured {
        Measured {
            labels,
            comparisons,
            errors,
            metric,
        }
    }
}

fn run_trial(
    c: &ExperimentConfig,
    q: Option<QueryKind>,
    grid_index: usize,
    g: f64,
    trial: usize,
) -> Result<Measured> {
    let stream = (grid_index * c.trials + trial) as u64;
    let mut rng = RngSeed::new(c.seed, stream).rng();
    match c.kind {
        ExperimentKind::RpuVsN | ExperimentKind::RpuVsD => {
            let (spec, n) = if c.kind == ExperimentKind::RpuVsN {
                (c.distribution.clone(), g as usize)
            } else {
                (spec_in_dim(&c.distribution, g as usize)?, c.n.unwrap_or(0))
            };
            let h = c.classifier.sample(spec.dim(), &mut rng);
            let pts = spec.sample_n(n, &mut rng)?;
            let mut oracle = Oracle::new(&h);
            let kind = q.unwrap_or(QueryKind::Comparison);
            let out = perfect_learning(&pts, kind, &c.rpu, &mut oracle, &mut rng)?;
            let mut wrong = 0u64;
            for (x, &s) in pts.iter().zip(&out.labels) {
                if h.sign_at(x)?.resolve_ties() != s {
                    wrong += 1;
                }
            }
            let inferred = out.count(Resolution::Inferred) as f64 / n as f64;
            Ok(Measured::from_counts(
                out.ledger.label_count,
                out.ledger.comparison_count,
                wrong,
                inferred,
            ))
        }
        ExperimentKind::PointlocDepth => {
            let n = g as usize;
            let ball = DistributionSpec::uniform_ball(c.distribution.dim());
            let (ledger, wrong) = depth_trial(&c.distribution, &ball, n, &c.rpu, &mut rng)?;
            Ok(Measured::from_counts(
                ledger.label_count,
                ledger.comparison_count,
                wrong as u64,
                ledger.total() as f64 / n as f64,
            ))
        }
        ExperimentKind::GEstimate => {
            let p = estimate_params(c, q);
            let failed = g_trial(&c.distribution, g as usize, stream, &p)?;
            Ok(Measured::from_counts(0, 0, 0, if failed { 1.0 } else { 0.0 }))
        }
        ExperimentKind::CoverageCurve => {
            let p = estimate_params(c, q);
            let cov = coverage_trial(&c.distribution, g as usize, c.fresh_points, stream, &p)?;
            Ok(Measured::from_counts(0, 0, 0, cov))
        }
        ExperimentKind::PacErrorCurve => {
            let h = c.classifier.sample(c.distribution.dim(), &mut rng);
            let mut oracle = Oracle::new(&h);
            let params = PacParams {
                epsilon: g,
                ..c.pac.clone()
            };
            let out = comparison_pool_pac(&c.distribution, &params, &mut oracle, &mut rng)?;
            let err = measure_error(&h, &out.hypothesis, &c.distribution, c.error_samples, &mut rng)?;
            Ok(Measured::from_counts(
                out.ledger.label_count,
                out.ledger.comparison_count,
                0,
                err,
            ))
        }
        ExperimentKind::Mqs2d => {
            let h = c.classifier.sample(2, &mut rng);
            let mut oracle = Oracle::new(&h);
            let out = label_mqs_pac_2d(g, c.mqs_constant, &mut oracle)?;
            let err = measure_error(&h, &out.hypothesis, &c.distribution, c.error_samples, &mut rng)?;
            Ok(Measured::from_counts(
                out.ledger.label_count,
                out.ledger.comparison_count,
                0,
                err,
            ))
        }
    }
}

fn estimate_params(c: &ExperimentConfig, q: Option<QueryKind>) -> EstimateParams {
    EstimateParams {
        kind: q.unwrap_or(QueryKind::Comparison),
        family: c.classifier,
        seed: c.seed,
        inference: c.rpu.inference,
    }
}

fn trial_row(
    c: &ExperimentConfig,
    q: Option<QueryKind>,
    grid_index: usize,
    trial: usize,
) -> ResultRow {
    let g = c.grid[grid_index];
    let start = Instant::now();
    let outcome = run_trial(c, q, grid_index, g, trial);
    let ms = if c.timing {
        start.elapsed().as_millis() as u64
    } else {
        0
    };
    let m = outcome.unwrap_or_else(|e| {
        log::warn!("{} grid {g} trial {trial} failed: {e}", c.kind);
        Measured::from_counts(0, 0, 0, f64::NAN)
    });
    ResultRow {
        experiment: experiment_id(c.kind, q),
        seed: c.seed,
        grid: g,
        trial,
        labels: m.labels,
        comparisons: m.comparisons,
        total: m.labels + m.comparisons,
        errors: m.errors,
        metric: m.metric,
        ms,
    }
}

/// Query kinds swept by `c`, or a single `None` for kinds that have none.
fn sweep_kinds(c: &ExperimentConfig) -> Vec<Option<QueryKind>> {
    if c.kind.uses_query_kinds() {
        c.query_kinds.iter().copied().map(Some).collect()
    } else {
        vec![None]
    }
}

/// Runs the grid x trials matrix, handing rows to `sink` one grid value at a
/// time in `(query kind, grid, trial)` order.
///
/// Trials of one grid value run on a pool of `c.workers` threads. Failed
/// trials are reported in their row and never stop the matrix.
pub fn run_experiment_with(
    c: &ExperimentConfig,
    mut sink: impl FnMut(&[ResultRow]) -> Result<()>,
) -> Result<()> {
    c.validate()?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(w) = c.workers {
        builder = builder.num_threads(w);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::Precondition(format!("thread pool: {e}")))?;
    for q in sweep_kinds(c) {
        for gi in 0..c.grid.len() {
            let rows: Vec<ResultRow> = pool.install(|| {
                (0..c.trials)
                    .into_par_iter()
                    .map(|t| trial_row(c, q, gi, t))
                    .collect()
            });
            sink(&rows)?;
        }
    }
    Ok(())
}

pub fn run_experiment(c: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    let mut all = Vec::new();
    run_experiment_with(c, |rows| {
        all.extend_from_slice(rows);
        Ok(())
    })?;
    Ok(all)
}

/// Rows that break reliability: nonzero `errors` in an RPU or point
/// location experiment.
pub fn reliability_violations(rows: &[ResultRow]) -> usize {
    rows.iter()
        .filter(|r| {
            let kind = r.experiment.split('/').next().unwrap_or("");
            let reliable = ExperimentKind::ALL
                .iter()
                .any(|k| k.name() == kind && k.is_reliable());
            reliable && r.errors > 0
        })
        .count()
}

/// Formats like C's `%.6g`: six significant digits, trailing zeros dropped.
pub fn format_float(x: f64) -> String {
    if x.is_nan() {
        return "NaN".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.5e}");
    let (mant, exp) = sci.split_once('e').expect("exponent format");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..6).contains(&exp) {
        let decimals = (5 - exp) as usize;
        trim_zeros(format!("{x:.decimals$}"))
    } else {
        format!("{}e{exp}", trim_zeros(mant.to_string()))
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

/// Streaming row writer for either output format.
pub struct Emitter<W: Write> {
    inner: EmitterInner<W>,
}

enum EmitterInner<W: Write> {
    Csv(csv::Writer<W>),
    Jsonl(W),
}

impl<W: Write> Emitter<W> {
    /// Starts output; CSV writes its header immediately.
    pub fn new(writer: W, format: OutputFormat) -> Result<Emitter<W>> {
        let inner = match format {
            OutputFormat::Csv => {
                let mut w = csv::WriterBuilder::new()
                    .has_headers(false)
                    .terminator(csv::Terminator::Any(b'\n'))
                    .from_writer(writer);
                w.write_record(CSV_HEADER.split(',')).map_err(csv_err)?;
                EmitterInner::Csv(w)
            }
            OutputFormat::Jsonl => EmitterInner::Jsonl(writer),
        };
        Ok(Emitter { inner })
    }

    pub fn push(&mut self, r: &ResultRow) -> Result<()> {
        match &mut self.inner {
            EmitterInner::Csv(w) => w
                .write_record([
                    r.experiment.clone(),
                    r.seed.to_string(),
                    format_float(r.grid),
                    r.trial.to_string(),
                    r.labels.to_string(),
                    r.comparisons.to_string(),
                    r.total.to_string(),
                    r.errors.to_string(),
                    format_float(r.metric),
                    r.ms.to_string(),
                ])
                .map_err(csv_err),
            EmitterInner::Jsonl(w) => {
                serde_json::to_writer(&mut *w, &JsonRow::from(r)).map_err(json_err)?;
                w.write_all(b"\n").map_err(stdout_err)
            }
        }
    }

    pub fn finish(self) -> Result<W> {
        match self.inner {
            EmitterInner::Csv(w) => w
                .into_inner()
                .map_err(|e| stdout_err(std::io::Error::other(e.to_string()))),
            EmitterInner::Jsonl(mut w) => {
                w.flush().map_err(stdout_err)?;
                Ok(w)
            }
        }
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io {
        path: PathBuf::from("<csv>"),
        source: std::io::Error::other(e.to_string()),
    }
}

fn json_err(e: serde_json::Error) -> Error {
    Error::Io {
        path: PathBuf::from("<jsonl>"),
        source: std::io::Error::other(e.to_string()),
    }
}

fn stdout_err(source: std::io::Error) -> Error {
    Error::Io {
        path: PathBuf::from("<output>"),
        source,
    }
}

fn with_path(path: &Path, e: Error) -> Error {
    match e {
        Error::Io { source, .. } => Error::Io {
            path: path.to_path_buf(),
            source,
        },
        other => other,
    }
}

/// JSON cannot hold NaN, so a failed trial's metric travels as `null`.
#[derive(Serialize, Deserialize)]
struct JsonRow {
    experiment: String,
    seed: u64,
    grid: f64,
    trial: usize,
    labels: u64,
    comparisons: u64,
    total: u64,
    errors: u64,
    metric: Option<f64>,
    ms: u64,
}

impl From<&ResultRow> for JsonRow {
    fn from(r: &ResultRow) -> Self {
        JsonRow {
            experiment: r.experiment.clone(),
            seed: r.seed,
            grid: r.grid,
            trial: r.trial,
            labels: r.labels,
            comparisons: r.comparisons,
            total: r.total,
            errors: r.errors,
            metric: r.metric.is_finite().then_some(r.metric),
            ms: r.ms,
        }
    }
}

impl From<JsonRow> for ResultRow {
    fn from(r: JsonRow) -> Self {
        ResultRow {
            experiment: r.experiment,
            seed: r.seed,
            grid: r.grid,
            trial: r.trial,
            labels: r.labels,
            comparisons: r.comparisons,
            total: r.total,
            errors: r.errors,
            metric: r.metric.unwrap_or(f64::NAN),
            ms: r.ms,
        }
    }
}

/// Writes `rows` to `path` in one go.
pub fn emit(rows: &[ResultRow], format: OutputFormat, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut em = Emitter::new(BufWriter::new(file), format).map_err(|e| with_path(path, e))?;
    for r in rows {
        em.push(r).map_err(|e| with_path(path, e))?;
    }
    em.finish()
        .and_then(|mut w| w.flush().map_err(stdout_err))
        .map_err(|e| with_path(path, e))
}

/// Reads rows back from emitted text.
pub fn parse<R: Read>(reader: R, format: OutputFormat) -> Result<Vec<ResultRow>> {
    match format {
        OutputFormat::Csv => {
            let mut rd = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
            let header = rd.headers().map_err(csv_err)?.iter().collect::<Vec<_>>().join(",");
            if header != CSV_HEADER {
                return Err(Error::Config(format!("unexpected csv header {header:?}")));
            }
            rd.records()
                .map(|rec| {
                    let rec = rec.map_err(csv_err)?;
                    let field = |i: usize| rec.get(i).unwrap_or("");
                    let bad = |i: usize| Error::Config(format!("bad csv field {:?}", field(i)));
                    let int = |i: usize| field(i).parse::<u64>().map_err(|_| bad(i));
                    let float = |i: usize| field(i).parse::<f64>().map_err(|_| bad(i));
                    Ok(ResultRow {
                        experiment: field(0).to_string(),
                        seed: int(1)?,
                        grid: float(2)?,
                        trial: int(3)? as usize,
                        labels: int(4)?,
                        comparisons: int(5)?,
                        total: int(6)?,
                        errors: int(7)?,
                        metric: float(8)?,
                        ms: int(9)?,
                    })
                })
                .collect()
        }
        OutputFormat::Jsonl => BufReader::new(reader)
            .lines()
            .filter(|l| l.as_ref().map_or(true, |s| !s.trim().is_empty()))
            .map(|l| {
                let l = l.map_err(stdout_err)?;
                let row: JsonRow = serde_json::from_str(&l).map_err(json_err)?;
                Ok(row.into())
            })
            .collect(),
    }
}
