use activesep::analysis::{fit_growth, GrowthModel};
use activesep::distributions::{DistributionSpec, RngSeed, TrialRng};
use activesep::geometry::{angle_between, lift_difference};
use activesep::oracle::Oracle;
use activesep::pac::{
    balcan_long, comparison_pool_pac, label_mqs_pac_2d, measure_error, project, threshold,
    BlOutcome, BlParams, PacParams,
};
use activesep::{Hyperplane, Point, Sign};
use rand::Rng;

fn localize(eps: f64, params: &BlParams, rng: &mut TrialRng) -> BlOutcome {
    let v = [1.0, 0.0, 0.0];
    let spec = DistributionSpec::gaussian(3);
    let draw = |rng: &mut TrialRng| {
        let z = spec.sample(rng)?;
        Ok((z.clone(), z))
    };
    let label = |z: &Point| {
        let ip: f64 = z.coords().iter().zip(&v).map(|(a, b)| a * b).sum();
        Ok(Sign::of(ip).resolve_ties())
    };
    balcan_long(3, draw, label, eps, 0.1, params, rng).unwrap()
}

#[test]
fn localization_angle_and_label_scaling() {
    let mut close = 0;
    let mut labels = [0.0, 0.0];
    for t in 0..50 {
        let mut rng = RngSeed::new(401, t).rng();
        let out = localize(0.05, &BlParams::default(), &mut rng);
        if angle_between(&out.normal, &[1.0, 0.0, 0.0]) <= 0.1 {
            close += 1;
        }
        labels[0] += out.labels_used as f64;
        labels[1] += localize(0.05 / 4.0, &BlParams::default(), &mut rng).labels_used as f64;
    }
    assert!(close >= 45, "{close} of 50 within 0.1 rad");
    assert!(labels[1] / labels[0] <= 2.5, "label ratio {}", labels[1] / labels[0]);
}

#[test]
fn single_unbanded_round_is_passive_fit() {
    let params = BlParams {
        rounds: Some(1),
        samples_per_round: Some(500),
        ..BlParams::default()
    };
    let mut angles: Vec<f64> = (0..20)
        .map(|t| {
            let mut rng = RngSeed::new(402, t).rng();
            let out = localize(0.05, &params, &mut rng);
            assert_eq!(out.labels_used, 500);
            angle_between(&out.normal, &[1.0, 0.0, 0.0])
        })
        .collect();
    angles.sort_by(f64::total_cmp);
    assert!(angles[10] <= 0.3, "median angle {}", angles[10]);
}

#[test]
fn gaussian_projection_marginal() {
    let mut rng = RngSeed::new(403, 0).rng();
    let pts = DistributionSpec::gaussian(3).sample_n(100_000, &mut rng).unwrap();
    let u = [0.48, 0.6, 0.64];
    let p = project(&pts, &u).unwrap();
    let mean = p.iter().sum::<f64>() / p.len() as f64;
    let var = p.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (p.len() - 1) as f64;
    assert!(mean.abs() <= 0.02 && (var - 1.0).abs() <= 0.05, "{mean} {var}");
}

#[test]
fn one_dimensional_threshold() {
    let spec = DistributionSpec::uniform_ball(1);
    let h = Hyperplane::new(vec![1.0], -0.3).unwrap();
    let mut close = 0;
    for t in 0..100 {
        let mut rng = RngSeed::new(404, t).rng();
        let pts = spec.sample_n(1000, &mut rng).unwrap();
        let mut o = Oracle::new(&h);
        let th = threshold(&pts, &[1.0], &mut o, 1e-6).unwrap();
        assert!(o.ledger().label_count <= 11);
        if (th - 0.3).abs() <= 0.01 {
            close += 1;
        }
    }
    assert!(close >= 90, "{close} of 100");
}

#[test]
fn comparison_is_label_of_lifted_difference() {
    let mut rng = RngSeed::new(405, 0).rng();
    let spec = DistributionSpec::gaussian(4);
    for _ in 0..10_000 {
        let normal: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
        let h = Hyperplane::new(normal, rng.random_range(-2.0..2.0)).unwrap();
        let (x, y) = (spec.sample(&mut rng).unwrap(), spec.sample(&mut rng).unwrap());
        let mut o = Oracle::new(&h);
        let cmp = o.comparison_query(&x, &y).unwrap().answer;
        let lifted = lift_difference(&x, &y).unwrap();
        assert_eq!(cmp, o.label_item(&lifted).unwrap().answer);
    }
}

#[test]
fn pac_queries_grow_logarithmically() {
    let spec = DistributionSpec::gaussian(3);
    let eps = [0.1, 0.05, 0.025, 0.0125];
    let mut mean_q = Vec::new();
    for (i, &e) in eps.iter().enumerate() {
        let mut q = 0.0;
        for t in 0..10 {
            let mut rng = RngSeed::new(406, (i * 10 + t) as u64).rng();
            let normal: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
            let h = Hyperplane::new(normal, rng.random_range(-1.0..1.0)).unwrap();
            let mut o = Oracle::new(&h);
            let params = PacParams {
                epsilon: e,
                ..PacParams::default()
            };
            let out = comparison_pool_pac(&spec, &params, &mut o, &mut rng).unwrap();
            let err = measure_error(&h, &out.hypothesis, &spec, 20_000, &mut rng).unwrap();
            assert!(err <= 2.0 * e, "eps {e} error {err}");
            q += out.ledger.total() as f64;
        }
        mean_q.push(q / 10.0);
    }
    let xs: Vec<f64> = eps.iter().map(|e| 1.0 / e).collect();
    let report = fit_growth(&xs, &mean_q).unwrap();
    assert!(
        report.fit(GrowthModel::Log).residual < report.fit(GrowthModel::Linear).residual,
        "{mean_q:?}"
    );
}

#[test]
fn membership_learner_through_center() {
    let disk = DistributionSpec::uniform_ball(2);
    let mut ok = 0;
    for t in 0..100 {
        let mut rng = RngSeed::new(407, t).rng();
        let phi: f64 = rng.random_range(0.0..std::f64::consts::TAU);
        let h = Hyperplane::new(vec![phi.cos(), phi.sin()], 0.0).unwrap();
        let mut o = Oracle::new(&h);
        let out = label_mqs_pac_2d(0.01, 2.0, &mut o).unwrap();
        if measure_error(&h, &out.hypothesis, &disk, 20_000, &mut rng).unwrap() <= 0.01 {
            ok += 1;
        }
    }
    assert!(ok >= 95, "{ok} of 100");
}
