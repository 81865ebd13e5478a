use activesep::analysis::{
    estimate_avg_inference_dimension, estimate_coverage, has_inferable_point,
    subset_inference_lower_bound, EstimateParams,
};
use activesep::distributions::{ClassifierFamily, DistributionSpec, RngSeed};
use activesep::inference::InferenceConfig;
use activesep::oracle::QueryKind;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn comparisons_never_lose_inferable_points(seed in any::<u64>(), n in 3usize..8) {
        let mut rng = RngSeed::new(seed, 0).rng();
        let h = ClassifierFamily::UniformOffset { max_offset: 0.5 }.sample(2, &mut rng);
        let pts = DistributionSpec::uniform_ball(2).sample_n(n, &mut rng).unwrap();
        let cfg = InferenceConfig::default();
        if has_inferable_point(&pts, &h, QueryKind::Label, &cfg).unwrap() {
            prop_assert!(has_inferable_point(&pts, &h, QueryKind::Comparison, &cfg).unwrap());
        }
    }
}

#[test]
fn coverage_grows_with_n_and_query_power() {
    let spec = DistributionSpec::uniform_ball(3);
    for kind in [QueryKind::Label, QueryKind::Comparison] {
        let p = EstimateParams {
            kind,
            seed: 601,
            ..EstimateParams::default()
        };
        let means: Vec<f64> = [50, 100, 200, 400]
            .iter()
            .map(|&n| estimate_coverage(&spec, n, 50, 200, &p).unwrap().mean)
            .collect();
        assert!(means.windows(2).all(|w| w[1] >= w[0]), "{kind:?} {means:?}");
    }
    let label = EstimateParams {
        kind: QueryKind::Label,
        seed: 602,
        ..EstimateParams::default()
    };
    let cmp = EstimateParams {
        kind: QueryKind::Comparison,
        ..label
    };
    let l = estimate_coverage(&spec, 100, 50, 200, &label).unwrap();
    let c = estimate_coverage(&spec, 100, 50, 200, &cmp).unwrap();
    for (a, b) in l.per_trial.iter().zip(&c.per_trial) {
        assert!(b >= a);
    }
}

#[test]
fn too_few_labels_cover_nothing() {
    let p = EstimateParams {
        kind: QueryKind::Label,
        seed: 603,
        family: ClassifierFamily::UniformOffset { max_offset: 0.5 },
        ..EstimateParams::default()
    };
    let cov = estimate_coverage(&DistributionSpec::uniform_ball(3), 3, 50, 200, &p).unwrap();
    assert!(cov.mean <= 0.01, "coverage {}", cov.mean);
}

#[test]
fn subset_bound_is_uninformative_at_twenty_points() {
    // g_hat(10) is zero here, but even its Wilson upper bound times
    // C(20, 10) exceeds one, so the bound certifies nothing
    let p = EstimateParams {
        seed: 604,
        ..EstimateParams::default()
    };
    let g = estimate_avg_inference_dimension(&DistributionSpec::uniform_ball(2), 10, 2000, &p)
        .unwrap();
    let rhs = subset_inference_lower_bound(20, 10, g.wilson_interval.1);
    assert!(rhs <= 0.0, "bound {rhs} would need the exhaustive check");
}
