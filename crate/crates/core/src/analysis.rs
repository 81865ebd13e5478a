//! Brute-force inference checks, Monte Carlo estimates of the average
//! inference dimension and of coverage, and growth-curve fitting.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distributions::{ClassifierFamily, DistributionSpec, RngSeed};
use crate::error::{check_dim, Error, Result};
use crate::geometry::{lift_point, Hyperplane, LiftedVector, Point};
use crate::inference::{ConstraintSet, InferenceConfig, Inferrer};
use crate::oracle::{Oracle, QueryKind};

/// Two-sided 95% normal quantile.
const Z95: f64 = 1.959_963_984_540_054;

/// Wilson score interval for `successes` out of `trials` at 95%.
pub fn wilson_interval(successes: usize, trials: usize) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = Z95 * Z95;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = Z95 * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    // the interval always contains p; clamp away rounding
    ((center - half).clamp(0.0, p), (center + half).clamp(p, 1.0))
}

/// The answers to every query of `kind` on `points[keep]`, as a version
/// space.
///
/// For comparisons only the adjacent pairs of the sorted order are kept;
/// they are themselves answered comparisons and imply every other one, so
/// the cone is the same as with all pairs.
fn answer_set(
    items: &[LiftedVector],
    order: &[usize],
    keep: impl Fn(usize) -> bool,
    kind: QueryKind,
    oracle: &mut Oracle,
    dim: usize,
) -> Result<ConstraintSet> {
    let mut c = ConstraintSet::new(dim);
    for &i in order.iter().filter(|&&i| keep(i)) {
        let rec = oracle.label_item(&items[i])?;
        c.push_direction(&rec.subject, rec.answer)?;
    }
    if kind == QueryKind::Comparison {
        let kept: Vec<usize> = order.iter().copied().filter(|&i| keep(i)).collect();
        for w in kept.windows(2) {
            let rec = oracle.compare_items(&items[w[1]], &items[w[0]])?;
            c.push_direction(&rec.subject, rec.answer)?;
        }
    }
    Ok(c)
}

fn sorted_items(points: &[Point], oracle: &mut Oracle) -> Result<(Vec<LiftedVector>, Vec<usize>)> {
    let items: Vec<LiftedVector> = points.iter().map(lift_point).collect();
    let mut records = Vec::new();
    let order = oracle.sort_items(&items, &mut records)?;
    Ok((items, order))
}

/// Whether some point of `points` is inferred from the answers on the rest.
/// Queries go to a private oracle and are not counted anywhere.
pub fn has_inferable_point(
    points: &[Point],
    h: &Hyperplane,
    kind: QueryKind,
    config: &InferenceConfig,
) -> Result<bool> {
    if points.len() < 2 {
        return Err(Error::Precondition("need at least two points".into()));
    }
    let d = h.dim();
    for p in points {
        check_dim(d, p.dim())?;
    }
    let mut oracle = Oracle::new(h);
    let (items, order) = sorted_items(points, &mut oracle)?;
    for x in 0..points.len() {
        let c = answer_set(&items, &order, |i| i != x, kind, &mut oracle, d)?;
        if Inferrer::new(&c, *config).infer_item(&items[x])?.is_known() {
            return Ok(true);
        }
    }
    Ok(false)
}

/// Whether every `k`-subset of `points` contains a point inferred from the
/// rest of that subset. Exhaustive, so only for small `C(n, k)`.
pub fn all_k_subsets_inferable(
    points: &[Point],
    h: &Hyperplane,
    kind: QueryKind,
    k: usize,
    config: &InferenceConfig,
) -> Result<bool> {
    if k < 2 || k > points.len() {
        return Err(Error::Precondition("need 2 <= k <= n".into()));
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        let subset: Vec<Point> = idx.iter().map(|&i| points[i].clone()).collect();
        if !has_inferable_point(&subset, h, kind, config)? {
            return Ok(false);
        }
        // next combination in lexicographic order
        let n = points.len();
        let Some(pos) = (0..k).rev().find(|&i| idx[i] != i + n - k) else {
            return Ok(true);
        };
        idx[pos] += 1;
        for j in pos + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// `1 - C(n, k) * g`: the lower bound on the chance that every `k`-subset of
/// an `n`-sample has an inferable point, given `g(k) <= g`. Non-positive
/// values carry no information.
pub fn subset_inference_lower_bound(n: usize, k: usize, g: f64) -> f64 {
    1.0 - binomial(n, k) * g
}

pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GEstimate {
    pub n: usize,
    pub trials: usize,
    pub failures: usize,
    pub g_hat: f64,
    pub wilson_interval: (f64, f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimateParams {
    pub kind: QueryKind,
    pub family: ClassifierFamily,
    pub seed: u64,
    pub inference: InferenceConfig,
}

impl Default for EstimateParams {
    fn default() -> Self {
        EstimateParams {
            kind: QueryKind::Comparison,
            family: ClassifierFamily::Tangent,
            seed: 0,
            inference: InferenceConfig::default(),
        }
    }
}

/// Whether trial `t` of the `g` estimate found no inferable point.
pub fn g_trial(spec: &DistributionSpec, n: usize, t: u64, p: &EstimateParams) -> Result<bool> {
    let mut rng = RngSeed::new(p.seed, t).rng();
    let h = p.family.sample(spec.dim(), &mut rng);
    let pts = spec.sample_n(n, &mut rng)?;
    Ok(!has_inferable_point(&pts, &h, p.kind, &p.inference)?)
}

/// Monte Carlo estimate of `Pr[no point of an n-sample is inferable]` under
/// the configured classifier family. Trial `t` uses substream `t`.
pub fn estimate_avg_inference_dimension(
    spec: &DistributionSpec,
    n: usize,
    trials: usize,
    params: &EstimateParams,
) -> Result<GEstimate> {
    if n < 2 {
        return Err(Error::Precondition("n must be at least 2".into()));
    }
    if trials == 0 {
        return Err(Error::Precondition("trials must be positive".into()));
    }
    spec.validate()?;
    let outcomes = (0..trials as u64)
        .into_par_iter()
        .map(|t| g_trial(spec, n, t, params))
        .collect::<Result<Vec<bool>>>()?;
    let failures = outcomes.iter().filter(|&&f| f).count();
    Ok(GEstimate {
        n,
        trials,
        failures,
        g_hat: failures as f64 / trials as f64,
        wilson_interval: wilson_interval(failures, trials),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageEstimate {
    pub n: usize,
    pub trials: usize,
    pub mean: f64,
    pub std: f64,
    /// Normal-approximation 95% interval for the mean.
    pub interval: (f64, f64),
    pub per_trial: Vec<f64>,
}

/// Fraction of `fresh` new points whose label follows from all answers on
/// an `n`-sample, for trial `t`.
pub fn coverage_trial(
    spec: &DistributionSpec,
    n: usize,
    fresh: usize,
    t: u64,
    p: &EstimateParams,
) -> Result<f64> {
    let mut rng = RngSeed::new(p.seed, t).rng();
    let d = spec.dim();
    let h = p.family.sample(d, &mut rng);
    let train = spec.sample_n(n, &mut rng)?;
    let test = spec.sample_n(fresh, &mut rng)?;
    let mut oracle = Oracle::new(&h);
    let (items, order) = sorted_items(&train, &mut oracle)?;
    let c = answer_set(&items, &order, |_| true, p.kind, &mut oracle, d)?;
    let mut inf = Inferrer::new(&c, p.inference);
    let mut known = 0usize;
    for z in &test {
        if inf.infer(z)?.is_known() {
            known += 1;
        }
    }
    Ok(known as f64 / fresh.max(1) as f64)
}

/// Mean coverage over seeded trials; trial `t` uses substream `t`.
pub fn estimate_coverage(
    spec: &DistributionSpec,
    n: usize,
    trials: usize,
    fresh: usize,
    params: &EstimateParams,
) -> Result<CoverageEstimate> {
    if trials == 0 || fresh == 0 {
        return Err(Error::Precondition("trials and fresh points must be positive".into()));
    }
    spec.validate()?;
    let per_trial = (0..trials as u64)
        .into_par_iter()
        .map(|t| coverage_trial(spec, n, fresh, t, params))
        .collect::<Result<Vec<f64>>>()?;
    let m = trials as f64;
    let mean = per_trial.iter().sum::<f64>() / m;
    let std = if trials > 1 {
        (per_trial.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (m - 1.0)).sqrt()
    } else {
        0.0
    };
    let half = Z95 * std / m.sqrt();
    Ok(CoverageEstimate {
        n,
        trials,
        mean,
        std,
        interval: (mean - half, mean + half),
        per_trial,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GrowthModel {
    /// `a + b ln x`
    Log,
    /// `a + b ln^2 x`
    LogSquared,
    /// `a + b x`
    Linear,
    /// `a x^c`
    Power,
}

impl GrowthModel {
    pub const ALL: [GrowthModel; 4] =
        [GrowthModel::Log, GrowthModel::LogSquared, GrowthModel::Linear, GrowthModel::Power];

    pub fn name(self) -> &'static str {
        match self {
            GrowthModel::Log => "a+b*log(x)",
            GrowthModel::LogSquared => "a+b*log(x)^2",
            GrowthModel::Linear => "a+b*x",
            GrowthModel::Power => "a*x^c",
        }
    }

    pub fn is_logarithmic(self) -> bool {
        matches!(self, GrowthModel::Log | GrowthModel::LogSquared)
    }

    /// Evaluates the model with parameters `(a, b)` (`b` is the exponent for
    /// the power law).
    pub fn eval(self, a: f64, b: f64, x: f64) -> f64 {
        match self {
            GrowthModel::Log => a + b * x.ln(),
            GrowthModel::LogSquared => a + b * x.ln().powi(2),
            GrowthModel::Linear => a + b * x,
            GrowthModel::Power => a * x.powf(b),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelFit {
    pub model: GrowthModel,
    pub a: f64,
    pub b: f64,
    /// Sum of squared residuals in the original `y` scale.
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub fits: Vec<ModelFit>,
    pub preferred: GrowthModel,
}

impl FitReport {
    pub fn fit(&self, model: GrowthModel) -> &ModelFit {
        self.fits.iter().find(|f| f.model == model).expect("every model is fitted")
    }
}

/// Least-squares fits of the four growth models. Ties within rounding go to
/// the earlier model of [`GrowthModel::ALL`].
pub fn fit_growth(xs: &[f64], ys: &[f64]) -> Result<FitReport> {
    if xs.len() != ys.len() || xs.len() < 4 {
        return Err(Error::Precondition("need at least four (x, y) pairs".into()));
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(Error::Precondition("non-finite data".into()));
    }
    if xs[0] <= 0.0 || xs.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Precondition("xs must be positive and strictly increasing".into()));
    }
    let fits: Vec<ModelFit> = GrowthModel::ALL
        .iter()
        .map(|&m| match m {
            GrowthModel::Power => fit_power(xs, ys),
            _ => fit_affine(m, xs, ys),
        })
        .collect();
    let scale = ys.iter().map(|y| y * y).sum::<f64>().max(1e-300);
    let best = fits.iter().map(|f| f.residual).fold(f64::INFINITY, f64::min);
    let preferred = fits
        .iter()
        .find(|f| f.residual <= best + 1e-12 * scale)
        .expect("some residual is minimal")
        .model;
    Ok(FitReport { fits, preferred })
}

fn sse(model: GrowthModel, a: f64, b: f64, xs: &[f64], ys: &[f64]) -> f64 {
    xs.iter().zip(ys).map(|(&x, &y)| (y - model.eval(a, b, x)).powi(2)).sum()
}

fn fit_affine(model: GrowthModel, xs: &[f64], ys: &[f64]) -> ModelFit {
    let f: Vec<f64> = xs.iter().map(|&x| model.eval(0.0, 1.0, x)).collect();
    let n = xs.len() as f64;
    let mf = f.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sff: f64 = f.iter().map(|v| (v - mf).powi(2)).sum();
    let sfy: f64 = f.iter().zip(ys).map(|(v, y)| (v - mf) * (y - my)).sum();
    let b = if sff > 0.0 { sfy / sff } else { 0.0 };
    let a = my - b * mf;
    ModelFit {
        model,
        a,
        b,
        residual: sse(model, a, b, xs, ys),
    }
}

/// Power law by log-log regression, refined with damped Gauss-Newton on the
/// original-scale residual.
fn fit_power(xs: &[f64], ys: &[f64]) -> ModelFit {
    let m = GrowthModel::Power;
    let (mut a, mut c) = if ys.iter().all(|&y| y > 0.0) {
        let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
        let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
        let l = fit_affine(GrowthModel::Linear, &lx, &ly);
        (l.a.exp(), l.b)
    } else {
        (ys.iter().sum::<f64>() / ys.len() as f64, 0.0)
    };
    let mut best = sse(m, a, c, xs, ys);
    for _ in 0..200 {
        // normal equations of the 2x2 linearised problem
        let (mut jaa, mut jac, mut jcc, mut ga, mut gc) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (&x, &y) in xs.iter().zip(ys) {
            let p = x.powf(c);
            let da = p;
            let dc = a * p * x.ln();
            let r = y - a * p;
            jaa += da * da;
            jac += da * dc;
            jcc += dc * dc;
            ga += da * r;
            gc += dc * r;
        }
        let det = jaa * jcc - jac * jac;
        if det.abs() < 1e-300 {
            break;
        }
        let step_a = (jcc * ga - jac * gc) / det;
        let step_c = (jaa * gc - jac * ga) / det;
        let mut t = 1.0;
        let mut improved = false;
        while t > 1e-6 {
            let (na, nc) = (a + t * step_a, c + t * step_c);
            let r = sse(m, na, nc, xs, ys);
            if r.is_finite() && r < best {
                a = na;
                c = nc;
                improved = best - r > 1e-15 * best.max(1e-300);
                best = r;
                break;
            }
            t *= 0.5;
        }
        if !improved {
            break;
        }
    }
    ModelFit {
        model: m,
        a,
        b: c,
        residual: best,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(c: &[f64]) -> Point {
        Point::new(c.to_vec()).unwrap()
    }

    #[test]
    fn hull_interior_point_is_inferable() {
        let h = Hyperplane::new(vec![0.0, 1.0], 5.0).unwrap();
        let pts = vec![p(&[0.0, 0.0]), p(&[1.0, 0.0]), p(&[0.0, 1.0]), p(&[0.2, 0.2])];
        assert!(has_inferable_point(&pts, &h, QueryKind::Label, &InferenceConfig::default()).unwrap());
    }

    #[test]
    fn two_opposite_points_force_nothing() {
        let h = Hyperplane::new(vec![1.0, 0.0], 0.0).unwrap();
        let pts = vec![p(&[0.5, 0.1]), p(&[-0.4, 0.3])];
        assert!(!has_inferable_point(&pts, &h, QueryKind::Label, &InferenceConfig::default()).unwrap());
    }

    #[test]
    fn identical_points_infer_each_other() {
        let h = Hyperplane::new(vec![1.0, 0.0], 0.0).unwrap();
        let pts = vec![p(&[0.5, 0.1]), p(&[0.5, 0.1])];
        assert!(has_inferable_point(&pts, &h, QueryKind::Label, &InferenceConfig::default()).unwrap());
        assert!(has_inferable_point(&pts[..1], &h, QueryKind::Label, &InferenceConfig::default())
            .is_err());
    }

    #[test]
    fn wilson_contains_estimate() {
        for (s, n) in [(0, 10), (3, 10), (10, 10), (500, 2000)] {
            let (lo, hi) = wilson_interval(s, n);
            let phat = s as f64 / n as f64;
            assert!(lo <= phat && phat <= hi);
        }
        // textbook value: 0 of 10 gives upper ~0.2775
        assert!((wilson_interval(0, 10).1 - 0.277_532).abs() < 1e-5);
    }

    #[test]
    fn g_estimate_rejects_zero_trials_and_is_reproducible() {
        let spec = DistributionSpec::uniform_ball(2);
        let prm = EstimateParams {
            seed: 4,
            ..EstimateParams::default()
        };
        assert!(estimate_avg_inference_dimension(&spec, 6, 0, &prm).is_err());
        let a = estimate_avg_inference_dimension(&spec, 6, 40, &prm).unwrap();
        let b = estimate_avg_inference_dimension(&spec, 6, 40, &prm).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn two_point_label_samples_never_infer() {
        let spec = DistributionSpec::gaussian(3);
        let prm = EstimateParams {
            kind: QueryKind::Label,
            family: ClassifierFamily::UniformOffset { max_offset: 1.0 },
            seed: 5,
            ..EstimateParams::default()
        };
        let g = estimate_avg_inference_dimension(&spec, 2, 100, &prm).unwrap();
        assert_eq!(g.failures, 100);
    }

    #[test]
    fn planted_models_are_recovered() {
        let xs: Vec<f64> = (0..11).map(|i| 2f64.powi(i)).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 + 2.0 * x.ln()).collect();
        let r = fit_growth(&xs, &ys).unwrap();
        assert_eq!(r.preferred, GrowthModel::Log);
        assert!(r.fit(GrowthModel::Log).residual < 1e-18);
        let r = fit_growth(&xs, &xs).unwrap();
        assert_eq!(r.preferred, GrowthModel::Linear);
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 * x.powf(0.7)).collect();
        let r = fit_growth(&xs, &ys).unwrap();
        assert_eq!(r.preferred, GrowthModel::Power);
        assert!((r.fit(GrowthModel::Power).b - 0.7).abs() < 1e-6);
    }

    #[test]
    fn degenerate_xs_rejected() {
        assert!(fit_growth(&[1.0, 2.0, 2.0, 3.0], &[1.0; 4]).is_err());
        assert!(fit_growth(&[1.0, 2.0, 3.0], &[1.0; 3]).is_err());
        assert!(fit_growth(&[0.0, 1.0, 2.0, 3.0], &[1.0; 4]).is_err());
    }

    #[test]
    fn binomials() {
        assert_eq!(binomial(20, 10), 184_756.0);
        assert_eq!(binomial(5, 0), 1.0);
        assert_eq!(binomial(3, 5), 0.0);
        assert!(subset_inference_lower_bound(20, 10, 1e-3) < 0.0);
    }

    #[test]
    fn exhaustive_subset_check_small() {
        let h = Hyperplane::new(vec![0.0, 1.0], 5.0).unwrap();
        // a triangle plus an interior point: the 4-set has an inferable point,
        // the 3-subsets of the triangle corners do not
        let pts = vec![p(&[0.0, 0.0]), p(&[1.0, 0.0]), p(&[0.0, 1.0]), p(&[0.2, 0.2])];
        let c = InferenceConfig::default();
        assert!(all_k_subsets_inferable(&pts, &h, QueryKind::Label, 4, &c).unwrap());
        assert!(!all_k_subsets_inferable(&pts, &h, QueryKind::Label, 3, &c).unwrap());
    }
}
