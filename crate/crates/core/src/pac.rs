//! PAC learners: the comparison pool learner (localize the homogeneous
//! normal on whitened differences, then threshold along it) and the
//! label-only membership learner on the unit disk.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::distributions::{isotropize, DistributionSpec, TrialRng};
use crate::error::{check_dim, Error, Result};
use crate::geometry::{dot, norm, AffineMap, Hyperplane, Point, Sign};
use crate::lp::{self, LpOptions, Rows};
use crate::oracle::{Oracle, QueryLedger};

/// Knobs of the band-localization learner for homogeneous separators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BlParams {
    /// `C_b` in the band schedule `b_k = C_b * 2^-k`.
    pub band_constant: f64,
    /// Overrides the round count `ceil(log2(C_b / eps'))`.
    pub rounds: Option<usize>,
    /// Overrides the labels drawn per round.
    pub samples_per_round: Option<usize>,
    /// `C_m` in `C_m * (d + ln(1/delta) + ln ln(1/eps'))` labels per round.
    pub sample_constant: f64,
    /// Draws allowed per round before the band counts as starved.
    pub rejection_budget: usize,
    #[serde(skip)]
    pub lp: LpOptions,
}

impl Default for BlParams {
    fn default() -> Self {
        BlParams {
            band_constant: 1.0,
            rounds: None,
            samples_per_round: None,
            sample_constant: 4.0,
            rejection_budget: 1_000_000,
            lp: LpOptions::default(),
        }
    }
}

impl BlParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.band_constant > 0.0) || !(self.sample_constant > 0.0) {
            return Err(Error::Config("band and sample constants must be positive".into()));
        }
        if self.rounds == Some(0) || self.samples_per_round == Some(0) || self.rejection_budget == 0 {
            return Err(Error::Config("localization rounds and budgets must be positive".into()));
        }
        Ok(())
    }

    pub fn round_count(&self, eps_prime: f64) -> usize {
        self.rounds
            .unwrap_or_else(|| ((self.band_constant / eps_prime).log2().ceil().max(1.0)) as usize)
    }

    pub fn per_round(&self, dim: usize, eps_prime: f64, delta: f64) -> usize {
        self.samples_per_round.unwrap_or_else(|| {
            let loglog = (1.0 / eps_prime).ln().max(1.0).ln();
            let m = self.sample_constant * (dim as f64 + (1.0 / delta).ln() + loglog);
            m.ceil().max(1.0) as usize
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlOutcome {
    pub normal: Vec<f64>,
    pub rounds_run: usize,
    pub labels_used: usize,
    /// A band ran out of rejection budget and localization stopped early.
    pub starved: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PacParams {
    pub epsilon: f64,
    pub delta: f64,
    /// Overrides the per-repeat pool size `ceil(C / epsilon)`.
    pub pool_budget: Option<usize>,
    pub pool_constant: f64,
    /// Overrides the repeat count `ceil(C' * ln(1/delta))`.
    pub median_repeats: Option<usize>,
    pub median_constant: f64,
    /// Distance past the extreme projection used when a pool is one-sided.
    pub threshold_pad: f64,
    /// Unlabeled points used for whitening when no exact map is known.
    pub whitening_samples: usize,
    pub bl: BlParams,
}

impl Default for PacParams {
    fn default() -> Self {
        PacParams {
            epsilon: 0.05,
            delta: 0.1,
            pool_budget: None,
            pool_constant: 8.0,
            median_repeats: None,
            median_constant: 3.0,
            threshold_pad: 1e-6,
            whitening_samples: 4000,
            bl: BlParams::default(),
        }
    }
}

impl PacParams {
    pub fn validate(&self) -> Result<()> {
        let unit = |x: f64| x > 0.0 && x < 1.0;
        if !unit(self.epsilon) || !unit(self.delta) {
            return Err(Error::Config("epsilon and delta must lie in (0, 1)".into()));
        }
        if !(self.pool_constant > 0.0) || !(self.median_constant > 0.0) {
            return Err(Error::Config("pool and median constants must be positive".into()));
        }
        if self.pool_budget == Some(0) || self.median_repeats == Some(0) {
            return Err(Error::Config("pool budget and repeats must be positive".into()));
        }
        if !(self.threshold_pad >= 0.0) {
            return Err(Error::Config("threshold pad must be non-negative".into()));
        }
        self.bl.validate()
    }

    /// Error target handed to the normal learner, `eps / ln(1/eps)`.
    pub fn normal_error_target(&self) -> f64 {
        self.epsilon / (1.0 / self.epsilon).ln().max(1.0)
    }

    pub fn pool_size(&self) -> usize {
        self.pool_budget
            .unwrap_or_else(|| (self.pool_constant / self.epsilon).ceil() as usize)
    }

    pub fn repeats(&self) -> usize {
        self.median_repeats.unwrap_or_else(|| {
            ((self.median_constant * (1.0 / self.delta).ln()).ceil().max(1.0)) as usize
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PacOutcome {
    pub hypothesis: Hyperplane,
    pub ledger: QueryLedger,
    /// Disagreement mass against the hidden hyperplane; filled by callers
    /// that know it.
    pub measured_error: Option<f64>,
    pub normal_stats: Option<BlOutcome>,
    /// Per-repeat crossing values, in whitened projection coordinates.
    pub shifts: Vec<f64>,
}

/// Learns a homogeneous separator by band localization.
///
/// `draw` yields an opaque sample together with the point the learner sees;
/// `label` answers for the opaque sample. Round 1 samples freely; round
/// `k > 1` keeps only points with `|<u, x>| <= C_b * 2^-(k-1)`. Every round
/// refits the max-margin homogeneous separator over all labels so far.
pub fn balcan_long<T>(
    dim: usize,
    mut draw: impl FnMut(&mut TrialRng) -> Result<(T, Point)>,
    mut label: impl FnMut(&T) -> Result<Sign>,
    eps_prime: f64,
    delta: f64,
    params: &BlParams,
    rng: &mut TrialRng,
) -> Result<BlOutcome> {
    params.validate()?;
    if !(eps_prime > 0.0 && eps_prime < 1.0) || !(delta > 0.0 && delta < 1.0) {
        return Err(Error::Precondition("error target and delta must lie in (0, 1)".into()));
    }
    let rounds = params.round_count(eps_prime);
    let per_round = params.per_round(dim, eps_prime, delta);
    let mut labeled: Vec<(Point, Sign)> = Vec::new();
    let mut u: Option<Vec<f64>> = None;
    let mut starved = false;
    let mut rounds_run = 0;
    for k in 1..=rounds {
        let band = match &u {
            Some(_) if k > 1 => params.band_constant * 0.5f64.powi(k as i32 - 1),
            _ => f64::INFINITY,
        };
        let mut got = 0;
        let mut draws = 0;
        while got < per_round {
            if draws == params.rejection_budget {
                starved = true;
                break;
            }
            draws += 1;
            let (raw, x) = draw(rng)?;
            check_dim(dim, x.dim())?;
            if let Some(u) = &u {
                if dot(u, x.coords()).abs() > band {
                    continue;
                }
            }
            labeled.push((x, label(&raw)?));
            got += 1;
        }
        rounds_run = k;
        if let Some(fit) = max_margin(dim, &labeled, &params.lp)? {
            u = Some(fit);
        }
        if starved {
            break;
        }
    }
    let normal = match u {
        Some(u) => u,
        None => {
            let mut e = vec![0.0; dim];
            e[0] = 1.0;
            e
        }
    };
    Ok(BlOutcome {
        normal,
        rounds_run,
        labels_used: labeled.len(),
        starved,
    })
}

/// Unit normal maximizing the smallest angular margin `y <w, x>/|x|` over
/// the box `|w|_inf <= 1`. `None` when nothing usable was labeled.
fn max_margin(dim: usize, labeled: &[(Point, Sign)], opts: &LpOptions) -> Result<Option<Vec<f64>>> {
    let mut data = Vec::with_capacity(labeled.len() * (dim + 1));
    for (x, y) in labeled {
        let n = x.norm();
        if n < 1e-12 {
            continue;
        }
        let s = if *y == Sign::Negative { -1.0 } else { 1.0 };
        data.extend(x.coords().iter().map(|c| s * c / n));
        data.push(-1.0);
    }
    if data.is_empty() {
        return Ok(None);
    }
    let mut c = vec![0.0; dim + 1];
    c[dim] = 1.0;
    let sol = lp::maximize(&c, Rows::new(&data, dim + 1), opts)?;
    let w = &sol.witness[..dim];
    let n = norm(w);
    if n < 1e-12 {
        return Ok(None);
    }
    Ok(Some(w.iter().map(|c| c / n).collect()))
}

/// `<u, x>` for every point, in input order.
pub fn project(points: &[Point], u: &[f64]) -> Result<Vec<f64>> {
    points
        .iter()
        .map(|x| {
            check_dim(u.len(), x.dim())?;
            Ok(dot(u, x.coords()))
        })
        .collect()
}

/// Crossing value `t` along `u` such that `<u, x> > t` reads Positive.
///
/// Labels are binary-searched along the sorted projections with at most
/// `ceil(log2(N + 1))` label queries. Both points adjacent to the returned
/// crossing are always among the queried ones.
pub fn threshold(points: &[Point], u: &[f64], oracle: &mut Oracle, pad: f64) -> Result<f64> {
    let proj = project(points, u)?;
    threshold_projected(points, &proj, oracle, pad)
}

/// [`threshold`] with precomputed projections (which need not come from the
/// oracle's coordinates).
pub fn threshold_projected(
    points: &[Point],
    proj: &[f64],
    oracle: &mut Oracle,
    pad: f64,
) -> Result<f64> {
    if points.is_empty() {
        return Err(Error::Precondition("threshold needs a nonempty pool".into()));
    }
    check_dim(points.len(), proj.len())?;
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| proj[a].total_cmp(&proj[b]));
    let (mut lo, mut hi) = (0, order.len());
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if oracle.label_query(&points[order[mid]])?.answer == Sign::Positive {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    let at = |pos: usize| proj[order[pos]];
    Ok(if lo == 0 {
        at(0) - pad
    } else if lo == order.len() {
        at(order.len() - 1) + pad
    } else {
        0.5 * (at(lo - 1) + at(lo))
    })
}

/// Comparison pool PAC learner for an arbitrary hyperplane under `spec`.
pub fn comparison_pool_pac(
    spec: &DistributionSpec,
    params: &PacParams,
    oracle: &mut Oracle,
    rng: &mut TrialRng,
) -> Result<PacOutcome> {
    spec.validate()?;
    params.validate()?;
    let d = spec.dim();
    check_dim(d, oracle.dim())?;
    let start = oracle.ledger();
    let iso = match spec.isotropic_map() {
        Some(m) => m,
        None => isotropize(&spec.sample_n(params.whitening_samples.max(d + 1), rng)?)?,
    };

    let normal_stats = {
        let draw = |rng: &mut TrialRng| -> Result<((Point, Point), Point)> {
            let x = spec.sample(rng)?;
            let y = spec.sample(rng)?;
            let diff: Vec<f64> = x.coords().iter().zip(y.coords()).map(|(a, b)| a - b).collect();
            let z = iso.apply_linear(&diff)?;
            let z = Point::new(z.into_iter().map(|c| c / 2f64.sqrt()).collect())?;
            Ok(((x, y), z))
        };
        let oracle = &mut *oracle;
        let label = |(x, y): &(Point, Point)| Ok(oracle.comparison_query(x, y)?.answer);
        balcan_long(d, draw, label, params.normal_error_target(), params.delta, &params.bl, rng)?
    };
    let u = normal_stats.normal.clone();

    let mut shifts = Vec::with_capacity(params.repeats());
    for _ in 0..params.repeats() {
        let pool = spec.sample_n(params.pool_size(), rng)?;
        let proj = pool
            .iter()
            .map(|x| Ok(dot(&u, iso.apply(x)?.coords())))
            .collect::<Result<Vec<f64>>>()?;
        shifts.push(threshold_projected(&pool, &proj, oracle, params.threshold_pad)?);
    }
    let t = median(&shifts);
    let in_iso = Hyperplane::new(u, -t)?;
    let hypothesis = pull_back(&iso, &in_iso)?;
    let end = oracle.ledger();
    Ok(PacOutcome {
        hypothesis,
        ledger: QueryLedger {
            label_count: end.label_count - start.label_count,
            comparison_count: end.comparison_count - start.comparison_count,
        },
        measured_error: None,
        normal_stats: Some(normal_stats),
        shifts,
    })
}

fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Vertex count `ceil(C * eps^(-1/3))` of the boundary polygon, at least 3.
pub fn mqs_vertex_count(epsilon: f64, constant: f64) -> usize {
    ((constant * epsilon.powf(-1.0 / 3.0)).ceil() as usize).max(3)
}

/// Label-only membership-query learner on the uniform unit disk.
///
/// Queries a regular `k`-gon on the circle. If all vertices agree the whole
/// disk gets that label; otherwise each of the two sign-change arcs is
/// binary-searched down to arc length `eps / 2` and the output is the line
/// through the two located crossings.
pub fn label_mqs_pac_2d(epsilon: f64, constant: f64, oracle: &mut Oracle) -> Result<PacOutcome> {
    if oracle.dim() != 2 {
        return Err(Error::Precondition(format!(
            "the disk learner needs a planar oracle, got dimension {}",
            oracle.dim()
        )));
    }
    if !(epsilon > 0.0 && epsilon < 1.0) || !(constant > 0.0) {
        return Err(Error::Config("epsilon must lie in (0, 1) and the constant be positive".into()));
    }
    let start = oracle.ledger();
    let k = mqs_vertex_count(epsilon, constant);
    let step = 2.0 * PI / k as f64;
    let on_circle = |phi: f64| Point::from_vec(vec![phi.cos(), phi.sin()]);
    let mut labels = Vec::with_capacity(k);
    for i in 0..k {
        labels.push(oracle.label_query(&on_circle(i as f64 * step))?.answer);
    }
    let changes: Vec<usize> = (0..k).filter(|&i| labels[i] != labels[(i + 1) % k]).collect();
    let hypothesis = if changes.is_empty() {
        let offset = if labels[0] == Sign::Positive { 2.0 } else { -2.0 };
        Hyperplane::new(vec![1.0, 0.0], offset)?
    } else {
        if changes.len() != 2 {
            return Err(Error::Precondition("vertex labels are not cut by a single line".into()));
        }
        let mut crossing = [0.0; 2];
        for (slot, &i) in changes.iter().enumerate() {
            let (mut lo, mut hi) = (i as f64 * step, (i + 1) as f64 * step);
            while hi - lo > epsilon / 2.0 {
                let mid = 0.5 * (lo + hi);
                if oracle.label_query(&on_circle(mid))?.answer == labels[i] {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            crossing[slot] = 0.5 * (lo + hi);
        }
        let (p, q) = (on_circle(crossing[0]), on_circle(crossing[1]));
        let (dx, dy) = (q.coords()[0] - p.coords()[0], q.coords()[1] - p.coords()[1]);
        let normal = vec![-dy, dx];
        let offset = -dot(&normal, p.coords());
        let h = Hyperplane::new(normal, offset)?;
        // orient by any positive vertex
        let pos = labels.iter().position(|&s| s == Sign::Positive).expect("labels differ");
        if h.evaluate(&on_circle(pos as f64 * step))? < 0.0 {
            Hyperplane::new(h.normal().iter().map(|c| -c).collect(), -h.offset())?
        } else {
            h
        }
    };
    let end = oracle.ledger();
    Ok(PacOutcome {
        hypothesis,
        ledger: QueryLedger {
            label_count: end.label_count - start.label_count,
            comparison_count: end.comparison_count - start.comparison_count,
        },
        measured_error: None,
        normal_stats: None,
        shifts: Vec::new(),
    })
}

/// Monte Carlo disagreement mass of two classifiers under `spec`.
pub fn measure_error(
    truth: &Hyperplane,
    hypothesis: &Hyperplane,
    spec: &DistributionSpec,
    n: usize,
    rng: &mut TrialRng,
) -> Result<f64> {
    if n == 0 {
        return Err(Error::Precondition("error estimate needs points".into()));
    }
    let mut wrong = 0usize;
    for _ in 0..n {
        let x = spec.sample(rng)?;
        if truth.sign_at(&x)?.resolve_ties() != hypothesis.sign_at(&x)?.resolve_ties() {
            wrong += 1;
        }
    }
    Ok(wrong as f64 / n as f64)
}

/// Maps a whitened-space hyperplane back through the whitening `iso`.
pub fn pull_back(iso: &AffineMap, h: &Hyperplane) -> Result<Hyperplane> {
    iso.inverse().transform_hyperplane(h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::{ClassifierFamily, RngSeed};
    use crate::geometry::angle_between;

    #[test]
    fn project_examples() {
        let pts = vec![Point::new(vec![3.0, 9.0]).unwrap(), Point::new(vec![-1.0, 4.0]).unwrap()];
        assert_eq!(project(&pts, &[1.0, 0.0]).unwrap(), vec![3.0, -1.0]);
        let x = Point::new(vec![3.0, 4.0]).unwrap();
        let p = project(std::slice::from_ref(&x), &[0.6, 0.8]).unwrap();
        assert!((p[0] - 5.0).abs() < 1e-12);
        assert!(project(&pts, &[1.0, 0.0, 0.0]).is_err());
    }

    #[test]
    fn threshold_one_sided_pads_past_the_extreme() {
        let pts: Vec<Point> = (0..10).map(|i| Point::new(vec![i as f64 / 10.0]).unwrap()).collect();
        let mut o = Oracle::new(&Hyperplane::new(vec![1.0], 5.0).unwrap());
        let t = threshold(&pts, &[1.0], &mut o, 1e-6).unwrap();
        assert!((t - (0.0 - 1e-6)).abs() < 1e-15);
        let mut o = Oracle::new(&Hyperplane::new(vec![1.0], -5.0).unwrap());
        let t = threshold(&pts, &[1.0], &mut o, 1e-6).unwrap();
        assert!((t - (0.9 + 1e-6)).abs() < 1e-12);
    }

    #[test]
    fn threshold_query_bound() {
        let mut rng = RngSeed::new(3, 0).rng();
        for n in [1usize, 2, 3, 7, 100, 1000] {
            let pts = DistributionSpec::gaussian(2).sample_n(n, &mut rng).unwrap();
            let mut o = Oracle::new(&Hyperplane::new(vec![0.0, 1.0], 0.2).unwrap());
            threshold(&pts, &[0.0, 1.0], &mut o, 1e-6).unwrap();
            let bound = (n as f64).log2().ceil() as u64 + 1;
            assert!(o.ledger().label_count <= bound, "n={n}");
        }
    }

    #[test]
    fn normal_learner_single_round_is_passive_erm() {
        let mut rng = RngSeed::new(4, 0).rng();
        let v = [1.0, 0.0, 0.0];
        let params = BlParams {
            rounds: Some(1),
            samples_per_round: Some(500),
            ..BlParams::default()
        };
        let spec = DistributionSpec::gaussian(3);
        let out = balcan_long(
            3,
            |rng: &mut TrialRng| {
                let x = spec.sample(rng)?;
                Ok((x.clone(), x))
            },
            |x: &Point| Ok(Sign::of(dot(&v, x.coords())).resolve_ties()),
            0.05,
            0.1,
            &params,
            &mut rng,
        )
        .unwrap();
        assert_eq!(out.labels_used, 500);
        assert!(angle_between(&out.normal, &v) < 0.3);
    }

    #[test]
    fn starved_band_stops_early() {
        let mut rng = RngSeed::new(5, 0).rng();
        let params = BlParams {
            rounds: Some(6),
            samples_per_round: Some(20),
            rejection_budget: 30,
            ..BlParams::default()
        };
        let spec = DistributionSpec::gaussian(2);
        let out = balcan_long(
            2,
            |rng: &mut TrialRng| {
                let x = spec.sample(rng)?;
                Ok((x.clone(), x))
            },
            |x: &Point| Ok(Sign::of(x.coords()[1]).resolve_ties()),
            0.01,
            0.1,
            &params,
            &mut rng,
        )
        .unwrap();
        assert!(out.starved);
        assert!(out.rounds_run < 6);
    }

    #[test]
    fn homogeneous_target_under_isotropic_spec() {
        let mut rng = RngSeed::new(6, 0).rng();
        let spec = DistributionSpec::gaussian(3);
        let h = Hyperplane::new(vec![0.0, 0.6, 0.8], 0.0).unwrap();
        let mut o = Oracle::new(&h);
        let out = comparison_pool_pac(&spec, &PacParams::default(), &mut o, &mut rng).unwrap();
        assert!(out.hypothesis.offset().abs() < 0.05, "offset {}", out.hypothesis.offset());
        assert_eq!(out.ledger, o.ledger());
        let err = measure_error(&h, &out.hypothesis, &spec, 20_000, &mut rng).unwrap();
        assert!(err < 0.05, "error {err}");
    }

    #[test]
    fn whitening_path_for_unknown_maps() {
        let mut rng = RngSeed::new(7, 0).rng();
        let spec = DistributionSpec::cube(2);
        assert!(spec.isotropic_map().is_none());
        let h = ClassifierFamily::UniformOffset { max_offset: 0.5 }.sample(2, &mut rng);
        let mut o = Oracle::new(&h);
        let out = comparison_pool_pac(&spec, &PacParams::default(), &mut o, &mut rng).unwrap();
        let err = measure_error(&h, &out.hypothesis, &spec, 20_000, &mut rng).unwrap();
        assert!(err < 0.05, "error {err}");
    }

    #[test]
    fn mqs_line_outside_disk() {
        let h = Hyperplane::new(vec![1.0, 1.0], 3.0).unwrap();
        let mut o = Oracle::new(&h);
        let out = label_mqs_pac_2d(0.01, 2.0, &mut o).unwrap();
        assert_eq!(o.ledger().label_count as usize, mqs_vertex_count(0.01, 2.0));
        let mut rng = RngSeed::new(8, 0).rng();
        let spec = DistributionSpec::uniform_ball(2);
        assert_eq!(measure_error(&h, &out.hypothesis, &spec, 10_000, &mut rng).unwrap(), 0.0);
    }

    #[test]
    fn mqs_label_bound_and_orientation() {
        let mut rng = RngSeed::new(9, 0).rng();
        let spec = DistributionSpec::uniform_ball(2);
        for eps in [0.04, 0.005] {
            for _ in 0..20 {
                let h = ClassifierFamily::UniformOffset { max_offset: 0.9 }.sample(2, &mut rng);
                let mut o = Oracle::new(&h);
                let out = label_mqs_pac_2d(eps, 2.0, &mut o).unwrap();
                let k = mqs_vertex_count(eps, 2.0) as f64;
                let bound = k + 2.0 * (2.0 * PI * k / eps).log2().ceil();
                assert!(o.ledger().label_count as f64 <= bound);
                let err = measure_error(&h, &out.hypothesis, &spec, 20_000, &mut rng).unwrap();
                assert!(err <= eps, "eps {eps} error {err}");
            }
        }
    }

    #[test]
    fn mqs_rejects_non_planar_oracle() {
        let mut o = Oracle::new(&Hyperplane::new(vec![1.0, 0.0, 0.0], 0.0).unwrap());
        assert!(matches!(label_mqs_pac_2d(0.1, 2.0, &mut o), Err(Error::Precondition(_))));
    }

    #[test]
    fn param_formulas() {
        let p = PacParams::default();
        assert_eq!(p.pool_size(), 160);
        assert_eq!(p.repeats(), 7);
        let e = 0.05 / (20f64).ln();
        assert!((p.normal_error_target() - e).abs() < 1e-15);
        assert_eq!(p.bl.round_count(e), (1.0 / e).log2().ceil() as usize);
    }
}
