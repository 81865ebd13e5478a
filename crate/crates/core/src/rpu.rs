//! Reliable (RPU) learners: they never mislabel, and pay in queries for
//! whatever they cannot infer.

use std::collections::HashSet;

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::distributions::TrialRng;
use crate::error::{check_dim, Error, Result};
use crate::geometry::{lift_point, LiftedVector, Point, Sign};
use crate::inference::{ConstraintSet, InferenceConfig, InferenceVerdict, Inferrer};
use crate::oracle::{Oracle, QueryKind, QueryLedger, QueryRecord};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RpuParams {
    /// First subsample size; `d + 1` when unset.
    pub initial_subsample: Option<usize>,
    /// Loop exit size for label-only learning.
    pub residual_threshold_label: usize,
    /// Loop exit size for comparison learning.
    pub residual_threshold_comparison: usize,
    /// Rounds of the pool learner; `ceil(log2(n / epsilon))` when unset.
    pub rounds: Option<usize>,
    /// `c` in the pool subsample size `c * d * ln(d + 1) * ln(n)`.
    pub subsample_constant: f64,
    /// Overrides the pool subsample size.
    pub pool_subsample: Option<usize>,
    pub epsilon: f64,
    pub delta: f64,
    /// How comparison learners obtain labels of subsampled points.
    pub comparison_labels: ComparisonLabels,
    pub inference: InferenceConfig,
}

/// Label acquisition for comparison learners.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ComparisonLabels {
    /// Label-query every subsampled point.
    Every,
    /// Binary-search the sign change along the sorted order and read the
    /// remaining labels off it.
    #[default]
    BinarySearch,
}

impl Default for RpuParams {
    fn default() -> Self {
        RpuParams {
            initial_subsample: None,
            residual_threshold_label: 1,
            residual_threshold_comparison: 2,
            rounds: None,
            subsample_constant: 10.0,
            pool_subsample: None,
            epsilon: 0.05,
            delta: 0.1,
            comparison_labels: ComparisonLabels::default(),
            inference: InferenceConfig::default(),
        }
    }
}

impl RpuParams {
    pub fn validate(&self) -> Result<()> {
        let unit = |x: f64| x > 0.0 && x < 1.0;
        if !unit(self.epsilon) || !unit(self.delta) {
            return Err(Error::Config("epsilon and delta must lie in (0, 1)".into()));
        }
        if self.initial_subsample == Some(0) || self.pool_subsample == Some(0) || self.rounds == Some(0)
        {
            return Err(Error::Config("subsample sizes and rounds must be positive".into()));
        }
        if !(self.subsample_constant > 0.0) {
            return Err(Error::Config("subsample constant must be positive".into()));
        }
        Ok(())
    }

    fn residual_threshold(&self, kind: QueryKind) -> usize {
        match kind {
            QueryKind::Label => self.residual_threshold_label,
            QueryKind::Comparison => self.residual_threshold_comparison,
        }
    }
}

/// How a point's label was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Resolution {
    /// Label-queried as part of a subsample.
    Queried,
    /// Implied by the answers so far.
    Inferred,
    /// Label-queried after the main loop ended.
    Residual,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundTrace {
    pub round: usize,
    pub subsample_size: usize,
    pub uninferred_before: usize,
    /// Points resolved this round, subsample included.
    pub inferred: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RpuOutcome {
    pub labels: Vec<Sign>,
    pub resolution: Vec<Resolution>,
    pub ledger: QueryLedger,
    pub rounds_used: usize,
    pub subsample_trace: Vec<RoundTrace>,
}

impl RpuOutcome {
    pub fn count(&self, r: Resolution) -> usize {
        self.resolution.iter().filter(|&&x| x == r).count()
    }

    /// Fraction of points resolved inside the rounds (not residual labelling).
    pub fn resolved_in_rounds(&self) -> f64 {
        if self.labels.is_empty() {
            return 1.0;
        }
        1.0 - self.count(Resolution::Residual) as f64 / self.labels.len() as f64
    }
}

/// Learner-side memory of the answers collected over a fixed item list.
///
/// For comparison learning it keeps one ascending order of every subsampled
/// item. Adjacent items of that order were always compared directly by the
/// merge, so the chain of adjacent rows is a subset of the answered
/// comparisons that implies all of them.
struct AnswerBook<'a> {
    items: &'a [LiftedVector],
    kind: QueryKind,
    labelling: ComparisonLabels,
    labels: Vec<Option<Sign>>,
    order: Vec<usize>,
    compared: HashSet<(usize, usize)>,
}

impl<'a> AnswerBook<'a> {
    fn new(items: &'a [LiftedVector], kind: QueryKind, labelling: ComparisonLabels) -> Self {
        AnswerBook {
            items,
            kind,
            labelling,
            labels: vec![None; items.len()],
            order: Vec::new(),
            compared: HashSet::new(),
        }
    }

    /// Answers every query of the book's kind on `batch` (fresh items).
    fn query(&mut self, batch: &[usize], oracle: &mut Oracle) -> Result<()> {
        if self.kind == QueryKind::Label || self.labelling == ComparisonLabels::Every {
            for &i in batch {
                let rec = oracle.label_item(&self.items[i])?;
                self.labels[i] = Some(rec.answer);
            }
        }
        if self.kind == QueryKind::Comparison {
            let mut records = Vec::new();
            let sorted = self.sort(batch, oracle, &mut records)?;
            let prev = std::mem::take(&mut self.order);
            self.order = self.merge(&prev, &sorted, oracle)?;
            if self.labelling == ComparisonLabels::BinarySearch {
                self.binary_search_labels(oracle)?;
            }
        }
        Ok(())
    }

    /// Labels the whole order with `O(log m)` label queries: labels are
    /// monotone along it, so only the crossing needs locating, and only
    /// among items between the innermost known labels.
    fn binary_search_labels(&mut self, oracle: &mut Oracle) -> Result<()> {
        let known = |s: Sign| {
            let labels = &self.labels;
            move |i: &usize| labels[*i] == Some(s)
        };
        // lo: last known Negative, hi: first known Positive (as positions + 1)
        let mut lo = self
            .order
            .iter()
            .rposition(known(Sign::Negative))
            .map_or(0, |p| p + 1);
        let mut hi = self
            .order
            .iter()
            .position(known(Sign::Positive))
            .unwrap_or(self.order.len());
        // an end with no known label on its side is checked first: when all
        // labels agree that single query settles the stretch
        if lo < hi && lo == 0 {
            let rec = oracle.label_item(&self.items[self.order[lo]])?;
            self.labels[self.order[lo]] = Some(rec.answer);
            if rec.answer == Sign::Positive {
                hi = lo;
            } else {
                lo += 1;
            }
        }
        if lo < hi && hi == self.order.len() {
            let rec = oracle.label_item(&self.items[self.order[hi - 1]])?;
            self.labels[self.order[hi - 1]] = Some(rec.answer);
            if rec.answer == Sign::Positive {
                hi -= 1;
            } else {
                lo = hi;
            }
        }
        while lo < hi {
            let mid = lo + (hi - lo) / 2;
            let rec = oracle.label_item(&self.items[self.order[mid]])?;
            self.labels[self.order[mid]] = Some(rec.answer);
            if rec.answer == Sign::Positive {
                hi = mid;
            } else {
                lo = mid + 1;
            }
        }
        for (pos, &i) in self.order.iter().enumerate() {
            self.labels[i] = Some(if pos < lo { Sign::Negative } else { Sign::Positive });
        }
        Ok(())
    }

    fn note(&mut self, a: usize, b: usize) {
        self.compared.insert((a.min(b), a.max(b)));
    }

    fn sort(
        &mut self,
        idx: &[usize],
        oracle: &mut Oracle,
        records: &mut Vec<QueryRecord>,
    ) -> Result<Vec<usize>> {
        if idx.len() <= 1 {
            return Ok(idx.to_vec());
        }
        let mid = idx.len() / 2;
        let left = self.sort(&idx[..mid], oracle, records)?;
        let right = self.sort(&idx[mid..], oracle, records)?;
        let mut pairs = Vec::new();
        let merged = oracle.merge_items_tracked(self.items, &left, &right, records, &mut pairs)?;
        for (a, b) in pairs {
            self.note(a, b);
        }
        Ok(merged)
    }

    fn merge(&mut self, left: &[usize], right: &[usize], oracle: &mut Oracle) -> Result<Vec<usize>> {
        let mut records = Vec::new();
        let mut pairs = Vec::new();
        let merged = oracle.merge_items_tracked(self.items, left, right, &mut records, &mut pairs)?;
        for (a, b) in pairs {
            self.note(a, b);
        }
        Ok(merged)
    }

    /// The constraint set implied by every answer so far.
    fn constraints(&self) -> Result<ConstraintSet> {
        let dim = self.items.first().map_or(0, |x| x.dim() - 1);
        let mut c = ConstraintSet::new(dim);
        match self.kind {
            QueryKind::Label => {
                for (i, l) in self.labels.iter().enumerate() {
                    if let Some(s) = l {
                        c.push_direction(&self.items[i], *s)?;
                    }
                }
            }
            QueryKind::Comparison => {
                for w in self.order.windows(2) {
                    debug_assert!(self.compared.contains(&(w[0].min(w[1]), w[0].max(w[1]))));
                    c.push_direction(&self.items[w[1]].minus(&self.items[w[0]])?, Sign::Positive)?;
                }
                // along the chain labels are monotone; the innermost pair of
                // opposite labels implies the rest
                let pos = |i: &usize| self.labels[*i];
                let lowest_positive = self.order.iter().position(|i| pos(i) == Some(Sign::Positive));
                let highest_negative = self.order.iter().rposition(|i| pos(i) == Some(Sign::Negative));
                let monotone = match (lowest_positive, highest_negative) {
                    (Some(p), Some(n)) => n < p,
                    _ => true,
                };
                if monotone {
                    if let Some(p) = lowest_positive {
                        c.push_direction(&self.items[self.order[p]], Sign::Positive)?;
                    }
                    if let Some(n) = highest_negative {
                        c.push_direction(&self.items[self.order[n]], Sign::Negative)?;
                    }
                } else {
                    for &i in &self.order {
                        if let Some(s) = self.labels[i] {
                            c.push_direction(&self.items[i], s)?;
                        }
                    }
                }
            }
        }
        Ok(c)
    }
}

fn draw(uninferred: &[usize], size: usize, rng: &mut TrialRng) -> Vec<usize> {
    if size >= uninferred.len() {
        return uninferred.to_vec();
    }
    let mut picks: Vec<usize> = index::sample(rng, uninferred.len(), size)
        .into_iter()
        .map(|i| uninferred[i])
        .collect();
    picks.sort_unstable();
    picks
}

struct LearnerState<'a> {
    book: AnswerBook<'a>,
    labels: Vec<Option<Sign>>,
    resolution: Vec<Option<Resolution>>,
    uninferred: Vec<usize>,
    trace: Vec<RoundTrace>,
}

impl<'a> LearnerState<'a> {
    fn new(items: &'a [LiftedVector], kind: QueryKind, labelling: ComparisonLabels) -> Self {
        LearnerState {
            book: AnswerBook::new(items, kind, labelling),
            labels: vec![None; items.len()],
            resolution: vec![None; items.len()],
            uninferred: (0..items.len()).collect(),
            trace: Vec::new(),
        }
    }

    /// One subsample-query-infer-restrict round; returns how many points it
    /// resolved.
    fn round(
        &mut self,
        size: usize,
        oracle: &mut Oracle,
        config: &InferenceConfig,
        rng: &mut TrialRng,
    ) -> Result<usize> {
        let before = self.uninferred.len();
        let batch = draw(&self.uninferred, size, rng);
        self.book.query(&batch, oracle)?;
        for &i in &batch {
            self.labels[i] = self.book.labels[i];
            self.resolution[i] = Some(Resolution::Queried);
        }
        let c = self.book.constraints()?;
        let mut inferrer = Inferrer::new(&c, *config);
        let mut resolved = batch.len();
        let mut remaining = Vec::with_capacity(before);
        for &i in &self.uninferred {
            if self.resolution[i].is_some() {
                continue;
            }
            match inferrer.infer_item(&self.book.items[i])? {
                InferenceVerdict::Unknown => remaining.push(i),
                v => {
                    self.labels[i] = v.sign();
                    self.resolution[i] = Some(Resolution::Inferred);
                    resolved += 1;
                }
            }
        }
        self.uninferred = remaining;
        self.trace.push(RoundTrace {
            round: self.trace.len() + 1,
            subsample_size: batch.len(),
            uninferred_before: before,
            inferred: resolved,
        });
        Ok(resolved)
    }

    fn finish(mut self, oracle: &mut Oracle, start: QueryLedger) -> Result<RpuOutcome> {
        for &i in &self.uninferred {
            let rec = oracle.label_item(&self.book.items[i])?;
            self.labels[i] = Some(rec.answer);
            self.resolution[i] = Some(Resolution::Residual);
        }
        let end = oracle.ledger();
        Ok(RpuOutcome {
            labels: self.labels.into_iter().map(|l| l.expect("every point resolved")).collect(),
            resolution: self
                .resolution
                .into_iter()
                .map(|r| r.expect("every point resolved"))
                .collect(),
            ledger: QueryLedger {
                label_count: end.label_count - start.label_count,
                comparison_count: end.comparison_count - start.comparison_count,
            },
            rounds_used: self.trace.len(),
            subsample_trace: self.trace,
        })
    }
}

/// The doubling learner: guesses a small subsample size, doubles it after
/// every round that resolves fewer than half of the remaining points, and
/// label-queries whatever is left once at most `g` points remain.
pub fn perfect_learning(
    sample: &[Point],
    kind: QueryKind,
    params: &RpuParams,
    oracle: &mut Oracle,
    rng: &mut TrialRng,
) -> Result<RpuOutcome> {
    let items = lift_sample(sample, oracle)?;
    perfect_learning_items(&items, kind, params, oracle, rng)
}

/// [`perfect_learning`] over arbitrary lifted items.
pub fn perfect_learning_items(
    items: &[LiftedVector],
    kind: QueryKind,
    params: &RpuParams,
    oracle: &mut Oracle,
    rng: &mut TrialRng,
) -> Result<RpuOutcome> {
    if items.is_empty() {
        return Err(Error::Precondition("perfect learning needs a nonempty sample".into()));
    }
    for it in items {
        check_dim(oracle.lifted_dim(), it.dim())?;
    }
    let start = oracle.ledger();
    let threshold = params.residual_threshold(kind);
    let mut size = params.initial_subsample.unwrap_or(oracle.lifted_dim()).max(1);
    let mut state = LearnerState::new(items, kind, params.comparison_labels);
    while state.uninferred.len() > threshold {
        let before = state.uninferred.len();
        let resolved = state.round(size, oracle, &params.inference, rng)?;
        if 2 * resolved < before {
            size *= 2;
        }
    }
    state.finish(oracle, start)
}

/// Pool subsample size `ceil(c * d * ln(d + 1) * ln(n))`, clamped to `[1, n]`.
pub fn pool_subsample_size(params: &RpuParams, dim: usize, n: usize) -> usize {
    if let Some(k) = params.pool_subsample {
        return k.clamp(1, n.max(1));
    }
    let d = dim as f64;
    let k = (params.subsample_constant * d * (d + 1.0).ln() * (n as f64).ln()).ceil();
    (k.max(1.0) as usize).min(n.max(1))
}

/// Default round count `ceil(log2(n / epsilon))`.
pub fn pool_rounds(params: &RpuParams, n: usize) -> usize {
    params
        .rounds
        .unwrap_or_else(|| ((n as f64 / params.epsilon).log2().ceil() as usize).max(1))
}

/// The fixed-round pool learner: `T` rounds of drawing `k` uninferred
/// points, querying labels and comparisons on them, and inferring the rest.
/// Answers accumulate across rounds.
pub fn pool_rpu_learn(
    pool: &[Point],
    params: &RpuParams,
    oracle: &mut Oracle,
    rng: &mut TrialRng,
) -> Result<RpuOutcome> {
    params.validate()?;
    if pool.is_empty() {
        return Err(Error::Precondition("pool is empty".into()));
    }
    let items = lift_sample(pool, oracle)?;
    let start = oracle.ledger();
    let k = pool_subsample_size(params, oracle.dim(), pool.len());
    let rounds = pool_rounds(params, pool.len());
    let mut state = LearnerState::new(&items, QueryKind::Comparison, params.comparison_labels);
    for _ in 0..rounds {
        if state.uninferred.is_empty() {
            break;
        }
        state.round(k, oracle, &params.inference, rng)?;
    }
    state.finish(oracle, start)
}

/// Passive reliable prediction from a fixed set of answered queries.
pub fn passive_rpu_predict(
    dim: usize,
    labeled_records: &[QueryRecord],
    z: &Point,
    config: &InferenceConfig,
) -> Result<InferenceVerdict> {
    let c = ConstraintSet::from_records(dim, labeled_records)?;
    crate::inference::infer(&c, z, config)
}

fn lift_sample(sample: &[Point], oracle: &Oracle) -> Result<Vec<LiftedVector>> {
    sample
        .iter()
        .map(|x| {
            check_dim(oracle.dim(), x.dim())?;
            Ok(lift_point(x))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::{sample_tangent_hyperplane, DistributionSpec, RngSeed};
    use crate::geometry::Hyperplane;

    fn setup(d: usize, n: usize, seed: u64) -> (Vec<Point>, Hyperplane, TrialRng) {
        let mut rng = RngSeed::new(seed, 0).rng();
        let h = sample_tangent_hyperplane(d, &mut rng);
        let pts = DistributionSpec::uniform_ball(d).sample_n(n, &mut rng).unwrap();
        (pts, h, rng)
    }

    fn check_labels(pts: &[Point], h: &Hyperplane, out: &RpuOutcome) {
        for (x, s) in pts.iter().zip(&out.labels) {
            assert_eq!(h.sign_at(x).unwrap().resolve_ties(), *s);
        }
    }

    #[test]
    fn single_point_label_kind() {
        let (pts, h, mut rng) = setup(3, 1, 1);
        let mut o = Oracle::new(&h);
        let out = perfect_learning(&pts, QueryKind::Label, &RpuParams::default(), &mut o, &mut rng)
            .unwrap();
        assert_eq!(out.ledger.label_count, 1);
        assert_eq!(out.ledger.comparison_count, 0);
        assert_eq!(out.resolution, vec![Resolution::Residual]);
        check_labels(&pts, &h, &out);
    }

    #[test]
    fn empty_sample_rejected() {
        let mut o = Oracle::new(&Hyperplane::new(vec![1.0], 0.0).unwrap());
        let mut rng = RngSeed::new(0, 0).rng();
        assert!(perfect_learning(&[], QueryKind::Label, &RpuParams::default(), &mut o, &mut rng)
            .is_err());
    }

    #[test]
    fn ledgers_agree_and_labels_are_exact() {
        for kind in [QueryKind::Label, QueryKind::Comparison] {
            let (pts, h, mut rng) = setup(2, 200, 3);
            let mut o = Oracle::new(&h);
            let out = perfect_learning(&pts, kind, &RpuParams::default(), &mut o, &mut rng).unwrap();
            check_labels(&pts, &h, &out);
            assert_eq!(out.ledger, o.ledger());
            assert!(out.ledger.label_count <= 200);
        }
    }

    #[test]
    fn comparison_kind_beats_querying_everything() {
        let (pts, h, mut rng) = setup(3, 256, 4);
        let mut o = Oracle::new(&h);
        let out =
            perfect_learning(&pts, QueryKind::Comparison, &RpuParams::default(), &mut o, &mut rng)
                .unwrap();
        check_labels(&pts, &h, &out);
        assert!(out.ledger.total() < 256, "total {}", out.ledger.total());
    }

    #[test]
    fn pool_learner_single_round_everything() {
        let (pts, h, mut rng) = setup(3, 60, 5);
        let params = RpuParams {
            rounds: Some(1),
            pool_subsample: Some(60),
            comparison_labels: ComparisonLabels::Every,
            ..RpuParams::default()
        };
        let mut o = Oracle::new(&h);
        let out = pool_rpu_learn(&pts, &params, &mut o, &mut rng).unwrap();
        check_labels(&pts, &h, &out);
        assert_eq!(out.count(Resolution::Queried), 60);
        assert_eq!(out.ledger.label_count, 60);
    }

    #[test]
    fn binary_search_labels_are_logarithmic() {
        let mut rng = RngSeed::new(15, 0).rng();
        let pts = DistributionSpec::uniform_ball(3).sample_n(60, &mut rng).unwrap();
        let h = Hyperplane::new(vec![0.3, -0.2, 0.9], 0.1).unwrap();
        let params = RpuParams {
            rounds: Some(1),
            pool_subsample: Some(60),
            ..RpuParams::default()
        };
        let mut o = Oracle::new(&h);
        let out = pool_rpu_learn(&pts, &params, &mut o, &mut rng).unwrap();
        check_labels(&pts, &h, &out);
        assert!(out.labels.contains(&Sign::Negative) && out.labels.contains(&Sign::Positive));
        assert_eq!(out.count(Resolution::Queried), 60);
        // two end checks plus ceil(log2(59))
        assert!(out.ledger.label_count <= 8, "labels {}", out.ledger.label_count);
    }

    #[test]
    fn pool_subsample_formula() {
        let p = RpuParams::default();
        // 10 * 3 * ln 4 * ln 2000
        let expected = (30.0 * 4f64.ln() * 2000f64.ln()).ceil() as usize;
        assert_eq!(pool_subsample_size(&p, 3, 2000), expected);
        assert_eq!(pool_subsample_size(&p, 3, 10), 10);
        assert_eq!(pool_rounds(&p, 2000), (2000.0f64 / 0.05).log2().ceil() as usize);
    }

    #[test]
    fn passive_prediction_without_records_is_unknown() {
        let z = Point::new(vec![0.1, 0.2]).unwrap();
        assert_eq!(
            passive_rpu_predict(2, &[], &z, &InferenceConfig::default()).unwrap(),
            InferenceVerdict::Unknown
        );
    }

    #[test]
    fn chain_rows_are_answered_comparisons() {
        let (pts, h, mut rng) = setup(2, 40, 6);
        let items: Vec<LiftedVector> = pts.iter().map(lift_point).collect();
        let mut o = Oracle::new(&h);
        let mut book = AnswerBook::new(&items, QueryKind::Comparison, ComparisonLabels::Every);
        let all: Vec<usize> = (0..40).collect();
        let first = draw(&all, 10, &mut rng);
        book.query(&first, &mut o).unwrap();
        let rest: Vec<usize> = all.iter().copied().filter(|i| !first.contains(i)).collect();
        book.query(&draw(&rest, 15, &mut rng), &mut o).unwrap();
        assert_eq!(book.order.len(), 25);
        for w in book.order.windows(2) {
            assert!(book.compared.contains(&(w[0].min(w[1]), w[0].max(w[1]))));
            assert!(h.evaluate(&pts[w[0]]).unwrap() <= h.evaluate(&pts[w[1]]).unwrap() + 1e-12);
        }
    }
}
