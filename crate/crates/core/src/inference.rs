//! Version-space inference over the lifted weight `w = (v, b)`.
//!
//! Each answered query becomes a row `<w, dir> >= 0`. A point `z` has a
//! determined label when no consistent `w` in the box `|w|_inf <= 1` puts it
//! on the other side with margin `tau`. Solver failures never produce a
//! verdict; they surface as [`InferenceVerdict::Unknown`].

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::geometry::{dot, lift_point, LiftedVector, Point, Sign};
use crate::lp::{self, LpOptions, LpSolution, Rows};
use crate::oracle::QueryRecord;

/// Witnesses kept per batch; older ones are overwritten round-robin.
const WITNESS_CACHE: usize = 48;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InferenceConfig {
    /// Strict margin `tau` demanded of the opposite label.
    pub margin: f64,
    /// Row violation tolerated in a primal witness.
    pub slack: f64,
    #[serde(skip)]
    pub lp: LpOptions,
}

impl Default for InferenceConfig {
    fn default() -> Self {
        InferenceConfig {
            margin: 1e-7,
            slack: 1e-9,
            lp: LpOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum InferenceVerdict {
    InferredPositive,
    InferredNegative,
    Unknown,
}

impl InferenceVerdict {
    pub fn sign(self) -> Option<Sign> {
        match self {
            InferenceVerdict::InferredPositive => Some(Sign::Positive),
            InferenceVerdict::InferredNegative => Some(Sign::Negative),
            InferenceVerdict::Unknown => None,
        }
    }

    pub fn is_known(self) -> bool {
        self != InferenceVerdict::Unknown
    }
}

/// The consistency cone: rows `<w, dir> >= 0` in lifted coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintSet {
    lifted_dim: usize,
    directions: Vec<LiftedVector>,
    /// Unit-normalised copies of the nonzero directions, row-major.
    normalized: Vec<f64>,
}

impl ConstraintSet {
    /// An empty set over points of dimension `dim`.
    pub fn new(dim: usize) -> ConstraintSet {
        ConstraintSet {
            lifted_dim: dim + 1,
            directions: Vec::new(),
            normalized: Vec::new(),
        }
    }

    pub fn from_records<'a>(
        dim: usize,
        records: impl IntoIterator<Item = &'a QueryRecord>,
    ) -> Result<ConstraintSet> {
        let mut c = ConstraintSet::new(dim);
        for r in records {
            c.push_record(r)?;
        }
        Ok(c)
    }

    pub fn dim(&self) -> usize {
        self.lifted_dim - 1
    }

    pub fn lifted_dim(&self) -> usize {
        self.lifted_dim
    }

    pub fn len(&self) -> usize {
        self.directions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.directions.is_empty()
    }

    /// Signed directions in insertion order.
    pub fn directions(&self) -> &[LiftedVector] {
        &self.directions
    }

    /// Appends the row implied by `r`: its subject, negated when the answer
    /// is `Negative`.
    pub fn push_record(&mut self, r: &QueryRecord) -> Result<()> {
        self.push_direction(&r.subject, r.answer)
    }

    pub fn push_direction(&mut self, subject: &LiftedVector, answer: Sign) -> Result<()> {
        check_dim(self.lifted_dim, subject.dim())?;
        let dir = match answer {
            Sign::Negative => subject.negated(),
            Sign::Positive | Sign::Zero => subject.clone(),
        };
        let n = dir.dot(dir.coords()).sqrt();
        if n > 0.0 {
            self.normalized.extend(dir.coords().iter().map(|c| c / n));
        }
        self.directions.push(dir);
        Ok(())
    }

    /// Functional form of [`ConstraintSet::push_record`].
    pub fn add_record(mut self, r: &QueryRecord) -> Result<ConstraintSet> {
        self.push_record(r)?;
        Ok(self)
    }

    /// Whether `w` satisfies every row up to `slack`.
    pub fn satisfied_by(&self, w: &[f64], slack: f64) -> bool {
        self.directions.iter().all(|d| d.dot(w) >= -slack)
    }

    fn rows(&self) -> Rows<'_> {
        Rows::new(&self.normalized, self.lifted_dim)
    }
}

fn decide(sol: &LpSolution, config: &InferenceConfig) -> Result<bool> {
    if sol.witness_violation <= config.slack && sol.witness_value >= config.margin {
        Ok(true)
    } else if sol.upper_bound < config.margin {
        Ok(false)
    } else {
        Err(Error::Solver(format!(
            "undecided: witness {:e} (violation {:e}), bound {:e}",
            sol.witness_value, sol.witness_violation, sol.upper_bound
        )))
    }
}

/// Is there `w` with `|w|_inf <= 1`, every row of `c` holding, and
/// `<w, e> >= tau` for every `e` in `extra`?
pub fn feasible(c: &ConstraintSet, extra: &[LiftedVector], config: &InferenceConfig) -> Result<bool> {
    feasible_with_witness(c, extra, config).map(|(ok, _)| ok)
}

fn feasible_with_witness(
    c: &ConstraintSet,
    extra: &[LiftedVector],
    config: &InferenceConfig,
) -> Result<(bool, Option<Vec<f64>>)> {
    for e in extra {
        check_dim(c.lifted_dim, e.dim())?;
    }
    match extra {
        [] => Ok((true, Some(vec![0.0; c.lifted_dim]))),
        [e] => {
            let sol = lp::maximize(e.coords(), c.rows(), &config.lp)?;
            let ok = decide(&sol, config)?;
            Ok((ok, ok.then_some(sol.witness)))
        }
        _ => {
            // maximise t subject to <w, e_j> - t >= 0, over (w, t) in the box
            let n = c.lifted_dim + 1;
            let mut rows = Vec::with_capacity((c.len() + extra.len()) * n);
            for r in c.normalized.chunks(c.lifted_dim) {
                rows.extend_from_slice(r);
                rows.push(0.0);
            }
            for e in extra {
                let norm = (e.dot(e.coords()) + 1.0).sqrt();
                rows.extend(e.coords().iter().map(|x| x / norm));
                rows.push(-1.0 / norm);
            }
            let mut objective = vec![0.0; n];
            objective[n - 1] = 1.0;
            let sol = lp::maximize(&objective, Rows::new(&rows, n), &config.lp)?;
            // re-check the original margins on the witness's w part
            let w = &sol.witness[..c.lifted_dim];
            let margins_hold = extra.iter().all(|e| e.dot(w) >= config.margin);
            let rows_hold = c.satisfied_by(w, config.slack * 10.0);
            if sol.witness_violation <= config.slack && margins_hold && rows_hold {
                Ok((true, Some(w.to_vec())))
            } else if sol.upper_bound < config.margin {
                Ok((false, None))
            } else {
                Err(Error::Solver("undecided multi-row feasibility".into()))
            }
        }
    }
}

/// Decides the label of a lifted item under the version space `c`, reusing
/// witnesses of earlier feasible programs.
pub struct Inferrer<'a> {
    set: &'a ConstraintSet,
    config: InferenceConfig,
    witnesses: Vec<Vec<f64>>,
    next_slot: usize,
}

impl<'a> Inferrer<'a> {
    pub fn new(set: &'a ConstraintSet, config: InferenceConfig) -> Self {
        Inferrer {
            set,
            config,
            witnesses: Vec::new(),
            next_slot: 0,
        }
    }

    fn remember(&mut self, w: Vec<f64>) {
        if self.witnesses.len() < WITNESS_CACHE {
            self.witnesses.push(w);
        } else {
            self.witnesses[self.next_slot] = w;
            self.next_slot = (self.next_slot + 1) % WITNESS_CACHE;
        }
    }

    /// Whether some consistent `w` gives `<w, item> >= tau` (`positive`) or
    /// `<= -tau`.
    fn side_feasible(&mut self, item: &LiftedVector, positive: bool) -> Result<bool> {
        let tau = self.config.margin;
        let hit = self.witnesses.iter().any(|w| {
            let v = dot(item.coords(), w);
            if positive {
                v >= tau
            } else {
                v <= -tau
            }
        });
        if hit {
            return Ok(true);
        }
        let target = if positive { item.clone() } else { item.negated() };
        let (ok, witness) = feasible_with_witness(self.set, std::slice::from_ref(&target), &self.config)?;
        if let Some(w) = witness {
            self.remember(w);
        }
        Ok(ok)
    }

    pub fn infer_item(&mut self, item: &LiftedVector) -> Result<InferenceVerdict> {
        check_dim(self.set.lifted_dim, item.dim())?;
        let verdict = (|| -> Result<InferenceVerdict> {
            let can_be_negative = self.side_feasible(item, false)?;
            let can_be_positive = self.side_feasible(item, true)?;
            Ok(match (can_be_positive, can_be_negative) {
                (true, false) => InferenceVerdict::InferredPositive,
                (false, true) => InferenceVerdict::InferredNegative,
                _ => InferenceVerdict::Unknown,
            })
        })();
        match verdict {
            Ok(v) => Ok(v),
            Err(Error::Solver(msg)) => {
                log::debug!("inference degraded to Unknown: {msg}");
                Ok(InferenceVerdict::Unknown)
            }
            Err(e) => Err(e),
        }
    }

    pub fn infer(&mut self, z: &Point) -> Result<InferenceVerdict> {
        check_dim(self.set.dim(), z.dim())?;
        self.infer_item(&lift_point(z))
    }
}

pub fn infer(c: &ConstraintSet, z: &Point, config: &InferenceConfig) -> Result<InferenceVerdict> {
    Inferrer::new(c, *config).infer(z)
}

pub fn infer_item(
    c: &ConstraintSet,
    item: &LiftedVector,
    config: &InferenceConfig,
) -> Result<InferenceVerdict> {
    Inferrer::new(c, *config).infer_item(item)
}

pub fn infer_batch(
    c: &ConstraintSet,
    zs: &[Point],
    config: &InferenceConfig,
) -> Result<Vec<InferenceVerdict>> {
    let mut inf = Inferrer::new(c, *config);
    zs.iter().map(|z| inf.infer(z)).collect()
}

pub fn infer_items_batch(
    c: &ConstraintSet,
    items: &[LiftedVector],
    config: &InferenceConfig,
) -> Result<Vec<InferenceVerdict>> {
    let mut inf = Inferrer::new(c, *config);
    items.iter().map(|z| inf.infer_item(z)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{lift_difference, Hyperplane};
    use crate::oracle::{Oracle, QueryKind};

    fn p(c: &[f64]) -> Point {
        Point::new(c.to_vec()).unwrap()
    }

    fn lv(c: &[f64]) -> LiftedVector {
        LiftedVector::from_raw(c.to_vec())
    }

    fn cfg() -> InferenceConfig {
        InferenceConfig::default()
    }

    fn label(x: &[f64], answer: Sign) -> QueryRecord {
        QueryRecord {
            kind: QueryKind::Label,
            subject: lift_point(&p(x)),
            answer,
        }
    }

    #[test]
    fn add_record_directions() {
        let c = ConstraintSet::new(2)
            .add_record(&label(&[1.0, 0.0], Sign::Positive))
            .unwrap();
        assert_eq!(c.directions()[0].coords(), &[1.0, 0.0, 1.0]);
        let cmp = QueryRecord {
            kind: QueryKind::Comparison,
            subject: lift_difference(&p(&[1.0, 0.0]), &p(&[0.0, 0.0])).unwrap(),
            answer: Sign::Negative,
        };
        let c = c.add_record(&cmp).unwrap();
        assert_eq!(c.directions()[1].coords(), &[-1.0, 0.0, 0.0]);
        assert!(ConstraintSet::new(3).add_record(&cmp).is_err());
    }

    #[test]
    fn feasible_examples() {
        let empty = ConstraintSet::new(2);
        assert!(feasible(&empty, &[lv(&[1.0, 0.0, 0.0])], &cfg()).unwrap());
        let mut c = ConstraintSet::new(2);
        c.push_direction(&lv(&[1.0, 0.0, 0.0]), Sign::Positive).unwrap();
        assert!(!feasible(&c, &[lv(&[-1.0, 0.0, 0.0])], &cfg()).unwrap());
        assert!(feasible(&c, &[], &cfg()).unwrap());
    }

    #[test]
    fn feasible_multi_row() {
        let mut c = ConstraintSet::new(2);
        c.push_direction(&lv(&[1.0, 0.0, 0.0]), Sign::Positive).unwrap();
        let both = [lv(&[1.0, 1.0, 0.0]), lv(&[0.0, -1.0, 1.0])];
        assert!(feasible(&c, &both, &cfg()).unwrap());
        let clash = [lv(&[0.0, 1.0, 0.0]), lv(&[-1.0, -1.0, 0.0])];
        assert!(!feasible(&c, &clash, &cfg()).unwrap());
    }

    #[test]
    fn hull_interior_is_inferred_positive() {
        let recs: Vec<QueryRecord> = [[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]]
            .iter()
            .map(|x| label(x, Sign::Positive))
            .collect();
        let c = ConstraintSet::from_records(2, &recs).unwrap();
        assert_eq!(
            infer(&c, &p(&[0.0, 0.0]), &cfg()).unwrap(),
            InferenceVerdict::InferredPositive
        );
        assert_eq!(
            infer(&c, &p(&[3.0, 3.0]), &cfg()).unwrap(),
            InferenceVerdict::Unknown
        );
    }

    #[test]
    fn empty_set_knows_nothing() {
        let c = ConstraintSet::new(3);
        assert_eq!(
            infer(&c, &p(&[0.1, 0.2, 0.3]), &cfg()).unwrap(),
            InferenceVerdict::Unknown
        );
        assert!(infer(&c, &p(&[0.1]), &cfg()).is_err());
    }

    #[test]
    fn comparisons_alone_never_infer() {
        let h = Hyperplane::new(vec![0.3, -0.4, 0.5], 0.2).unwrap();
        let mut o = Oracle::new(&h);
        let mut rng = crate::distributions::RngSeed::new(9, 0).rng();
        let spec = crate::distributions::DistributionSpec::uniform_ball(3);
        let pts = spec.sample_n(30, &mut rng).unwrap();
        let (_, recs) = o.sort_by_value(&pts).unwrap();
        let c = ConstraintSet::from_records(3, &recs).unwrap();
        for z in spec.sample_n(30, &mut rng).unwrap().iter().chain(&pts) {
            assert_eq!(infer(&c, z, &cfg()).unwrap(), InferenceVerdict::Unknown);
        }
    }

    #[test]
    fn duplicate_item_is_inferred() {
        let item = LiftedVector::dual_of(&Hyperplane::new(vec![0.2, 0.9], -0.4).unwrap());
        let mut o = Oracle::from_weight(vec![0.1, -0.5, 1.0]);
        let rec = o.label_item(&item).unwrap();
        let c = ConstraintSet::new(2).add_record(&rec).unwrap();
        assert_eq!(
            infer_item(&c, &item, &cfg()).unwrap().sign(),
            Some(rec.answer)
        );
    }

    #[test]
    fn batch_empty_and_consistent() {
        let recs: Vec<QueryRecord> = [[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]]
            .iter()
            .map(|x| label(x, Sign::Positive))
            .collect();
        let c = ConstraintSet::from_records(2, &recs).unwrap();
        assert!(infer_batch(&c, &[], &cfg()).unwrap().is_empty());
        let zs: Vec<Point> = (0..40)
            .map(|i| {
                let t = i as f64 * 0.37;
                p(&[1.4 * t.cos() * (i as f64 / 40.0), 1.4 * t.sin() * (i as f64 / 40.0)])
            })
            .collect();
        let batch = infer_batch(&c, &zs, &cfg()).unwrap();
        for (z, v) in zs.iter().zip(&batch) {
            assert_eq!(*v, infer(&c, z, &cfg()).unwrap());
        }
    }
}
