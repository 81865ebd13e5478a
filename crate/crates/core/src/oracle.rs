//! The counted query oracle hiding the target hyperplane.
//!
//! Every call increments the ledger; nothing is memoised here. Ties
//! (`|value| < 1e-12`) are answered `Positive`.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Result};
use crate::geometry::{lift_difference, lift_point, Hyperplane, LiftedVector, Point, Sign};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QueryKind {
    Label,
    Comparison,
}

/// One oracle answer. `subject` is `lift_point(x)` for labels and
/// `lift_difference(x, y)` for comparisons; `answer` never holds `Zero`.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryRecord {
    pub kind: QueryKind,
    pub subject: LiftedVector,
    pub answer: Sign,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryLedger {
    pub label_count: u64,
    pub comparison_count: u64,
}

impl QueryLedger {
    pub fn total(&self) -> u64 {
        self.label_count + self.comparison_count
    }

    pub fn merge(&mut self, other: &QueryLedger) {
        self.label_count += other.label_count;
        self.comparison_count += other.comparison_count;
    }
}

/// Oracle over a hidden lifted weight `w`.
///
/// Built from a hyperplane `h`, `w = (v, b)` and label answers are
/// `sign(h(x))`. Point location builds it from a raw weight `(x, 1)` and
/// queries dual items.
#[derive(Debug, Clone)]
pub struct Oracle {
    weight: Vec<f64>,
    ledger: QueryLedger,
}

impl Oracle {
    pub fn new(hidden: &Hyperplane) -> Oracle {
        Oracle::from_weight(hidden.lifted_weight())
    }

    pub fn from_weight(weight: Vec<f64>) -> Oracle {
        Oracle {
            weight,
            ledger: QueryLedger::default(),
        }
    }

    /// Dimension of the points this oracle labels.
    pub fn dim(&self) -> usize {
        self.weight.len() - 1
    }

    /// Dimension of the lifted space.
    pub fn lifted_dim(&self) -> usize {
        self.weight.len()
    }

    pub fn ledger(&self) -> QueryLedger {
        self.ledger
    }

    fn value(&self, item: &LiftedVector) -> f64 {
        item.dot(&self.weight)
    }

    pub fn label_query(&mut self, x: &Point) -> Result<QueryRecord> {
        check_dim(self.dim(), x.dim())?;
        self.label_item(&lift_point(x))
    }

    pub fn comparison_query(&mut self, x: &Point, y: &Point) -> Result<QueryRecord> {
        check_dim(self.dim(), x.dim())?;
        check_dim(self.dim(), y.dim())?;
        let answer = Sign::of(self.value(&lift_point(x)) - self.value(&lift_point(y))).resolve_ties();
        self.ledger.comparison_count += 1;
        Ok(QueryRecord {
            kind: QueryKind::Comparison,
            subject: lift_difference(x, y)?,
            answer,
        })
    }

    /// `sign(<w, item>)`, the label query in lifted coordinates.
    pub fn label_item(&mut self, item: &LiftedVector) -> Result<QueryRecord> {
        check_dim(self.lifted_dim(), item.dim())?;
        self.ledger.label_count += 1;
        Ok(QueryRecord {
            kind: QueryKind::Label,
            subject: item.clone(),
            answer: Sign::of(self.value(item)).resolve_ties(),
        })
    }

    /// `sign(<w, a> - <w, b>)`, the comparison query in lifted coordinates.
    pub fn compare_items(&mut self, a: &LiftedVector, b: &LiftedVector) -> Result<QueryRecord> {
        check_dim(self.lifted_dim(), a.dim())?;
        check_dim(self.lifted_dim(), b.dim())?;
        self.ledger.comparison_count += 1;
        Ok(QueryRecord {
            kind: QueryKind::Comparison,
            subject: a.minus(b)?,
            answer: Sign::of(self.value(a) - self.value(b)).resolve_ties(),
        })
    }

    /// Merge-sorts points ascending in `h(.)` using comparison queries.
    pub fn sort_by_value(&mut self, points: &[Point]) -> Result<(Vec<usize>, Vec<QueryRecord>)> {
        for p in points {
            check_dim(self.dim(), p.dim())?;
        }
        let items: Vec<LiftedVector> = points.iter().map(lift_point).collect();
        let mut records = Vec::new();
        let order = self.sort_items(&items, &mut records)?;
        Ok((order, records))
    }

    /// Merge-sorts `items` ascending in `<w, .>`; returns the permutation
    /// and appends every comparison performed to `records`.
    pub fn sort_items(
        &mut self,
        items: &[LiftedVector],
        records: &mut Vec<QueryRecord>,
    ) -> Result<Vec<usize>> {
        let idx: Vec<usize> = (0..items.len()).collect();
        self.merge_sort(items, &idx, records)
    }

    fn merge_sort(
        &mut self,
        items: &[LiftedVector],
        idx: &[usize],
        records: &mut Vec<QueryRecord>,
    ) -> Result<Vec<usize>> {
        if idx.len() <= 1 {
            return Ok(idx.to_vec());
        }
        let mid = idx.len() / 2;
        let left = self.merge_sort(items, &idx[..mid], records)?;
        let right = self.merge_sort(items, &idx[mid..], records)?;
        self.merge_items(items, &left, &right, records)
    }

    /// Merges two ascending runs of indices into `items`.
    pub fn merge_items(
        &mut self,
        items: &[LiftedVector],
        left: &[usize],
        right: &[usize],
        records: &mut Vec<QueryRecord>,
    ) -> Result<Vec<usize>> {
        self.merge_items_tracked(items, left, right, records, &mut Vec::new())
    }

    /// [`Oracle::merge_items`], also reporting each compared index pair.
    ///
    /// Inserts the shorter run into the longer one front to back, finding
    /// each position by galloping (probing offsets 0, 1, 3, 7, ... past the
    /// previous position, then binary search). Runs that barely interleave
    /// cost about one comparison per element of the shorter run. Every pair
    /// that ends up adjacent in the output, coming from different runs, has
    /// been compared directly. Ties keep `left` elements first.
    pub fn merge_items_tracked(
        &mut self,
        items: &[LiftedVector],
        left: &[usize],
        right: &[usize],
        records: &mut Vec<QueryRecord>,
        pairs: &mut Vec<(usize, usize)>,
    ) -> Result<Vec<usize>> {
        let short_is_left = left.len() < right.len();
        let (long, short) = if short_is_left { (right, left) } else { (left, right) };
        // whether `b` (from the short run) belongs after `a` (from the long run)
        let mut after = |b: usize, a: usize| -> Result<bool> {
            let ans = if short_is_left {
                pairs.push((b, a));
                let rec = self.compare_items(&items[a], &items[b])?;
                let ans = rec.answer == Sign::Negative;
                records.push(rec);
                ans
            } else {
                pairs.push((a, b));
                let rec = self.compare_items(&items[b], &items[a])?;
                let ans = rec.answer == Sign::Positive;
                records.push(rec);
                ans
            };
            Ok(ans)
        };
        let m = long.len();
        let mut out = Vec::with_capacity(left.len() + right.len());
        let mut i = 0;
        for &b in short {
            let (mut lo, mut hi) = (i, m);
            let mut offset = 0;
            while i + offset < m {
                if after(b, long[i + offset])? {
                    lo = i + offset + 1;
                    offset = 2 * offset + 1;
                } else {
                    hi = i + offset;
                    break;
                }
            }
            while lo < hi {
                let mid = lo + (hi - lo) / 2;
                if after(b, long[mid])? {
                    lo = mid + 1;
                } else {
                    hi = mid;
                }
            }
            out.extend_from_slice(&long[i..lo]);
            out.push(b);
            i = lo;
        }
        out.extend_from_slice(&long[i..]);
        Ok(out)
    }
}

/// Upper bound `k * ceil(log2 k)` on merge-sort comparisons for `k` items.
pub fn merge_sort_bound(k: usize) -> u64 {
    if k <= 1 {
        return 0;
    }
    let log = usize::BITS - (k - 1).leading_zeros();
    k as u64 * log as u64
}
