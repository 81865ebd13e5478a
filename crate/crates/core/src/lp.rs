//! Dense simplex for the box-bounded cone programs behind version-space
//! inference.
//!
//! The primal problem is
//!
//! ```text
//! maximize   <c, x>
//! subject to <a_k, x> >= 0   for every row a_k
//!            -1 <= x_i <= 1
//! ```
//!
//! It is always feasible (`x = 0`) and bounded, so it is solved through its
//! dual, which has only `n` equality rows:
//!
//! ```text
//! minimize   sum(p) + sum(q)
//! subject to -sum_k y_k a_k + p - q = c,   y, p, q >= 0
//! ```
//!
//! The all-slack basis (`p_i` or `q_i` per coordinate, by the sign of `c_i`)
//! is feasible, so no phase one is needed. The simplex multipliers of the
//! dual are the primal iterate. At termination the dual solution yields a
//! certified upper bound on the primal optimum and the multipliers give a
//! primal witness; callers decide using both.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LpOptions {
    pub max_iterations: usize,
    /// Reduced costs above `-pricing_tolerance` count as optimal.
    pub pricing_tolerance: f64,
    /// Pivot elements below this are ignored by the ratio test.
    pub pivot_tolerance: f64,
    /// Consecutive degenerate pivots before switching to Bland's rule.
    pub bland_after: usize,
}

impl Default for LpOptions {
    fn default() -> Self {
        LpOptions {
            max_iterations: 5_000,
            pricing_tolerance: 1e-11,
            pivot_tolerance: 1e-11,
            bland_after: 25,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    /// Upper bound on the primal optimum implied by the final dual iterate.
    pub upper_bound: f64,
    /// Primal point clipped into the box.
    pub witness: Vec<f64>,
    /// `<c, witness>`.
    pub witness_value: f64,
    /// `max_k -<a_k, witness>`, i.e. the worst row violation (`<= 0` when
    /// every row holds).
    pub witness_violation: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Column {
    Row(usize),
    Plus(usize),
    Minus(usize),
}

/// Row-major block of constraint rows, each of length `dim`.
#[derive(Debug, Clone, Copy)]
pub struct Rows<'a> {
    pub data: &'a [f64],
    pub dim: usize,
}

impl<'a> Rows<'a> {
    pub fn new(data: &'a [f64], dim: usize) -> Self {
        debug_assert!(dim > 0 && data.len() % dim == 0);
        Rows { data, dim }
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn row(&self, k: usize) -> &'a [f64] {
        &self.data[k * self.dim..(k + 1) * self.dim]
    }
}

/// Solves `max <c, x>` over `{x : <a_k, x> >= 0, |x|_inf <= 1}`.
///
/// `rows` may be given at any scale; normalising them to unit length keeps
/// reduced costs comparable across rows.
pub fn maximize(c: &[f64], rows: Rows<'_>, opts: &LpOptions) -> Result<LpSolution> {
    let n = c.len();
    if n != rows.dim {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: rows.dim,
        });
    }
    let m = rows.len();
    let mut basis: Vec<Column> = c
        .iter()
        .enumerate()
        .map(|(i, &ci)| if ci >= 0.0 { Column::Plus(i) } else { Column::Minus(i) })
        .collect();
    let mut in_basis_row = vec![false; m];
    let c_vec = DVector::from_column_slice(c);

    let column = |col: Column| -> DVector<f64> {
        match col {
            Column::Row(k) => DVector::from_iterator(n, rows.row(k).iter().map(|a| -a)),
            Column::Plus(i) => {
                let mut v = DVector::zeros(n);
                v[i] = 1.0;
                v
            }
            Column::Minus(i) => {
                let mut v = DVector::zeros(n);
                v[i] = -1.0;
                v
            }
        }
    };
    let cost = |col: Column| -> f64 {
        match col {
            Column::Row(_) => 0.0,
            _ => 1.0,
        }
    };

    let mut degenerate_run = 0usize;
    let mut bland = false;
    let mut iterations = 0usize;

    loop {
        let mut b = DMatrix::<f64>::zeros(n, n);
        for (j, &col) in basis.iter().enumerate() {
            b.set_column(j, &column(col));
        }
        let lu = b.clone().lu();
        let x_b = lu
            .solve(&c_vec)
            .ok_or_else(|| Error::Solver("singular basis".into()))?;
        let c_b = DVector::from_iterator(n, basis.iter().map(|&col| cost(col)));
        let pi = b
            .transpose()
            .lu()
            .solve(&c_b)
            .ok_or_else(|| Error::Solver("singular basis transpose".into()))?;

        // pricing
        let mut entering: Option<(Column, f64)> = None;
        let consider = |col: Column, rc: f64, entering: &mut Option<(Column, f64)>| {
            if rc < -opts.pricing_tolerance {
                match entering {
                    None => *entering = Some((col, rc)),
                    Some((_, best)) if !bland && rc < *best => *entering = Some((col, rc)),
                    _ => {}
                }
            }
        };
        for k in 0..m {
            if in_basis_row[k] {
                continue;
            }
            let a = rows.row(k);
            let rc = a.iter().zip(pi.iter()).map(|(x, y)| x * y).sum::<f64>();
            consider(Column::Row(k), rc, &mut entering);
            if bland && entering.is_some() {
                break;
            }
        }
        if !(bland && entering.is_some()) {
            for i in 0..n {
                if !basis.contains(&Column::Plus(i)) {
                    consider(Column::Plus(i), 1.0 - pi[i], &mut entering);
                }
            }
            for i in 0..n {
                if !basis.contains(&Column::Minus(i)) {
                    consider(Column::Minus(i), 1.0 + pi[i], &mut entering);
                }
            }
        }

        let Some((enter, _)) = entering else {
            return Ok(finish(c, rows, &basis, &x_b, pi, iterations));
        };

        iterations += 1;
        if iterations > opts.max_iterations {
            return Err(Error::Solver(format!(
                "simplex exceeded {} iterations",
                opts.max_iterations
            )));
        }

        let dir = lu
            .solve(&column(enter))
            .ok_or_else(|| Error::Solver("singular basis".into()))?;
        let mut leave: Option<(usize, f64)> = None;
        for i in 0..n {
            if dir[i] > opts.pivot_tolerance {
                let ratio = x_b[i].max(0.0) / dir[i];
                match leave {
                    None => leave = Some((i, ratio)),
                    Some((j, best)) => {
                        let better = if (ratio - best).abs() <= 1e-13 {
                            if bland {
                                order(basis[i]) < order(basis[j])
                            } else {
                                dir[i] > dir[j]
                            }
                        } else {
                            ratio < best
                        };
                        if better {
                            leave = Some((i, ratio));
                        }
                    }
                }
            }
        }
        let Some((leave_pos, step)) = leave else {
            // an unbounded dual would mean an infeasible primal, impossible here
            return Err(Error::Solver("dual ray found on a feasible primal".into()));
        };
        if step <= 1e-13 {
            degenerate_run += 1;
            if degenerate_run > opts.bland_after {
                bland = true;
            }
        } else {
            degenerate_run = 0;
        }
        if let Column::Row(k) = basis[leave_pos] {
            in_basis_row[k] = false;
        }
        if let Column::Row(k) = enter {
            in_basis_row[k] = true;
        }
        basis[leave_pos] = enter;
    }
}

fn order(col: Column) -> (usize, usize) {
    match col {
        Column::Row(k) => (0, k),
        Column::Plus(i) => (1, i),
        Column::Minus(i) => (2, i),
    }
}

fn finish(
    c: &[f64],
    rows: Rows<'_>,
    basis: &[Column],
    x_b: &DVector<f64>,
    pi: DVector<f64>,
    iterations: usize,
) -> LpSolution {
    let n = c.len();
    // dual certificate: residual of -sum y a + p - q = c with clamped values
    let mut residual = c.to_vec();
    let mut slack_cost = 0.0;
    for (j, &col) in basis.iter().enumerate() {
        let v = x_b[j].max(0.0);
        match col {
            Column::Row(k) => {
                for (r, a) in residual.iter_mut().zip(rows.row(k)) {
                    *r += v * a;
                }
            }
            Column::Plus(i) => {
                residual[i] -= v;
                slack_cost += v;
            }
            Column::Minus(i) => {
                residual[i] += v;
                slack_cost += v;
            }
        }
    }
    let upper_bound = slack_cost + residual.iter().map(|r| r.abs()).sum::<f64>();

    let witness: Vec<f64> = (0..n).map(|i| pi[i].clamp(-1.0, 1.0)).collect();
    let witness_value = c.iter().zip(&witness).map(|(a, b)| a * b).sum();
    let mut witness_violation = f64::NEG_INFINITY;
    for k in 0..rows.len() {
        let v = -rows.row(k).iter().zip(&witness).map(|(a, b)| a * b).sum::<f64>();
        witness_violation = witness_violation.max(v);
    }
    LpSolution {
        upper_bound,
        witness,
        witness_value,
        witness_violation,
        iterations,
    }
}
