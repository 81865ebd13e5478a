//! Point location in a hyperplane arrangement by swapping roles: the
//! hyperplanes become the items to sign and the query point becomes the
//! hidden weight.

use serde::{Deserialize, Serialize};

use crate::distributions::{unit_sphere, DistributionSpec, RngSeed, TrialRng};
use crate::error::{check_dim, Error, Result};
use crate::geometry::{dot, Hyperplane, LiftedVector, Point, Sign};
use crate::oracle::{Oracle, QueryKind, QueryLedger};
use crate::rpu::{perfect_learning_items, RpuParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Arrangement {
    hyperplanes: Vec<Hyperplane>,
    dim: usize,
}

impl Arrangement {
    pub fn new(hyperplanes: Vec<Hyperplane>) -> Result<Arrangement> {
        let dim = hyperplanes
            .first()
            .ok_or_else(|| Error::Precondition("an arrangement needs a hyperplane".into()))?
            .dim();
        for h in &hyperplanes {
            check_dim(dim, h.dim())?;
        }
        Ok(Arrangement { hyperplanes, dim })
    }

    /// `n` hyperplanes with uniform normals through points drawn from `spec`.
    pub fn random(spec: &DistributionSpec, n: usize, rng: &mut TrialRng) -> Result<Arrangement> {
        let d = spec.dim();
        let hs = (0..n)
            .map(|_| {
                let v = unit_sphere(d, rng);
                let p = spec.sample(rng)?;
                let b = -dot(&v, p.coords());
                Hyperplane::new(v, b)
            })
            .collect::<Result<Vec<_>>>()?;
        Arrangement::new(hs)
    }

    pub fn hyperplanes(&self) -> &[Hyperplane] {
        &self.hyperplanes
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.hyperplanes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hyperplanes.is_empty()
    }

    /// Sign vector by direct evaluation.
    pub fn signature_at(&self, x: &Point) -> Result<Vec<Sign>> {
        self.hyperplanes
            .iter()
            .map(|h| Ok(h.sign_at(x)?.resolve_ties()))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellSignature {
    pub signs: Vec<Sign>,
    /// Label plus comparison queries spent.
    pub depth: u64,
    pub ledger: QueryLedger,
}

/// Signs every hyperplane of `arr` at `x` with comparison-aided reliable
/// learning over the dual items `(v_i, b_i)` under the weight `(x, 1)`.
pub fn locate(
    x: &Point,
    arr: &Arrangement,
    params: &RpuParams,
    rng: &mut TrialRng,
) -> Result<CellSignature> {
    check_dim(arr.dim(), x.dim())?;
    let items: Vec<LiftedVector> = arr.hyperplanes().iter().map(LiftedVector::dual_of).collect();
    let mut weight = x.coords().to_vec();
    weight.push(1.0);
    let mut oracle = Oracle::from_weight(weight);
    let out = perfect_learning_items(&items, QueryKind::Comparison, params, &mut oracle, rng)?;
    Ok(CellSignature {
        signs: out.labels,
        depth: out.ledger.total(),
        ledger: out.ledger,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepthRow {
    pub n: usize,
    pub mean_depth: f64,
    pub std_depth: f64,
    /// Entries that disagreed with direct evaluation (always 0 for a sound
    /// inference engine).
    pub errors: usize,
}

/// Mean and sample standard deviation of `locate` depth over seeded trials.
///
/// Trial `t` at grid index `g` uses substream `g * trials + t` of `seed`;
/// the arrangement comes from `spec` and the query point from the unit ball.
pub fn depth_experiment(
    spec: &DistributionSpec,
    n_grid: &[usize],
    trials: usize,
    seed: u64,
    params: &RpuParams,
) -> Result<Vec<DepthRow>> {
    if trials == 0 || n_grid.is_empty() {
        return Err(Error::Precondition("need trials and a nonempty grid".into()));
    }
    let ball = DistributionSpec::uniform_ball(spec.dim());
    let mut rows = Vec::with_capacity(n_grid.len());
    for (g, &n) in n_grid.iter().enumerate() {
        let mut depths = Vec::with_capacity(trials);
        let mut errors = 0;
        for t in 0..trials {
            let mut rng = RngSeed::new(seed, (g * trials + t) as u64).rng();
            let (ledger, e) = depth_trial(spec, &ball, n, params, &mut rng)?;
            depths.push(ledger.total() as f64);
            errors += e;
        }
        let mean = depths.iter().sum::<f64>() / trials as f64;
        let var = if trials > 1 {
            depths.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (trials - 1) as f64
        } else {
            0.0
        };
        rows.push(DepthRow {
            n,
            mean_depth: mean,
            std_depth: var.sqrt(),
            errors,
        });
    }
    Ok(rows)
}

/// One located point: returns the queries spent and the number of wrong
/// signs.
pub fn depth_trial(
    spec: &DistributionSpec,
    points: &DistributionSpec,
    n: usize,
    params: &RpuParams,
    rng: &mut TrialRng,
) -> Result<(QueryLedger, usize)> {
    let arr = Arrangement::random(spec, n, rng)?;
    let x = points.sample(rng)?;
    let cell = locate(&x, &arr, params, rng)?;
    let truth = arr.signature_at(&x)?;
    let wrong = truth.iter().zip(&cell.signs).filter(|(a, b)| a != b).count();
    Ok((cell.ledger, wrong))
}
