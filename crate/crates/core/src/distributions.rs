//! Seeded instance distributions, hidden-classifier families and whitening.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::geometry::{AffineMap, Hyperplane, Point};

/// The generator every sampler draws from.
pub type TrialRng = ChaCha8Rng;

/// Rejection attempts allowed per polytope sample.
const POLYTOPE_REJECTION_BUDGET: usize = 1_000_000;

/// A `(seed, stream)` pair keying an independent ChaCha substream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngSeed {
    pub seed: u64,
    pub stream: u64,
}

impl RngSeed {
    pub fn new(seed: u64, stream: u64) -> Self {
        RngSeed { seed, stream }
    }

    pub fn rng(&self) -> TrialRng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng
    }
}

/// Which instance distribution to sample from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSpec", into = "RawSpec")]
pub enum DistributionSpec {
    UniformBall {
        dim: usize,
    },
    Gaussian {
        dim: usize,
    },
    /// Uniform over `{x : h(x) >= 0 for every constraint}` intersected with
    /// the box `[lower, upper]`, sampled by rejection from the box.
    UniformConvexPolytope {
        constraints: Vec<Hyperplane>,
        lower: Vec<f64>,
        upper: Vec<f64>,
    },
    AffineImage {
        inner: Box<DistributionSpec>,
        map: AffineMap,
    },
}

impl DistributionSpec {
    pub fn uniform_ball(dim: usize) -> Self {
        DistributionSpec::UniformBall { dim }
    }

    pub fn gaussian(dim: usize) -> Self {
        DistributionSpec::Gaussian { dim }
    }

    /// The axis-aligned cube `[-1, 1]^dim` as a polytope.
    pub fn cube(dim: usize) -> Self {
        DistributionSpec::UniformConvexPolytope {
            constraints: Vec::new(),
            lower: vec![-1.0; dim],
            upper: vec![1.0; dim],
        }
    }

    pub fn affine_image(inner: DistributionSpec, map: AffineMap) -> Result<Self> {
        check_dim(inner.dim(), map.dim())?;
        Ok(DistributionSpec::AffineImage {
            inner: Box::new(inner),
            map,
        })
    }

    pub fn dim(&self) -> usize {
        match self {
            DistributionSpec::UniformBall { dim } | DistributionSpec::Gaussian { dim } => *dim,
            DistributionSpec::UniformConvexPolytope { lower, .. } => lower.len(),
            DistributionSpec::AffineImage { map, .. } => map.dim(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            DistributionSpec::UniformBall { dim } | DistributionSpec::Gaussian { dim } => {
                if *dim == 0 {
                    return Err(Error::Config("distribution dimension must be >= 1".into()));
                }
            }
            DistributionSpec::UniformConvexPolytope {
                constraints,
                lower,
                upper,
            } => {
                if lower.is_empty() || lower.len() != upper.len() {
                    return Err(Error::Config("polytope box bounds malformed".into()));
                }
                if lower.iter().zip(upper).any(|(l, u)| !(l < u)) {
                    return Err(Error::Config("polytope box has empty extent".into()));
                }
                for c in constraints {
                    check_dim(lower.len(), c.dim())?;
                }
            }
            DistributionSpec::AffineImage { inner, map } => {
                inner.validate()?;
                check_dim(inner.dim(), map.dim())?;
            }
        }
        Ok(())
    }

    /// The exact map to isotropic position, when it is known in closed form.
    pub fn isotropic_map(&self) -> Option<AffineMap> {
        match self {
            // covariance of the uniform ball is I / (d + 2)
            DistributionSpec::UniformBall { dim } => AffineMap::linear(
                DMatrix::identity(*dim, *dim) * ((*dim as f64) + 2.0).sqrt(),
            )
            .ok(),
            DistributionSpec::Gaussian { dim } => Some(AffineMap::identity(*dim)),
            DistributionSpec::UniformConvexPolytope { .. } => None,
            DistributionSpec::AffineImage { inner, map } => {
                inner.isotropic_map()?.compose(&map.inverse()).ok()
            }
        }
    }

    pub fn sample(&self, rng: &mut TrialRng) -> Result<Point> {
        match self {
            DistributionSpec::UniformBall { dim } => Ok(Point::from_vec(uniform_ball(*dim, rng))),
            DistributionSpec::Gaussian { dim } => Ok(Point::from_vec(gaussian(*dim, rng))),
            DistributionSpec::UniformConvexPolytope {
                constraints,
                lower,
                upper,
            } => {
                for _ in 0..POLYTOPE_REJECTION_BUDGET {
                    let x: Vec<f64> = lower
                        .iter()
                        .zip(upper)
                        .map(|(l, u)| rng.random_range(*l..*u))
                        .collect();
                    let p = Point::from_vec(x);
                    if constraints
                        .iter()
                        .all(|h| h.evaluate(&p).map(|v| v >= 0.0).unwrap_or(false))
                    {
                        return Ok(p);
                    }
                }
                Err(Error::RejectionBudget(format!(
                    "no polytope point in {POLYTOPE_REJECTION_BUDGET} box draws"
                )))
            }
            DistributionSpec::AffineImage { inner, map } => map.apply(&inner.sample(rng)?),
        }
    }

    pub fn sample_n(&self, n: usize, rng: &mut TrialRng) -> Result<Vec<Point>> {
        (0..n).map(|_| self.sample(rng)).collect()
    }

    /// `x - y` for independent `x, y` drawn from `self`.
    pub fn sample_difference(&self, rng: &mut TrialRng) -> Result<Point> {
        let x = self.sample(rng)?;
        let y = self.sample(rng)?;
        Ok(Point::from_vec(
            x.coords().iter().zip(y.coords()).map(|(a, b)| a - b).collect(),
        ))
    }
}

pub fn sample(spec: &DistributionSpec, rng: &mut TrialRng) -> Result<Point> {
    spec.sample(rng)
}

pub fn sample_difference(spec: &DistributionSpec, rng: &mut TrialRng) -> Result<Point> {
    spec.sample_difference(rng)
}

pub(crate) fn gaussian(dim: usize, rng: &mut TrialRng) -> Vec<f64> {
    (0..dim).map(|_| rng.sample(StandardNormal)).collect()
}

pub(crate) fn unit_sphere(dim: usize, rng: &mut TrialRng) -> Vec<f64> {
    loop {
        let g = gaussian(dim, rng);
        let n = g.iter().map(|c| c * c).sum::<f64>().sqrt();
        if n > 1e-300 {
            return g.into_iter().map(|c| c / n).collect();
        }
    }
}

fn uniform_ball(dim: usize, rng: &mut TrialRng) -> Vec<f64> {
    let dir = unit_sphere(dim, rng);
    let u: f64 = rng.random();
    let r = u.powf(1.0 / dim as f64);
    dir.into_iter().map(|c| c * r).collect()
}

/// A hyperplane tangent to the unit ball with the ball on its positive side.
///
/// The touching direction `u` is uniform on the sphere and the plane is
/// `<u, x> = 1`, stored as `h(x) = 1 - <u, x>`.
pub fn sample_tangent_hyperplane(dim: usize, rng: &mut TrialRng) -> Hyperplane {
    let u = unit_sphere(dim, rng);
    Hyperplane::new(u.into_iter().map(|c| -c).collect(), 1.0)
        .expect("unit normal is nonzero and finite")
}

/// Hidden-classifier families used by experiments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ClassifierFamily {
    /// Uniform tangent hyperplanes of the unit ball.
    #[default]
    Tangent,
    /// Uniform unit normal with offset uniform in `[-max_offset, max_offset]`.
    UniformOffset { max_offset: f64 },
}

impl ClassifierFamily {
    pub fn sample(&self, dim: usize, rng: &mut TrialRng) -> Hyperplane {
        match *self {
            ClassifierFamily::Tangent => sample_tangent_hyperplane(dim, rng),
            ClassifierFamily::UniformOffset { max_offset } => {
                let u = unit_sphere(dim, rng);
                let b = if max_offset > 0.0 {
                    rng.random_range(-max_offset..max_offset)
                } else {
                    0.0
                };
                Hyperplane::new(u, b).expect("unit normal is nonzero and finite")
            }
        }
    }
}

/// Empirical whitening: sends the sample mean to 0 and the sample covariance
/// (unbiased, `n - 1` denominator) to the identity.
pub fn isotropize(points: &[Point]) -> Result<AffineMap> {
    let first = points
        .first()
        .ok_or_else(|| Error::DegenerateSample("no points".into()))?;
    let d = first.dim();
    if points.len() < d + 1 {
        return Err(Error::DegenerateSample(format!(
            "{} points cannot whiten dimension {d}",
            points.len()
        )));
    }
    let n = points.len() as f64;
    let mut mean = DVector::<f64>::zeros(d);
    for p in points {
        check_dim(d, p.dim())?;
        mean += DVector::from_column_slice(p.coords());
    }
    mean /= n;
    let mut cov = DMatrix::<f64>::zeros(d, d);
    for p in points {
        let c = DVector::from_column_slice(p.coords()) - &mean;
        cov += &c * c.transpose();
    }
    cov /= n - 1.0;

    let eig = cov.symmetric_eigen();
    let max = eig.eigenvalues.max();
    let min = eig.eigenvalues.min();
    if !(min > 1e-12 * max.max(1e-300)) {
        return Err(Error::DegenerateSample(format!(
            "covariance is singular (eigenvalues {min:e}..{max:e})"
        )));
    }
    let inv_sqrt = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| 1.0 / l.sqrt()));
    let whiten = &eig.eigenvectors * inv_sqrt * eig.eigenvectors.transpose();
    let shift = -(&whiten * &mean);
    AffineMap::new(whiten, shift)
}

/// Serialized form of [`DistributionSpec`] for config files.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RawSpec {
    UniformBall {
        dim: usize,
    },
    Gaussian {
        dim: usize,
    },
    UniformConvexPolytope {
        #[serde(default)]
        constraints: Vec<Hyperplane>,
        lower: Vec<f64>,
        upper: Vec<f64>,
    },
    AffineImage {
        inner: Box<RawSpec>,
        /// Row-major matrix.
        matrix: Vec<Vec<f64>>,
        shift: Vec<f64>,
    },
}

impl TryFrom<RawSpec> for DistributionSpec {
    type Error = Error;

    fn try_from(raw: RawSpec) -> Result<Self> {
        let spec = match raw {
            RawSpec::UniformBall { dim } => DistributionSpec::UniformBall { dim },
            RawSpec::Gaussian { dim } => DistributionSpec::Gaussian { dim },
            RawSpec::UniformConvexPolytope {
                constraints,
                lower,
                upper,
            } => DistributionSpec::UniformConvexPolytope {
                constraints,
                lower,
                upper,
            },
            RawSpec::AffineImage {
                inner,
                matrix,
                shift,
            } => {
                let n = shift.len();
                if matrix.len() != n || matrix.iter().any(|r| r.len() != n) {
                    return Err(Error::Config("affine matrix must be square and match shift".into()));
                }
                let flat: Vec<f64> = matrix.into_iter().flatten().collect();
                let map = AffineMap::new(
                    DMatrix::from_row_slice(n, n, &flat),
                    DVector::from_vec(shift),
                )?;
                DistributionSpec::affine_image(DistributionSpec::try_from(*inner)?, map)?
            }
        };
        spec.validate()?;
        Ok(spec)
    }
}

impl From<DistributionSpec> for RawSpec {
    fn from(spec: DistributionSpec) -> Self {
        match spec {
            DistributionSpec::UniformBall { dim } => RawSpec::UniformBall { dim },
            DistributionSpec::Gaussian { dim } => RawSpec::Gaussian { dim },
            DistributionSpec::UniformConvexPolytope {
                constraints,
                lower,
                upper,
            } => RawSpec::UniformConvexPolytope {
                constraints,
                lower,
                upper,
            },
            DistributionSpec::AffineImage { inner, map } => {
                let m = map.matrix();
                RawSpec::AffineImage {
                    inner: Box::new(RawSpec::from(*inner)),
                    matrix: (0..m.nrows())
                        .map(|i| m.row(i).iter().copied().collect())
                        .collect(),
                    shift: map.shift().as_slice().to_vec(),
                }
            }
        }
    }
}
