//! Geometry primitives shared by every learner.
//!
//! A hyperplane `h = <v, .> + b` is stored with a unit normal. Points are
//! lifted into `d + 1` homogeneous coordinates so that both label and
//! comparison answers become sign constraints on the single lifted weight
//! `(v, b)`:
//!
//! - `lift_point(x) = (x, 1)`, so `<(v, b), (x, 1)> = h(x)`;
//! - `lift_difference(x, y) = (x - y, 0)`, so `<(v, b), (x - y, 0)> = h(x) - h(y)`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};

/// Values with absolute size below this are reported as [`Sign::Zero`].
pub const ZERO_TOLERANCE: f64 = 1e-12;

/// Default cap on the condition number of an [`AffineMap`].
pub const DEFAULT_CONDITION_CAP: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sign {
    Positive,
    Negative,
    Zero,
}

impl Sign {
    pub fn of(value: f64) -> Sign {
        if value.abs() < ZERO_TOLERANCE {
            Sign::Zero
        } else if value > 0.0 {
            Sign::Positive
        } else {
            Sign::Negative
        }
    }

    pub fn negate(self) -> Sign {
        match self {
            Sign::Positive => Sign::Negative,
            Sign::Negative => Sign::Positive,
            Sign::Zero => Sign::Zero,
        }
    }

    /// Collapses `Zero` onto `Positive`, the oracle tie convention.
    pub fn resolve_ties(self) -> Sign {
        match self {
            Sign::Zero => Sign::Positive,
            s => s,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Point(Vec<f64>);

impl Point {
    pub fn new(coords: Vec<f64>) -> Result<Point> {
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::Precondition("point has a non-finite coordinate".into()));
        }
        Ok(Point(coords))
    }

    /// Builds a point without the finiteness check; callers guarantee it.
    pub(crate) fn from_vec(coords: Vec<f64>) -> Point {
        debug_assert!(coords.iter().all(|c| c.is_finite()));
        Point(coords)
    }

    pub fn origin(dim: usize) -> Point {
        Point(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        dot(&self.0, &self.0).sqrt()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl From<&[f64]> for Point {
    fn from(c: &[f64]) -> Self {
        Point::from_vec(c.to_vec())
    }
}

/// An affine hyperplane `<normal, x> + offset` with `|normal| = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperplane {
    normal: Vec<f64>,
    offset: f64,
}

impl Hyperplane {
    /// Canonicalises `(normal, offset)` by dividing both by `|normal|`.
    pub fn new(normal: Vec<f64>, offset: f64) -> Result<Hyperplane> {
        if normal.is_empty() {
            return Err(Error::Precondition("hyperplane needs dimension >= 1".into()));
        }
        if !offset.is_finite() || normal.iter().any(|c| !c.is_finite()) {
            return Err(Error::Precondition("hyperplane has non-finite entries".into()));
        }
        let norm = dot(&normal, &normal).sqrt();
        if norm == 0.0 {
            return Err(Error::Precondition("hyperplane normal is zero".into()));
        }
        Ok(Hyperplane {
            normal: normal.into_iter().map(|c| c / norm).collect(),
            offset: offset / norm,
        })
    }

    /// Builds the hyperplane whose lifted weight is `w = (v, b)`.
    pub fn from_lifted_weight(w: &[f64]) -> Result<Hyperplane> {
        let (b, v) = w
            .split_last()
            .ok_or_else(|| Error::Precondition("empty weight".into()))?;
        Hyperplane::new(v.to_vec(), *b)
    }

    pub fn dim(&self) -> usize {
        self.normal.len()
    }

    pub fn normal(&self) -> &[f64] {
        &self.normal
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    /// The lifted weight `(v, b)` in `d + 1` coordinates.
    pub fn lifted_weight(&self) -> Vec<f64> {
        let mut w = self.normal.clone();
        w.push(self.offset);
        w
    }

    pub fn evaluate(&self, x: &Point) -> Result<f64> {
        check_dim(self.dim(), x.dim())?;
        Ok(dot(&self.normal, x.coords()) + self.offset)
    }

    pub fn sign_at(&self, x: &Point) -> Result<Sign> {
        self.evaluate(x).map(Sign::of)
    }
}

/// A vector in homogeneous `d + 1` coordinates.
///
/// Point lifts end in `1`, difference lifts end in `0`. Point location uses
/// the dual lift of a hyperplane `(v, b)` whose last coordinate is `b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LiftedVector(Vec<f64>);

impl LiftedVector {
    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn last(&self) -> f64 {
        *self.0.last().expect("lifted vectors are never empty")
    }

    pub fn negated(&self) -> LiftedVector {
        LiftedVector(self.0.iter().map(|c| -c).collect())
    }

    pub fn dot(&self, w: &[f64]) -> f64 {
        dot(&self.0, w)
    }

    /// Component-wise difference `self - other`.
    pub fn minus(&self, other: &LiftedVector) -> Result<LiftedVector> {
        check_dim(self.dim(), other.dim())?;
        Ok(LiftedVector(
            self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect(),
        ))
    }

    /// The dual item of a hyperplane: `(v, b)`.
    pub fn dual_of(h: &Hyperplane) -> LiftedVector {
        LiftedVector(h.lifted_weight())
    }

    #[cfg(test)]
    pub(crate) fn from_raw(coords: Vec<f64>) -> LiftedVector {
        LiftedVector(coords)
    }
}

pub fn lift_point(x: &Point) -> LiftedVector {
    let mut c = Vec::with_capacity(x.dim() + 1);
    c.extend_from_slice(x.coords());
    c.push(1.0);
    LiftedVector(c)
}

pub fn lift_difference(x: &Point, y: &Point) -> Result<LiftedVector> {
    check_dim(x.dim(), y.dim())?;
    let mut c: Vec<f64> = x.coords().iter().zip(y.coords()).map(|(a, b)| a - b).collect();
    c.push(0.0);
    Ok(LiftedVector(c))
}

/// An invertible affine map `x -> matrix * x + shift`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineMap {
    matrix: DMatrix<f64>,
    shift: DVector<f64>,
    inverse: DMatrix<f64>,
}

impl AffineMap {
    pub fn new(matrix: DMatrix<f64>, shift: DVector<f64>) -> Result<AffineMap> {
        AffineMap::with_condition_cap(matrix, shift, DEFAULT_CONDITION_CAP)
    }

    pub fn with_condition_cap(
        matrix: DMatrix<f64>,
        shift: DVector<f64>,
        cap: f64,
    ) -> Result<AffineMap> {
        if !matrix.is_square() {
            return Err(Error::InvalidMap(format!(
                "matrix is {}x{}, expected square",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        check_dim(matrix.nrows(), shift.len())?;
        if matrix.iter().chain(shift.iter()).any(|c| !c.is_finite()) {
            return Err(Error::InvalidMap("non-finite entries".into()));
        }
        let sv = matrix.singular_values();
        let max = sv.max();
        let min = sv.min();
        if min <= 0.0 || !(max / min <= cap) {
            return Err(Error::InvalidMap(format!(
                "condition number {:e} exceeds cap {:e}",
                max / min,
                cap
            )));
        }
        let inverse = matrix
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::InvalidMap("matrix is singular".into()))?;
        Ok(AffineMap {
            matrix,
            shift,
            inverse,
        })
    }

    pub fn identity(dim: usize) -> AffineMap {
        AffineMap {
            matrix: DMatrix::identity(dim, dim),
            shift: DVector::zeros(dim),
            inverse: DMatrix::identity(dim, dim),
        }
    }

    /// A pure linear map (zero shift).
    pub fn linear(matrix: DMatrix<f64>) -> Result<AffineMap> {
        let n = matrix.nrows();
        AffineMap::new(matrix, DVector::zeros(n))
    }

    pub fn dim(&self) -> usize {
        self.shift.len()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn shift(&self) -> &DVector<f64> {
        &self.shift
    }

    pub fn apply(&self, x: &Point) -> Result<Point> {
        check_dim(self.dim(), x.dim())?;
        let v = &self.matrix * DVector::from_column_slice(x.coords()) + &self.shift;
        Ok(Point::from_vec(v.as_slice().to_vec()))
    }

    /// Applies only the linear part; used for difference vectors.
    pub fn apply_linear(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim(), x.len())?;
        Ok((&self.matrix * DVector::from_column_slice(x)).as_slice().to_vec())
    }

    /// `self` after `inner`: `x -> self(inner(x))`.
    pub fn compose(&self, inner: &AffineMap) -> Result<AffineMap> {
        check_dim(self.dim(), inner.dim())?;
        AffineMap::new(
            &self.matrix * &inner.matrix,
            &self.matrix * &inner.shift + &self.shift,
        )
    }

    pub fn inverse(&self) -> AffineMap {
        AffineMap {
            matrix: self.inverse.clone(),
            shift: -(&self.inverse * &self.shift),
            inverse: self.matrix.clone(),
        }
    }

    /// The hyperplane `h'` with `h'(apply(x))` a positive multiple of `h(x)`.
    pub fn transform_hyperplane(&self, h: &Hyperplane) -> Result<Hyperplane> {
        check_dim(self.dim(), h.dim())?;
        // h(x) = <v, A^-1 (y - s)> + b = <A^-T v, y> + b - <A^-T v, s>
        let v = DVector::from_column_slice(h.normal());
        let normal = self.inverse.transpose() * v;
        let offset = h.offset() - normal.dot(&self.shift);
        Hyperplane::new(normal.as_slice().to_vec(), offset)
    }
}

pub fn apply_affine(m: &AffineMap, x: &Point) -> Result<Point> {
    m.apply(x)
}

pub fn transform_hyperplane(m: &AffineMap, h: &Hyperplane) -> Result<Hyperplane> {
    m.transform_hyperplane(h)
}

pub fn evaluate(h: &Hyperplane, x: &Point) -> Result<f64> {
    h.evaluate(x)
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Angle in radians between two nonzero vectors.
pub fn angle_between(a: &[f64], b: &[f64]) -> f64 {
    let c = dot(a, b) / (norm(a) * norm(b));
    c.clamp(-1.0, 1.0).acos()
}
