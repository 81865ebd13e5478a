//! Active learning of non-homogeneous linear separators with label and
//! comparison queries.
//!
//! The crate is organised bottom-up:
//!
//! - [`geometry`]: points, hyperplanes, homogeneous lifting, affine maps.
//! - [`distributions`]: seeded samplers for instance distributions and hidden
//!   classifiers, plus empirical whitening.
//! - [`oracle`]: the counted label/comparison oracle and a merge-sort driver.
//! - [`lp`]: a small dense simplex used for version-space feasibility.
//! - [`inference`]: constraint sets over the lifted weight vector and the
//!   `infer` decision procedure.
//! - [`rpu`]: reliable learners (the doubling learner and the fixed-round pool
//!   learner).
//! - [`pac`]: the comparison pool PAC learner and the 2-D membership-query
//!   learner.
//! - [`pointloc`]: point location in hyperplane arrangements through duality.
//! - [`analysis`]: brute-force checks, Monte Carlo estimators, growth fits.
//! - [`harness`]: experiment configuration, orchestration and CSV emission.

pub mod analysis;
pub mod distributions;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod inference;
pub mod lp;
pub mod oracle;
pub mod pac;
pub mod pointloc;
pub mod rpu;

pub use error::{Error, Result};
pub use geometry::{AffineMap, Hyperplane, LiftedVector, Point, Sign};
