//! Compact nilmanifolds `G/Λ` with lattice-preserving automorphisms, and
//! estimators for their statistical properties: exponential (multiple) mixing,
//! equidistribution of boxes and unstable leaves, the central limit theorem,
//! and the cohomological equation.
//!
//! Algebraic data (structure constants, automorphism matrices) is exact
//! rational; Monte-Carlo loops run in `f64` on the same formulas.

pub mod equidistribution;
pub mod error;
pub mod estimate;
pub mod lie;
pub mod linalg;
pub mod nilmanifold;
pub mod observables;
pub mod poly;
pub mod report;
pub mod scalar;
pub mod spectral;
pub mod stochastics;

pub use error::{Error, Result};
pub use lie::NilpotentAlgebra;
pub use scalar::{Coords, Rational, Scalar};
