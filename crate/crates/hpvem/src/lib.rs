//! hp-adaptive virtual element solver for -div(κ∇u) = f on polygonal meshes,
//! with equilibrated, residual and flux-reconstruction error estimators.

pub mod adaptivity;
pub mod degrees;
pub mod error;
pub mod estimators;
pub mod flux;
pub mod linalg;
pub mod local;
pub mod mesh;
pub mod mixed;
pub mod poly;
pub mod primal;
pub mod problem;

pub use error::{Error, Result};

/// Scalar used by everything above the geometric substrate.
pub type Real = f64;
pub type Point = poly::Point<Real>;
pub type Basis = poly::MonomialBasis2D<Real>;
