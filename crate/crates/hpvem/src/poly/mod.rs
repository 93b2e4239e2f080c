//! Scaled monomial bases, edge and polygon quadrature, and the polygon
//! geometry they rely on. Everything here is generic over the scalar type.

pub mod geometry;
pub mod monomial;
pub mod quadrature;

pub use geometry::*;
pub use monomial::*;
pub use quadrature::*;

use nalgebra as na;

/// Real scalar usable by the geometric substrate.
pub trait Scalar: na::RealField + Copy {
    fn of(x: f64) -> Self {
        na::convert(x)
    }
}

impl<T: na::RealField + Copy> Scalar for T {}

pub type Point<T> = [T; 2];
