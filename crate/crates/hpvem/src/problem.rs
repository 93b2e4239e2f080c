//! Model problems -div(κ∇u) = f with known solutions.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::{Domain, Side};
use crate::Point;

/// Exact data of a diffusion problem. κ is taken from the mesh, which must
/// be constant for `f` to be consistent with `u`.
pub trait Problem: Sync {
    fn u(&self, x: Point, side: Side) -> f64;
    fn grad_u(&self, x: Point, side: Side) -> Point;
    fn f(&self, x: Point) -> f64;
    fn domain(&self) -> Domain;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CaseId {
    Tc1,
    Tc2,
    Tc3,
    Smooth,
}

impl CaseId {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "tc1" => Ok(CaseId::Tc1),
            "tc2" => Ok(CaseId::Tc2),
            "tc3" => Ok(CaseId::Tc3),
            "smooth" => Ok(CaseId::Smooth),
            _ => Err(Error::Config(format!("unknown case {s}"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            CaseId::Tc1 => "tc1",
            CaseId::Tc2 => "tc2",
            CaseId::Tc3 => "tc3",
            CaseId::Smooth => "smooth",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestCase {
    pub id: CaseId,
}

impl TestCase {
    pub fn new(id: CaseId) -> Self {
        Self { id }
    }

    /// |u|_{1,Ω}, used to normalize reported errors of the unit-square cases.
    pub fn h1_seminorm(&self) -> Option<f64> {
        match self.id {
            CaseId::Tc3 => Some((1.0f64 / 45.0).sqrt()),
            CaseId::Smooth => Some(PI / 2f64.sqrt()),
            _ => None,
        }
    }
}

/// Polar angle in [0, 2π), with the branch cut on the positive x axis; points
/// on the lower side of the cut get 2π.
fn angle(x: Point, side: Side) -> f64 {
    let t = x[1].atan2(x[0]);
    if side == Side::Lower && x[1].abs() < 1e-14 && x[0] > 0.0 {
        2.0 * PI
    } else if t < 0.0 {
        t + 2.0 * PI
    } else {
        t
    }
}

/// u = r^a sin(a θ) and its gradient.
fn corner(x: Point, side: Side, a: f64) -> (f64, Point) {
    let r = (x[0] * x[0] + x[1] * x[1]).sqrt();
    if r == 0.0 {
        return (0.0, [0.0, 0.0]);
    }
    let t = angle(x, side);
    let u = r.powf(a) * (a * t).sin();
    let ur = a * r.powf(a - 1.0) * (a * t).sin();
    let ut = a * r.powf(a - 1.0) * (a * t).cos();
    let (c, s) = (t.cos(), t.sin());
    (u, [ur * c - ut * s, ur * s + ut * c])
}

impl Problem for TestCase {
    fn u(&self, x: Point, side: Side) -> f64 {
        match self.id {
            CaseId::Tc1 => corner(x, side, 2.0 / 3.0).0,
            CaseId::Tc2 => corner(x, side, 0.25).0,
            CaseId::Tc3 => x[0] * (1.0 - x[0]) * x[1] * (1.0 - x[1]),
            CaseId::Smooth => (PI * x[0]).sin() * (PI * x[1]).sin(),
        }
    }

    fn grad_u(&self, x: Point, side: Side) -> Point {
        match self.id {
            CaseId::Tc1 => corner(x, side, 2.0 / 3.0).1,
            CaseId::Tc2 => corner(x, side, 0.25).1,
            CaseId::Tc3 => [(1.0 - 2.0 * x[0]) * x[1] * (1.0 - x[1]), x[0] * (1.0 - x[0]) * (1.0 - 2.0 * x[1])],
            CaseId::Smooth => [PI * (PI * x[0]).cos() * (PI * x[1]).sin(), PI * (PI * x[0]).sin() * (PI * x[1]).cos()],
        }
    }

    fn f(&self, x: Point) -> f64 {
        match self.id {
            CaseId::Tc1 | CaseId::Tc2 => 0.0,
            CaseId::Tc3 => 2.0 * (x[0] * (1.0 - x[0]) + x[1] * (1.0 - x[1])),
            CaseId::Smooth => 2.0 * PI * PI * (PI * x[0]).sin() * (PI * x[1]).sin(),
        }
    }

    fn domain(&self) -> Domain {
        match self.id {
            CaseId::Tc1 => Domain::LShape,
            CaseId::Tc2 => Domain::Slit,
            CaseId::Tc3 | CaseId::Smooth => Domain::UnitSquare,
        }
    }
}

/// u = Σ c x^a y^b with f = -Δu, for exactness checks.
#[derive(Debug, Clone, PartialEq)]
pub struct PolynomialProblem {
    pub terms: Vec<(usize, usize, f64)>,
    pub domain: Domain,
}

impl PolynomialProblem {
    pub fn new(terms: Vec<(usize, usize, f64)>) -> Self {
        Self {
            terms,
            domain: Domain::UnitSquare,
        }
    }

    pub fn degree(&self) -> usize {
        self.terms.iter().map(|t| t.0 + t.1).max().unwrap_or(0)
    }
}

fn pw(x: f64, k: usize) -> f64 {
    x.powi(k as i32)
}

impl Problem for PolynomialProblem {
    fn u(&self, x: Point, _: Side) -> f64 {
        self.terms.iter().map(|&(a, b, c)| c * pw(x[0], a) * pw(x[1], b)).sum()
    }

    fn grad_u(&self, x: Point, _: Side) -> Point {
        let mut g = [0.0, 0.0];
        for &(a, b, c) in &self.terms {
            if a > 0 {
                g[0] += c * a as f64 * pw(x[0], a - 1) * pw(x[1], b);
            }
            if b > 0 {
                g[1] += c * b as f64 * pw(x[0], a) * pw(x[1], b - 1);
            }
        }
        g
    }

    fn f(&self, x: Point) -> f64 {
        let mut l = 0.0;
        for &(a, b, c) in &self.terms {
            if a > 1 {
                l += c * (a * (a - 1)) as f64 * pw(x[0], a - 2) * pw(x[1], b);
            }
            if b > 1 {
                l += c * (b * (b - 1)) as f64 * pw(x[0], a) * pw(x[1], b - 2);
            }
        }
        -l
    }

    fn domain(&self) -> Domain {
        self.domain
    }
}
