//! Small helpers shared by the local element computations.

use crate::linalg::DenseMat;
use crate::poly::{MonomialBasis2D, PolygonQuadrature};
use crate::Point;

/// ∫_K m_α m_β for all pairs.
pub fn mass_matrix(basis: &MonomialBasis2D<f64>, quad: &PolygonQuadrature<f64>) -> DenseMat {
    let n = basis.len();
    let mut m = DenseMat::zeros(n, n);
    let mut v = vec![0.0; n];
    for (x, w) in quad.points.iter().zip(&quad.weights) {
        basis.eval_into(*x, &mut v);
        for i in 0..n {
            let wi = w * v[i];
            for j in i..n {
                m[(i, j)] += wi * v[j];
            }
        }
    }
    symmetrize_upper(&mut m);
    m
}

/// ∫_K ∇m_α · ∇m_β for all pairs.
pub fn grad_gram(basis: &MonomialBasis2D<f64>, quad: &PolygonQuadrature<f64>) -> DenseMat {
    let n = basis.len();
    let mut m = DenseMat::zeros(n, n);
    for (x, w) in quad.points.iter().zip(&quad.weights) {
        let g = basis.eval_grad(*x);
        for i in 1..n {
            for j in i..n {
                m[(i, j)] += w * (g[i][0] * g[j][0] + g[i][1] * g[j][1]);
            }
        }
    }
    symmetrize_upper(&mut m);
    m
}

pub fn symmetrize_upper(m: &mut DenseMat) {
    for i in 0..m.nrows() {
        for j in 0..i {
            m[(i, j)] = m[(j, i)];
        }
    }
}

/// Values at t of the Lagrange polynomials through `nodes`.
pub fn lagrange(nodes: &[f64], t: f64) -> Vec<f64> {
    (0..nodes.len())
        .map(|j| {
            nodes
                .iter()
                .enumerate()
                .filter(|&(k, _)| k != j)
                .fold(1.0, |acc, (_, &xk)| acc * (t - xk) / (nodes[j] - xk))
        })
        .collect()
}

/// Outward unit normal of the segment a -> b of a counterclockwise loop.
pub fn outward_normal(a: Point, b: Point) -> Point {
    let l = ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt();
    [(b[1] - a[1]) / l, -(b[0] - a[0]) / l]
}

pub fn dot(a: Point, b: Point) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

/// Quadratic form x^T A x.
pub fn quad_form(a: &DenseMat, x: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..a.nrows() {
        let mut r = 0.0;
        for j in 0..a.ncols() {
            r += a[(i, j)] * x[j];
        }
        s += x[i] * r;
    }
    s
}

pub fn mat_vec(a: &DenseMat, x: &[f64]) -> Vec<f64> {
    (0..a.nrows()).map(|i| (0..a.ncols()).map(|j| a[(i, j)] * x[j]).sum()).collect()
}
