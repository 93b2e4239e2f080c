//! Dense kernels for local systems and sparse direct solves for global ones.

use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};
use faer::Mat;
use nalgebra as na;

use crate::error::{Error, Result};

pub type DenseMat = na::DMatrix<f64>;
pub type DenseVec = na::DVector<f64>;

const RESIDUAL_TOL: f64 = 1e-10;
const BACKWARD_TOL: f64 = 1e-13;

/// Solve A x = b for a small square system (LU with full pivoting).
pub fn solve_dense(a: &DenseMat, b: &DenseMat) -> Result<DenseMat> {
    let lu = a.clone().full_piv_lu();
    lu.solve(b)
        .ok_or_else(|| Error::Solver(format!("singular {}x{} dense system", a.nrows(), a.ncols())))
}

/// Solve the equality-constrained system [A Cᵀ; C 0] [x; λ] = [b; d] and
/// return x. Used for projector systems whose
/// stiffness block is singular on constants and fixed by a mean constraint.
/// `b` and `d` may have several columns.
pub fn dense_constrained_solve(a: &DenseMat, c: &DenseMat, b: &DenseMat, d: &DenseMat) -> Result<DenseMat> {
    let n = a.nrows();
    let m = c.nrows();
    assert_eq!(a.ncols(), n);
    assert_eq!(c.ncols(), n);
    assert_eq!(b.nrows(), n);
    assert_eq!(d.nrows(), m);
    assert_eq!(b.ncols(), d.ncols());
    let mut k = DenseMat::zeros(n + m, n + m);
    k.view_mut((0, 0), (n, n)).copy_from(a);
    k.view_mut((n, 0), (m, n)).copy_from(c);
    k.view_mut((0, n), (n, m)).copy_from(&c.transpose());
    let mut rhs = DenseMat::zeros(n + m, b.ncols());
    rhs.view_mut((0, 0), (n, b.ncols())).copy_from(b);
    rhs.view_mut((n, 0), (m, b.ncols())).copy_from(d);
    let x = solve_dense(&k, &rhs)?;
    let res = (&k * &x - &rhs).norm();
    let scale = k.norm() * x.norm() + rhs.norm();
    if res > 1e-9 * scale.max(f64::MIN_POSITIVE) {
        return Err(Error::Solver(format!("constrained solve residual {res:e}")));
    }
    Ok(x.rows(0, n).into_owned())
}

/// Symmetric sparse matrix collected as triplets; duplicates are summed.
#[derive(Debug, Clone, Default)]
pub struct SparseSym {
    pub n: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl SparseSym {
    pub fn new(n: usize) -> Self {
        Self { n, entries: Vec::new() }
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(i < self.n && j < self.n);
        if v != 0.0 {
            self.entries.push((i, j, v));
        }
    }

    /// Add a dense block with row/column maps; `None` entries are skipped.
    pub fn add_block(&mut self, rows: &[Option<usize>], cols: &[Option<usize>], block: &DenseMat) {
        for (a, ri) in rows.iter().enumerate() {
            let Some(i) = ri else { continue };
            for (b, cj) in cols.iter().enumerate() {
                if let Some(j) = cj {
                    self.add(*i, *j, block[(a, b)]);
                }
            }
        }
    }

    pub fn nnz_entries(&self) -> usize {
        self.entries.len()
    }

    fn to_faer(&self) -> Result<SparseColMat<usize, f64>> {
        let t: Vec<Triplet<usize, usize, f64>> = self.entries.iter().map(|&(i, j, v)| Triplet::new(i, j, v)).collect();
        SparseColMat::try_new_from_triplets(self.n, self.n, &t).map_err(|e| Error::Solver(format!("{e:?}")))
    }

    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for &(i, j, v) in &self.entries {
            y[i] += v * x[j];
        }
        y
    }

    /// Largest |A_ij - A_ji| relative to the largest entry.
    pub fn asymmetry(&self) -> f64 {
        let mut sum = std::collections::HashMap::new();
        for &(i, j, v) in &self.entries {
            *sum.entry((i, j)).or_insert(0.0) += v;
        }
        let scale = sum.values().fold(0.0f64, |m, v: &f64| m.max(v.abs()));
        let worst = sum
            .iter()
            .fold(0.0f64, |m, (&(i, j), &v)| m.max((v - sum.get(&(j, i)).copied().unwrap_or(0.0)).abs()));
        if scale > 0.0 {
            worst / scale
        } else {
            0.0
        }
    }

    pub fn to_dense(&self) -> DenseMat {
        let mut d = DenseMat::zeros(self.n, self.n);
        for &(i, j, v) in &self.entries {
            d[(i, j)] += v;
        }
        d
    }

    /// Cholesky solve; fails if the matrix is not positive definite.
    pub fn solve_spd(&self, b: &[f64]) -> Result<Vec<f64>> {
        let a = self.to_faer()?;
        let llt = a.sp_cholesky(faer::Side::Lower).map_err(|e| Error::Solver(format!("Cholesky: {e:?}")))?;
        self.refine(b, |r| solve_with(&llt, r))
    }

    /// LU solve with partial pivoting for symmetric indefinite (saddle) systems.
    pub fn solve_sym_indef(&self, b: &[f64]) -> Result<Vec<f64>> {
        let a = self.to_faer()?;
        let lu = a.sp_lu().map_err(|e| Error::Solver(format!("LU: {e:?}")))?;
        self.refine(b, |r| solve_with(&lu, r))
    }

    /// Apply a factorization, then up to three steps of iterative refinement
    /// until the relative residual meets the contract.
    fn refine(&self, b: &[f64], solve: impl Fn(&[f64]) -> Vec<f64>) -> Result<Vec<f64>> {
        let bn = norm(b);
        if bn == 0.0 {
            return Ok(vec![0.0; self.n]);
        }
        let mut x = solve(b);
        let mut res = f64::INFINITY;
        for _ in 0..4 {
            let ax = self.mul(&x);
            let r: Vec<f64> = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
            res = norm(&r) / bn;
            if !res.is_finite() {
                break;
            }
            if res <= RESIDUAL_TOL * 1e-2 {
                return Ok(x);
            }
            let dx = solve(&r);
            for (xi, d) in x.iter_mut().zip(dx) {
                *xi += d;
            }
        }
        // the relative residual cannot drop below eps·‖|A||x|‖/‖b‖; accept a
        // solution whose backward error is at roundoff level
        let backward = norm(&r_abs(&self.entries, &x, self.n)) + bn;
        if res <= RESIDUAL_TOL || res * bn <= BACKWARD_TOL * backward {
            Ok(x)
        } else {
            Err(Error::Solver(format!("relative residual {res:e} after refinement")))
        }
    }
}

fn r_abs(entries: &[(usize, usize, f64)], x: &[f64], n: usize) -> Vec<f64> {
    let mut y = vec![0.0; n];
    for &(i, j, v) in entries {
        y[i] += (v * x[j]).abs();
    }
    y
}

fn solve_with<S: Solve<f64>>(f: &S, r: &[f64]) -> Vec<f64> {
    let mut m = Mat::<f64>::zeros(r.len(), 1);
    for (i, v) in r.iter().enumerate() {
        m[(i, 0)] = *v;
    }
    let x = f.solve(&m);
    (0..r.len()).map(|i| x[(i, 0)]).collect()
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}
