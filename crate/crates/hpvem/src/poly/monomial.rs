use super::{Point, Scalar};

/// Number of bivariate polynomials of total degree at most `deg`.
pub const fn dim_p(deg: usize) -> usize {
    (deg + 1) * (deg + 2) / 2
}

/// Same as [`dim_p`] but returns 0 for negative degrees.
pub const fn dim_p_signed(deg: i64) -> usize {
    if deg < 0 {
        0
    } else {
        dim_p(deg as usize)
    }
}

/// Position of the multi-index (a, b) in the graded ordering
/// (0,0), (1,0), (0,1), (2,0), (1,1), (0,2), ...
pub const fn monomial_index(a: usize, b: usize) -> usize {
    let d = a + b;
    if d == 0 {
        0
    } else {
        dim_p(d - 1) + b
    }
}

pub fn exponents(deg: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(dim_p(deg));
    for d in 0..=deg {
        for b in 0..=d {
            out.push((d - b, b));
        }
    }
    out
}

/// Monomials ((x - x_E)/h_E)^a ((y - y_E)/h_E)^b up to a total degree.
#[derive(Debug, Clone, PartialEq)]
pub struct MonomialBasis2D<T> {
    pub center: Point<T>,
    pub h: T,
    pub degree: usize,
    exps: Vec<(usize, usize)>,
}

impl<T: Scalar> MonomialBasis2D<T> {
    pub fn new(center: Point<T>, h: T, degree: usize) -> Self {
        Self {
            center,
            h,
            degree,
            exps: exponents(degree),
        }
    }

    pub fn len(&self) -> usize {
        self.exps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exps.is_empty()
    }

    pub fn exps(&self) -> &[(usize, usize)] {
        &self.exps
    }

    fn powers(&self, x: Point<T>) -> (Vec<T>, Vec<T>) {
        let xi = (x[0] - self.center[0]) / self.h;
        let eta = (x[1] - self.center[1]) / self.h;
        let mut px = vec![T::one(); self.degree + 1];
        let mut py = vec![T::one(); self.degree + 1];
        for k in 1..=self.degree {
            px[k] = px[k - 1] * xi;
            py[k] = py[k - 1] * eta;
        }
        (px, py)
    }

    pub fn eval(&self, x: Point<T>) -> Vec<T> {
        let mut out = vec![T::zero(); self.len()];
        self.eval_into(x, &mut out);
        out
    }

    pub fn eval_into(&self, x: Point<T>, out: &mut [T]) {
        let (px, py) = self.powers(x);
        for (o, &(a, b)) in out.iter_mut().zip(&self.exps) {
            *o = px[a] * py[b];
        }
    }

    pub fn eval_grad(&self, x: Point<T>) -> Vec<Point<T>> {
        let (px, py) = self.powers(x);
        self.exps
            .iter()
            .map(|&(a, b)| {
                let gx = if a > 0 { T::of(a as f64) * px[a - 1] * py[b] } else { T::zero() };
                let gy = if b > 0 { T::of(b as f64) * px[a] * py[b - 1] } else { T::zero() };
                [gx / self.h, gy / self.h]
            })
            .collect()
    }

    pub fn eval_laplacian(&self, x: Point<T>) -> Vec<T> {
        let (px, py) = self.powers(x);
        let h2 = self.h * self.h;
        self.exps
            .iter()
            .map(|&(a, b)| {
                let mut v = T::zero();
                if a > 1 {
                    v += T::of((a * (a - 1)) as f64) * px[a - 2] * py[b];
                }
                if b > 1 {
                    v += T::of((b * (b - 1)) as f64) * px[a] * py[b - 2];
                }
                v / h2
            })
            .collect()
    }

    /// Δm_α written in the same basis: a list of (index, coefficient) pairs,
    /// all indices of total degree |α| - 2.
    pub fn laplacian_coeffs(&self, alpha: usize) -> Vec<(usize, T)> {
        let (a, b) = self.exps[alpha];
        let h2 = self.h * self.h;
        let mut out = Vec::new();
        if a > 1 {
            out.push((monomial_index(a - 2, b), T::of((a * (a - 1)) as f64) / h2));
        }
        if b > 1 {
            out.push((monomial_index(a, b - 2), T::of((b * (b - 1)) as f64) / h2));
        }
        out
    }

    /// Evaluate a polynomial given by coefficients in this basis.
    pub fn eval_poly(&self, coeffs: &[T], x: Point<T>) -> T {
        let (px, py) = self.powers(x);
        coeffs.iter().zip(&self.exps).fold(T::zero(), |acc, (&c, &(a, b))| acc + c * px[a] * py[b])
    }

    pub fn eval_poly_grad(&self, coeffs: &[T], x: Point<T>) -> Point<T> {
        let g = self.eval_grad(x);
        let mut out = [T::zero(); 2];
        for (c, gi) in coeffs.iter().zip(&g) {
            out[0] += *c * gi[0];
            out[1] += *c * gi[1];
        }
        out
    }
}

/// Basis of ∇P_{p+1}: the fields h_E ∇m_γ for 1 ≤ |γ| ≤ p + 1.
#[derive(Debug, Clone, PartialEq)]
pub struct GradBasis<T> {
    pub scalar: MonomialBasis2D<T>,
    pub p: usize,
}

impl<T: Scalar> GradBasis<T> {
    pub fn new(center: Point<T>, h: T, p: usize) -> Self {
        Self {
            scalar: MonomialBasis2D::new(center, h, p + 1),
            p,
        }
    }

    pub fn len(&self) -> usize {
        dim_p(self.p + 1) - 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Member k corresponds to the scalar monomial with index k + 1.
    pub fn eval(&self, x: Point<T>) -> Vec<Point<T>> {
        let h = self.scalar.h;
        self.scalar.eval_grad(x).into_iter().skip(1).map(|g| [g[0] * h, g[1] * h]).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ordering_matches_graded_layout() {
        assert_eq!(&exponents(2), &[(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2)]);
        for (k, &(a, b)) in exponents(6).iter().enumerate() {
            assert_eq!(monomial_index(a, b), k);
        }
        assert_eq!(dim_p_signed(-1), 0);
        assert_eq!(dim_p(3), 10);
    }

    #[test]
    fn basic_values() {
        let m = MonomialBasis2D::<f64>::new([0.3, -0.2], 0.5, 2);
        let x = [1.1, 0.7];
        assert_eq!(m.eval(x)[0], 1.0);
        let g = m.eval_grad(x);
        assert!((g[1][0] - 2.0).abs() < 1e-15 && g[1][1] == 0.0);
        let l = m.eval_laplacian(x);
        assert!((l[3] - 2.0 / 0.25).abs() < 1e-13);
        assert_eq!(m.laplacian_coeffs(3), vec![(0, 8.0)]);
    }

    #[test]
    fn dilation_invariance() {
        let a = MonomialBasis2D::<f64>::new([0.0, 0.0], 1.0, 4);
        let b = MonomialBasis2D::new([2.0, 3.0], 0.25, 4);
        let pa = a.eval([0.4, -0.6]);
        let pb = b.eval([2.0 + 0.1, 3.0 - 0.15]);
        for (u, v) in pa.iter().zip(&pb) {
            assert!((u - v).abs() < 1e-14);
        }
    }

    #[test]
    fn generic_over_f32() {
        let m = MonomialBasis2D::<f32>::new([0.0, 0.0], 2.0, 3);
        assert_eq!(m.len(), 10);
        assert!((m.eval([1.0, 1.0])[9] - 0.125).abs() < 1e-7);
    }
}
