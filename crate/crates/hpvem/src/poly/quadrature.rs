use std::collections::HashMap;
use std::sync::{Arc, OnceLock, RwLock};

use nalgebra as na;

use super::geometry::{self, triangle_area};
use super::{Point, Scalar};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum EdgeRuleKind {
    Gauss,
    GaussLobatto,
}

/// One-dimensional rule on the reference interval [-1, 1], nodes ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeQuadrature<T> {
    pub kind: EdgeRuleKind,
    pub nodes: Vec<T>,
    pub weights: Vec<T>,
}

impl<T: Scalar> EdgeQuadrature<T> {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Polynomial degree integrated exactly by construction.
    pub fn exact_degree(&self) -> usize {
        let n = self.len();
        match self.kind {
            EdgeRuleKind::Gauss => 2 * n - 1,
            EdgeRuleKind::GaussLobatto => 2 * n - 3,
        }
    }

    /// Largest absolute error over x^k, k <= degree.
    pub fn exactness_defect(&self, degree: usize) -> T {
        let mut worst = T::zero();
        for k in 0..=degree {
            let exact = if k % 2 == 1 { T::zero() } else { T::of(2.0 / (k as f64 + 1.0)) };
            let got = self.nodes.iter().zip(&self.weights).fold(T::zero(), |acc, (&x, &w)| acc + w * x.powi(k as i32));
            worst = worst.max((got - exact).abs());
        }
        worst
    }

    /// Nodes mapped onto the segment a -> b, with weights scaled by its length.
    pub fn map_to_segment(&self, a: Point<T>, b: Point<T>) -> Vec<(Point<T>, T)> {
        let half = T::of(0.5);
        let len = ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt();
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&t, &w)| {
                let s = (t + T::one()) * half;
                ([a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])], w * len * half)
            })
            .collect()
    }
}

/// Legendre P_n and its derivative by the three-term recurrence.
fn legendre<T: Scalar>(n: usize, x: T) -> (T, T) {
    let mut p0 = T::one();
    if n == 0 {
        return (p0, T::zero());
    }
    let mut p1 = x;
    for k in 2..=n {
        let kf = T::of(k as f64);
        let p2 = ((T::of(2.0) * kf - T::one()) * x * p1 - (kf - T::one()) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let nf = T::of(n as f64);
    let dp = if (x.abs() - T::one()).abs() < T::default_epsilon() {
        let s = if x > T::zero() || n.is_multiple_of(2) { T::one() } else { -T::one() };
        s * nf * (nf + T::one()) / T::of(2.0)
    } else {
        nf * (x * p1 - p0) / (x * x - T::one())
    };
    (p1, dp)
}

fn symmetric_tridiag_eigen<T: Scalar>(off: &[T], m: usize) -> (Vec<T>, na::DMatrix<T>) {
    let mut j = na::DMatrix::<T>::zeros(m, m);
    for (k, &b) in off.iter().enumerate() {
        j[(k, k + 1)] = b;
        j[(k + 1, k)] = b;
    }
    let eig = na::SymmetricEigen::new(j);
    (eig.eigenvalues.iter().copied().collect(), eig.eigenvectors)
}

/// Gauss-Legendre rule with n nodes (Golub-Welsch, one Newton polish step).
pub fn gauss_legendre<T: Scalar>(n: usize) -> EdgeQuadrature<T> {
    assert!(n >= 1);
    let off: Vec<T> = (1..n)
        .map(|k| {
            let k = T::of(k as f64);
            k / (T::of(4.0) * k * k - T::one()).sqrt()
        })
        .collect();
    let (vals, vecs) = symmetric_tridiag_eigen(&off, n);
    let mut pairs: Vec<(T, T)> = (0..n).map(|i| (vals[i], T::of(2.0) * vecs[(0, i)] * vecs[(0, i)])).collect();
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let mut nodes = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    for (x0, _) in pairs {
        let (p, dp) = legendre(n, x0);
        let x = x0 - p / dp;
        let (_, dp) = legendre(n, x);
        nodes.push(x);
        weights.push(T::of(2.0) / ((T::one() - x * x) * dp * dp));
    }
    symmetrize(&mut nodes, &mut weights);
    EdgeQuadrature {
        kind: EdgeRuleKind::Gauss,
        nodes,
        weights,
    }
}

/// Gauss-Lobatto rule with n >= 2 nodes including both endpoints.
pub fn gauss_lobatto<T: Scalar>(n: usize) -> EdgeQuadrature<T> {
    assert!(n >= 2);
    let m = n - 2;
    let mut nodes = vec![-T::one()];
    if m > 0 {
        // interior nodes are the zeros of P'_{n-1}, i.e. of the Jacobi(1,1) polynomial
        let off: Vec<T> = (1..m)
            .map(|k| {
                let k = k as f64;
                T::of((k * (k + 2.0) / ((2.0 * k + 1.0) * (2.0 * k + 3.0))).sqrt())
            })
            .collect();
        let (mut vals, _) = symmetric_tridiag_eigen(&off, m);
        vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for x0 in vals {
            // Newton on P'_{n-1} using (1 - x^2) P'' = 2x P' - n(n-1) P
            let (p, dp) = legendre(n - 1, x0);
            let nn = T::of(((n - 1) * n) as f64);
            let d2p = (T::of(2.0) * x0 * dp - nn * p) / (T::one() - x0 * x0);
            nodes.push(x0 - dp / d2p);
        }
    }
    nodes.push(T::one());
    let nf = T::of(n as f64);
    let mut weights: Vec<T> = nodes
        .iter()
        .map(|&x| {
            let (p, _) = legendre(n - 1, x);
            T::of(2.0) / (nf * (nf - T::one()) * p * p)
        })
        .collect();
    symmetrize(&mut nodes, &mut weights);
    EdgeQuadrature {
        kind: EdgeRuleKind::GaussLobatto,
        nodes,
        weights,
    }
}

fn symmetrize<T: Scalar>(nodes: &mut [T], weights: &mut [T]) {
    let n = nodes.len();
    for i in 0..n / 2 {
        let j = n - 1 - i;
        let x = (nodes[j] - nodes[i]) * T::of(0.5);
        nodes[i] = -x;
        nodes[j] = x;
        let w = (weights[i] + weights[j]) * T::of(0.5);
        weights[i] = w;
        weights[j] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = T::zero();
    }
}

type RuleCache = RwLock<HashMap<(EdgeRuleKind, usize), Arc<EdgeQuadrature<f64>>>>;

fn cache() -> &'static RuleCache {
    static CACHE: OnceLock<RuleCache> = OnceLock::new();
    CACHE.get_or_init(|| RwLock::new(HashMap::new()))
}

/// Cached double precision rule. Exactness is checked once when a rule is built.
pub fn edge_rule(kind: EdgeRuleKind, n: usize) -> Arc<EdgeQuadrature<f64>> {
    if let Some(r) = cache().read().unwrap().get(&(kind, n)) {
        return r.clone();
    }
    let rule = match kind {
        EdgeRuleKind::Gauss => gauss_legendre::<f64>(n),
        EdgeRuleKind::GaussLobatto => gauss_lobatto::<f64>(n),
    };
    let defect = rule.exactness_defect(rule.exact_degree());
    assert!(defect < 1e-13, "{kind:?} rule with {n} nodes has exactness defect {defect:e}");
    let rule = Arc::new(rule);
    cache().write().unwrap().insert((kind, n), rule.clone());
    rule
}

pub fn gauss(n: usize) -> Arc<EdgeQuadrature<f64>> {
    edge_rule(EdgeRuleKind::Gauss, n)
}

pub fn lobatto(n: usize) -> Arc<EdgeQuadrature<f64>> {
    edge_rule(EdgeRuleKind::GaussLobatto, n)
}

/// Gauss rule with the fewest nodes exact for the given degree.
pub fn gauss_for_degree(degree: usize) -> Arc<EdgeQuadrature<f64>> {
    gauss(degree / 2 + 1)
}

/// DOF nodes on the segment a -> b: `p + 1` Gauss-Lobatto nodes (endpoints
/// included) or `p + 1` Gauss nodes, ordered from a to b.
pub fn edge_dof_nodes(a: Point<f64>, b: Point<f64>, p: usize, kind: EdgeRuleKind) -> Vec<Point<f64>> {
    assert!(p >= 1);
    let rule = edge_rule(kind, p + 1);
    rule.map_to_segment(a, b).into_iter().map(|(x, _)| x).collect()
}

/// Weighted points on a polygon.
#[derive(Debug, Clone, PartialEq)]
pub struct PolygonQuadrature<T> {
    pub points: Vec<Point<T>>,
    pub weights: Vec<T>,
    pub degree: usize,
}

impl<T: Scalar> PolygonQuadrature<T> {
    /// Rule on a simple counterclockwise polygon, exact up to `degree`.
    /// The polygon is fanned from an interior point of its kernel when one
    /// exists, otherwise it is ear-clipped.
    pub fn new(vertices: &[Point<T>], degree: usize) -> Result<Self> {
        if !geometry::is_simple(vertices) {
            return Err(Error::NonSimplePolygon);
        }
        let tris = geometry::triangulate(vertices)?;
        let mut points = Vec::new();
        let mut weights = Vec::new();
        for [a, b, c] in tris {
            let (p, w) = triangle_rule(a, b, c, degree);
            points.extend(p);
            weights.extend(w);
        }
        Ok(Self { points, weights, degree })
    }

    pub fn integrate(&self, mut f: impl FnMut(Point<T>) -> T) -> T {
        self.points.iter().zip(&self.weights).fold(T::zero(), |acc, (&x, &w)| acc + w * f(x))
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Collapsed tensor Gauss rule on triangle (a, b, c), exact up to `degree`.
pub fn triangle_rule<T: Scalar>(a: Point<T>, b: Point<T>, c: Point<T>, degree: usize) -> (Vec<Point<T>>, Vec<T>) {
    // the Duffy map adds one degree in the collapsed direction
    let n = degree.div_ceil(2) + 1;
    let g = gauss(n);
    let area2 = T::of(2.0) * triangle_area(a, b, c);
    let half = T::of(0.5);
    let mut pts = Vec::with_capacity(n * n);
    let mut wts = Vec::with_capacity(n * n);
    for (&xi, &wi) in g.nodes.iter().zip(&g.weights) {
        let (xi, wi) = (T::of(xi), T::of(wi));
        let s = (xi + T::one()) * half;
        for (&xj, &wj) in g.nodes.iter().zip(&g.weights) {
            let (xj, wj) = (T::of(xj), T::of(wj));
            let t = (xj + T::one()) * half * (T::one() - s);
            let w = wi * wj * half * half * (T::one() - s) * area2;
            pts.push([a[0] + s * (b[0] - a[0]) + t * (c[0] - a[0]), a[1] + s * (b[1] - a[1]) + t * (c[1] - a[1])]);
            wts.push(w);
        }
    }
    (pts, wts)
}

/// Integral of f over a polygon, exact for polynomials up to `degree_hint`.
pub fn polygon_integrate(vertices: &[Point<f64>], f: impl FnMut(Point<f64>) -> f64, degree_hint: usize) -> Result<f64> {
    Ok(PolygonQuadrature::new(vertices, degree_hint)?.integrate(f))
}
