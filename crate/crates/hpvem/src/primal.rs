//! Primal virtual elements: degrees of freedom, the H¹ and L² projectors,
//! stabilizations and the global symmetric positive definite solve.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::degrees::DegreeMap;
use crate::error::{Error, Result};
use crate::linalg::{dense_constrained_solve, solve_dense, DenseMat, SparseSym};
use crate::local::{dot, grad_gram, lagrange, mass_matrix, mat_vec, outward_normal};
use crate::mesh::{EdgeTag, PolyMesh};
use crate::poly::{dim_p_signed, gauss, lobatto, PolygonQuadrature};
use crate::problem::Problem;
use crate::{Basis, Point};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StabVariant {
    Theoretical,
    /// Diagonal recipe; the mixed floor is |κ⁻¹| |K|.
    #[serde(rename = "drecipe")]
    DRecipe,
    /// Diagonal recipe with the mixed floor |κ⁻¹| h_K².
    #[serde(rename = "drecipe-h2")]
    DRecipeDiameter,
}

impl StabVariant {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "theoretical" => Ok(StabVariant::Theoretical),
            "drecipe" => Ok(StabVariant::DRecipe),
            "drecipe-h2" => Ok(StabVariant::DRecipeDiameter),
            _ => Err(Error::Config(format!("unknown stabilization {s}"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            StabVariant::Theoretical => "theoretical",
            StabVariant::DRecipe => "drecipe",
            StabVariant::DRecipeDiameter => "drecipe-h2",
        }
    }
}

/// Global numbering: vertex values first, then the internal Gauss-Lobatto
/// values of every edge (ordered along the edge orientation), then the
/// moments of every element.
#[derive(Debug, Clone, PartialEq)]
pub struct PrimalDofLayout {
    pub n_dofs: usize,
    pub edge_offset: Vec<usize>,
    pub elem_offset: Vec<usize>,
    pub fixed: Vec<bool>,
}

impl PrimalDofLayout {
    pub fn new(mesh: &PolyMesh, deg: &DegreeMap) -> Self {
        let mut n = mesh.n_vertices();
        let mut edge_offset = Vec::with_capacity(mesh.n_edges());
        for e in 0..mesh.n_edges() {
            edge_offset.push(n);
            n += deg.edge[e] - 1;
        }
        let mut elem_offset = Vec::with_capacity(mesh.n_elements());
        for k in 0..mesh.n_elements() {
            elem_offset.push(n);
            n += dim_p_signed(deg.elem[k] as i64 - 2);
        }
        let mut fixed = vec![false; n];
        for (v, d) in mesh.dirichlet_vertices().into_iter().enumerate() {
            fixed[v] = d;
        }
        for e in mesh.edges.iter().filter(|e| e.tag == EdgeTag::Dirichlet) {
            for j in 0..deg.edge[e.id] - 1 {
                fixed[edge_offset[e.id] + j] = true;
            }
        }
        Self {
            n_dofs: n,
            edge_offset,
            elem_offset,
            fixed,
        }
    }

    pub fn local_to_global(&self, mesh: &PolyMesh, deg: &DegreeMap, k: usize) -> Vec<usize> {
        let el = &mesh.elements[k];
        let mut out: Vec<usize> = el.vertices.clone();
        for (i, &e) in el.edges.iter().enumerate() {
            let m = deg.edge[e] - 1;
            for j in 0..m {
                let jj = if el.edge_sign[i] > 0.0 { j } else { m - 1 - j };
                out.push(self.edge_offset[e] + jj);
            }
        }
        let nm = dim_p_signed(deg.elem[k] as i64 - 2);
        out.extend((0..nm).map(|b| self.elem_offset[k] + b));
        out
    }
}

/// Local projector, stabilization and stiffness matrices of one element.
#[derive(Debug, Clone)]
pub struct PrimalLocalMats {
    pub element: usize,
    pub p: usize,
    pub n_dofs: usize,
    pub n_vertices: usize,
    /// Local index of the first internal node of each local edge.
    pub edge_start: Vec<usize>,
    pub edge_degree: Vec<usize>,
    pub moment_start: usize,
    pub basis: Basis,
    /// ∫_K m_α m_β up to degree p.
    pub mass: DenseMat,
    /// ∫_K ∇m_α·∇m_β up to degree p.
    pub stiff: DenseMat,
    /// DOFs → coefficients of Π∇_p in `basis`.
    pub pi_nabla: DenseMat,
    /// DOFs → coefficients of Π⁰_{p-2} (no rows for p = 1).
    pub pi0: DenseMat,
    /// DOF values of each basis monomial (columns).
    pub dmat: DenseMat,
    pub consistency: DenseMat,
    /// Stabilization already composed with (I - Π∇) on both sides.
    pub stab: DenseMat,
    pub kappa: f64,
    pub area: f64,
}

impl PrimalLocalMats {
    pub fn new(mesh: &PolyMesh, deg: &DegreeMap, k: usize, variant: StabVariant) -> Result<Self> {
        let el = &mesh.elements[k];
        let p = deg.elem[k];
        let pts = mesh.element_points(k);
        let nv = pts.len();
        let (h, area, kappa) = (el.diameter, el.area, el.kappa);
        let basis = Basis::new(el.centroid, h, p);
        let np = basis.len();
        let nm = dim_p_signed(p as i64 - 2);
        let edge_degree: Vec<usize> = el.edges.iter().map(|&e| deg.edge[e]).collect();
        let mut edge_start = Vec::with_capacity(nv);
        let mut n = nv;
        for &pe in &edge_degree {
            edge_start.push(n);
            n += pe - 1;
        }
        let moment_start = n;
        let ndof = n + nm;
        let quad = PolygonQuadrature::new(&pts, 2 * p + 3)?;
        let mass = mass_matrix(&basis, &quad);
        let stiff = grad_gram(&basis, &quad);

        let mut mean_row = DenseMat::zeros(1, ndof);
        let mut c_row = DenseMat::zeros(1, np);
        let mut rhs = DenseMat::zeros(np, ndof);
        let mut dmat = DenseMat::zeros(ndof, np);
        for i in 0..nv {
            let (a, b) = (pts[i], pts[(i + 1) % nv]);
            let nrm = outward_normal(a, b);
            let pe = edge_degree[i];
            for (kn, (x, w)) in lobatto(pe + 1).map_to_segment(a, b).into_iter().enumerate() {
                let dof = self::edge_node_dof(i, kn, pe, nv, &edge_start);
                mean_row[(0, dof)] += w;
                let mv = basis.eval(x);
                for (beta, m) in mv.iter().enumerate() {
                    c_row[(0, beta)] += w * m;
                    if kn > 0 && kn < pe {
                        dmat[(dof, beta)] = *m;
                    }
                }
                for (alpha, g) in basis.eval_grad(x).iter().enumerate().skip(1) {
                    rhs[(alpha, dof)] += w * dot(*g, nrm);
                }
            }
        }
        for alpha in 0..np {
            for (beta, c) in basis.laplacian_coeffs(alpha) {
                rhs[(alpha, moment_start + beta)] -= c * area;
            }
        }
        let pi_nabla = dense_constrained_solve(&stiff, &c_row, &rhs, &mean_row).map_err(|e| Error::SingularLocal {
            element: k,
            what: format!("H1 projector: {e}"),
        })?;

        for (i, x) in pts.iter().enumerate() {
            for (beta, m) in basis.eval(*x).iter().enumerate() {
                dmat[(i, beta)] = *m;
            }
        }
        for a in 0..nm {
            for beta in 0..np {
                dmat[(moment_start + a, beta)] = mass[(a, beta)] / area;
            }
        }

        let mut pi0 = DenseMat::zeros(nm, ndof);
        if nm > 0 {
            let mut sel = DenseMat::zeros(nm, ndof);
            for a in 0..nm {
                sel[(a, moment_start + a)] = area;
            }
            let m = mass.view((0, 0), (nm, nm)).into_owned();
            pi0 = solve_dense(&m, &sel).map_err(|_| Error::SingularLocal {
                element: k,
                what: "moment mass matrix".into(),
            })?;
        }

        let consistency = (pi_nabla.transpose() * &stiff * &pi_nabla) * kappa;
        let proj = DenseMat::identity(ndof, ndof) - &dmat * &pi_nabla;
        let core = match variant {
            StabVariant::DRecipe | StabVariant::DRecipeDiameter => {
                let mut d = DenseMat::zeros(ndof, ndof);
                for j in 0..ndof {
                    d[(j, j)] = kappa.abs().max(consistency[(j, j)]);
                }
                d
            }
            StabVariant::Theoretical => {
                let pf = p as f64;
                let mut s = DenseMat::zeros(ndof, ndof);
                if nm > 0 {
                    let m = mass.view((0, 0), (nm, nm)).into_owned();
                    s += (pi0.transpose() * m * &pi0) * (kappa * h * h / (pf * pf));
                }
                for i in 0..nv {
                    let (a, b) = (pts[i], pts[(i + 1) % nv]);
                    let pe = edge_degree[i];
                    let nodes = &lobatto(pe + 1).nodes;
                    let dofs: Vec<usize> = (0..=pe).map(|kn| self::edge_node_dof(i, kn, pe, nv, &edge_start)).collect();
                    let len = crate::poly::geometry::dist(a, b);
                    let g = gauss(pe + 1);
                    for (t, w) in g.nodes.iter().zip(&g.weights) {
                        let l = lagrange(nodes, *t);
                        let ww = w * 0.5 * len * kappa * h / pf;
                        for (r, &dr) in dofs.iter().enumerate() {
                            for (c, &dc) in dofs.iter().enumerate() {
                                s[(dr, dc)] += ww * l[r] * l[c];
                            }
                        }
                    }
                }
                s
            }
        };
        let stab = proj.transpose() * core * &proj;
        Ok(Self {
            element: k,
            p,
            n_dofs: ndof,
            n_vertices: nv,
            edge_start,
            edge_degree,
            moment_start,
            basis,
            mass,
            stiff,
            pi_nabla,
            pi0,
            dmat,
            consistency,
            stab,
            kappa,
            area,
        })
    }

    pub fn stiffness(&self) -> DenseMat {
        &self.consistency + &self.stab
    }

    /// Local load: (f, Π⁰_{p-2} v) for p ≥ 2, and ∫_K f times the mean of
    /// the vertex values for p = 1.
    pub fn load(&self, mesh: &PolyMesh, f: &(dyn Fn(Point) -> f64 + Sync)) -> Result<Vec<f64>> {
        let pts = mesh.element_points(self.element);
        let quad = PolygonQuadrature::new(&pts, 2 * self.p + 3)?;
        let mut out = vec![0.0; self.n_dofs];
        if self.p == 1 {
            let total = quad.integrate(f);
            for v in out.iter_mut().take(self.n_vertices) {
                *v = total / self.n_vertices as f64;
            }
        } else {
            let nm = self.pi0.nrows();
            let low = Basis::new(self.basis.center, self.basis.h, self.p - 2);
            let mut b = vec![0.0; nm];
            for (x, w) in quad.points.iter().zip(&quad.weights) {
                let fx = f(*x) * w;
                for (bi, m) in b.iter_mut().zip(low.eval(*x)) {
                    *bi += fx * m;
                }
            }
            for (j, o) in out.iter_mut().enumerate() {
                *o = (0..nm).map(|a| self.pi0[(a, j)] * b[a]).sum();
            }
        }
        Ok(out)
    }

    /// Coordinates of the local edge-node DOFs of local edge i, start vertex
    /// first and end vertex last.
    pub fn edge_dofs(&self, i: usize) -> Vec<usize> {
        let pe = self.edge_degree[i];
        (0..=pe).map(|kn| edge_node_dof(i, kn, pe, self.n_vertices, &self.edge_start)).collect()
    }

    pub fn project(&self, local: &[f64]) -> Vec<f64> {
        mat_vec(&self.pi_nabla, local)
    }
}

fn edge_node_dof(i: usize, kn: usize, pe: usize, nv: usize, edge_start: &[usize]) -> usize {
    if kn == 0 {
        i
    } else if kn == pe {
        (i + 1) % nv
    } else {
        edge_start[i] + kn - 1
    }
}

/// Primal solution with cached local data.
#[derive(Debug, Clone)]
pub struct PrimalSolution {
    pub degrees: DegreeMap,
    pub layout: PrimalDofLayout,
    pub dofs: Vec<f64>,
    pub locals: Vec<PrimalLocalMats>,
    pub l2g: Vec<Vec<usize>>,
    /// Coefficients of Π∇ũ_n on every element.
    pub pi_coeffs: Vec<Vec<f64>>,
    pub variant: StabVariant,
}

impl PrimalSolution {
    pub fn local(&self, k: usize) -> Vec<f64> {
        self.l2g[k].iter().map(|&g| self.dofs[g]).collect()
    }

    pub fn n_dofs(&self) -> usize {
        self.layout.n_dofs
    }
}

pub fn build_primal_locals(mesh: &PolyMesh, deg: &DegreeMap, variant: StabVariant) -> Result<Vec<PrimalLocalMats>> {
    (0..mesh.n_elements())
        .into_par_iter()
        .map(|k| PrimalLocalMats::new(mesh, deg, k, variant))
        .collect()
}

/// DOF values of a smooth function: point values, and moments by quadrature.
pub fn interpolate(mesh: &PolyMesh, deg: &DegreeMap, layout: &PrimalDofLayout, prob: &dyn Problem) -> Result<Vec<f64>> {
    let mut out = vec![0.0; layout.n_dofs];
    for v in &mesh.vertices {
        out[v.id] = prob.u(v.pos(), v.side());
    }
    for e in &mesh.edges {
        let pe = deg.edge[e.id];
        let (a, b) = mesh.edge_points(e.id);
        for (j, (x, _)) in lobatto(pe + 1).map_to_segment(a, b).into_iter().enumerate().skip(1).take(pe - 1) {
            out[layout.edge_offset[e.id] + j - 1] = prob.u(x, e.side);
        }
    }
    for el in &mesh.elements {
        let p = deg.elem[el.id];
        if p < 2 {
            continue;
        }
        let basis = Basis::new(el.centroid, el.diameter, p - 2);
        let quad = PolygonQuadrature::new(&mesh.element_points(el.id), 2 * p + 6)?;
        for (x, w) in quad.points.iter().zip(&quad.weights) {
            let u = prob.u(*x, crate::mesh::Side::None) * w / el.area;
            for (a, m) in basis.eval(*x).iter().enumerate() {
                out[layout.elem_offset[el.id] + a] += u * m;
            }
        }
    }
    Ok(out)
}

/// Assemble and solve the primal problem with Dirichlet values interpolated
/// at the boundary nodes and Neumann data integrated against the traces.
pub fn assemble_solve_primal(mesh: &PolyMesh, deg: &DegreeMap, prob: &dyn Problem, variant: StabVariant) -> Result<PrimalSolution> {
    let layout = PrimalDofLayout::new(mesh, deg);
    let locals = build_primal_locals(mesh, deg, variant)?;
    let l2g: Vec<Vec<usize>> = (0..mesh.n_elements()).map(|k| layout.local_to_global(mesh, deg, k)).collect();
    let f = |x: Point| prob.f(x);
    let loads: Vec<Vec<f64>> = locals.par_iter().map(|l| l.load(mesh, &f)).collect::<Result<_>>()?;

    let mut g = vec![0.0; layout.n_dofs];
    let boundary = interpolate_boundary(mesh, deg, &layout, prob);
    for (i, v) in boundary {
        g[i] = v;
    }
    let mut rhs_full = vec![0.0; layout.n_dofs];
    for (k, l) in loads.iter().enumerate() {
        for (a, &gi) in l2g[k].iter().enumerate() {
            rhs_full[gi] += l[a];
        }
    }
    neumann_load(mesh, deg, &layout, prob, &mut rhs_full);

    let mut free_index = vec![None; layout.n_dofs];
    let mut n_free = 0;
    for (slot, &fx) in free_index.iter_mut().zip(&layout.fixed) {
        if !fx {
            *slot = Some(n_free);
            n_free += 1;
        }
    }
    let mut a = SparseSym::new(n_free);
    let mut rhs = vec![0.0; n_free];
    for i in 0..layout.n_dofs {
        if let Some(fi) = free_index[i] {
            rhs[fi] = rhs_full[i];
        }
    }
    for (k, loc) in locals.iter().enumerate() {
        let kl = loc.stiffness();
        let map: Vec<Option<usize>> = l2g[k].iter().map(|&gi| free_index[gi]).collect();
        a.add_block(&map, &map, &kl);
        for (r, mr) in map.iter().enumerate() {
            let Some(fr) = mr else { continue };
            for (c, &gc) in l2g[k].iter().enumerate() {
                if layout.fixed[gc] {
                    rhs[*fr] -= kl[(r, c)] * g[gc];
                }
            }
        }
    }
    let x = if n_free > 0 { a.solve_spd(&rhs)? } else { Vec::new() };
    let mut dofs = g;
    for i in 0..layout.n_dofs {
        if let Some(fi) = free_index[i] {
            dofs[i] = x[fi];
        }
    }
    let pi_coeffs = locals
        .iter()
        .zip(&l2g)
        .map(|(loc, map)| loc.project(&map.iter().map(|&gi| dofs[gi]).collect::<Vec<_>>()))
        .collect();
    Ok(PrimalSolution {
        degrees: deg.clone(),
        layout,
        dofs,
        locals,
        l2g,
        pi_coeffs,
        variant,
    })
}

fn interpolate_boundary(mesh: &PolyMesh, deg: &DegreeMap, layout: &PrimalDofLayout, prob: &dyn Problem) -> Vec<(usize, f64)> {
    let mut out = Vec::new();
    for (v, d) in mesh.dirichlet_vertices().into_iter().enumerate() {
        if d {
            let vx = &mesh.vertices[v];
            out.push((v, prob.u(vx.pos(), vx.side())));
        }
    }
    for e in mesh.edges.iter().filter(|e| e.tag == EdgeTag::Dirichlet) {
        let pe = deg.edge[e.id];
        let (a, b) = mesh.edge_points(e.id);
        for (j, (x, _)) in lobatto(pe + 1).map_to_segment(a, b).into_iter().enumerate().skip(1).take(pe - 1) {
            out.push((layout.edge_offset[e.id] + j - 1, prob.u(x, e.side)));
        }
    }
    out
}

/// Adds ∫_e g_N v over Neumann edges, g_N = κ ∇u·n.
fn neumann_load(mesh: &PolyMesh, deg: &DegreeMap, layout: &PrimalDofLayout, prob: &dyn Problem, rhs: &mut [f64]) {
    for e in mesh.edges.iter().filter(|e| e.tag == EdgeTag::Neumann) {
        let k = e.neighbors.0;
        let el = &mesh.elements[k];
        let i = el.edges.iter().position(|&x| x == e.id).unwrap();
        let nrm = [e.normal[0] * el.edge_sign[i], e.normal[1] * el.edge_sign[i]];
        let pe = deg.edge[e.id];
        let nodes = &lobatto(pe + 1).nodes;
        let (a, b) = mesh.edge_points(e.id);
        let mut dofs = vec![e.v[0]];
        dofs.extend((0..pe - 1).map(|j| layout.edge_offset[e.id] + j));
        dofs.push(e.v[1]);
        let g = gauss(pe + 8);
        for ((x, w), t) in g.map_to_segment(a, b).into_iter().zip(&g.nodes) {
            let gn = el.kappa * dot(prob.grad_u(x, e.side), nrm);
            for (d, l) in dofs.iter().zip(lagrange(nodes, *t)) {
                rhs[*d] += w * gn * l;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_mesh, zigzag_mesh, Domain, Family};
    use crate::problem::PolynomialProblem;

    fn local_dofs_of(loc: &PrimalLocalMats, mesh: &PolyMesh, f: impl Fn(Point) -> f64) -> Vec<f64> {
        let pts = mesh.element_points(loc.element);
        let nv = pts.len();
        let mut v = vec![0.0; loc.n_dofs];
        for i in 0..nv {
            v[i] = f(pts[i]);
            let pe = loc.edge_degree[i];
            for (kn, (x, _)) in lobatto(pe + 1).map_to_segment(pts[i], pts[(i + 1) % nv]).into_iter().enumerate() {
                if kn > 0 && kn < pe {
                    v[loc.edge_start[i] + kn - 1] = f(x);
                }
            }
        }
        let nm = loc.pi0.nrows();
        if nm > 0 {
            let low = Basis::new(loc.basis.center, loc.basis.h, loc.p - 2);
            let quad = PolygonQuadrature::new(&pts, 2 * loc.p + 6).unwrap();
            for (x, w) in quad.points.iter().zip(&quad.weights) {
                for (a, m) in low.eval(*x).iter().enumerate() {
                    v[loc.moment_start + a] += w * f(*x) * m / loc.area;
                }
            }
        }
        v
    }

    #[test]
    fn projector_reproduces_polynomials() {
        let mesh = zigzag_mesh();
        for p in 1..=4 {
            let deg = DegreeMap::uniform(&mesh, p).unwrap();
            for k in 0..mesh.n_elements() {
                let loc = PrimalLocalMats::new(&mesh, &deg, k, StabVariant::DRecipe).unwrap();
                for alpha in 0..loc.basis.len() {
                    let v = local_dofs_of(&loc, &mesh, |x| loc.basis.eval(x)[alpha]);
                    let c = loc.project(&v);
                    for (b, cb) in c.iter().enumerate() {
                        let e = if b == alpha { 1.0 } else { 0.0 };
                        assert!((cb - e).abs() < 1e-10, "p {p} el {k} α {alpha}: {cb}");
                    }
                    let s = crate::local::quad_form(&loc.stab, &v);
                    assert!(s.abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn polynomial_solution_is_exact() {
        let prob = PolynomialProblem::new(vec![(2, 0, 1.0), (1, 1, -0.5), (0, 2, 0.25), (2, 2, 1.0), (3, 1, 0.3)]);
        let mesh = build_mesh(Domain::UnitSquare, Family::Cartesian, 1).unwrap();
        for variant in [StabVariant::DRecipe, StabVariant::DRecipeDiameter, StabVariant::Theoretical] {
            let deg = DegreeMap::uniform(&mesh, 4).unwrap();
            let sol = assemble_solve_primal(&mesh, &deg, &prob, variant).unwrap();
            let exact = interpolate(&mesh, &deg, &sol.layout, &prob).unwrap();
            let err = sol.dofs.iter().zip(&exact).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(err < 1e-9, "{err}");
        }
    }
}
