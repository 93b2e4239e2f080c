//! Mixed virtual elements for fluxes: degrees of freedom, divergence and
//! rotor extraction, the projector onto gradients, stabilizations and the
//! symmetric saddle-point solve.

use rayon::prelude::*;

use crate::degrees::DegreeMap;
use crate::error::{Error, Result};
use crate::linalg::{solve_dense, DenseMat, SparseSym};
use crate::local::{dot, lagrange, mass_matrix, mat_vec};
use crate::mesh::{EdgeTag, PolyMesh};
use crate::poly::{dim_p, gauss, PolygonQuadrature};
use crate::primal::StabVariant;
use crate::problem::Problem;
use crate::{Basis, Point};

/// Global flux numbering: the normal-trace values of every edge at its
/// Gauss nodes (edge orientation, global normal), then per element the
/// gradient moments followed by the rotor moments. Scalars are numbered
/// per element.
#[derive(Debug, Clone, PartialEq)]
pub struct FluxDofLayout {
    pub n_flux: usize,
    pub edge_offset: Vec<usize>,
    pub elem_offset: Vec<usize>,
    pub n_scalar: usize,
    pub scalar_offset: Vec<usize>,
    /// Flux DOFs carried by Neumann edges.
    pub neumann: Vec<bool>,
}

impl FluxDofLayout {
    pub fn new(mesh: &PolyMesh, deg: &DegreeMap) -> Self {
        let mut n = 0;
        let mut edge_offset = Vec::with_capacity(mesh.n_edges());
        for e in 0..mesh.n_edges() {
            edge_offset.push(n);
            n += deg.edge[e] + 1;
        }
        let mut elem_offset = Vec::with_capacity(mesh.n_elements());
        let mut scalar_offset = Vec::with_capacity(mesh.n_elements());
        let mut ns = 0;
        for k in 0..mesh.n_elements() {
            let s = dim_p(deg.elem[k] - 1);
            elem_offset.push(n);
            n += 2 * s - 1;
            scalar_offset.push(ns);
            ns += s;
        }
        let mut neumann = vec![false; n];
        for e in mesh.edges.iter().filter(|e| e.tag == EdgeTag::Neumann) {
            for j in 0..=deg.edge[e.id] {
                neumann[edge_offset[e.id] + j] = true;
            }
        }
        Self {
            n_flux: n,
            edge_offset,
            elem_offset,
            n_scalar: ns,
            scalar_offset,
            neumann,
        }
    }

    pub fn local_to_global(&self, mesh: &PolyMesh, deg: &DegreeMap, k: usize) -> Vec<usize> {
        let el = &mesh.elements[k];
        let mut out = Vec::new();
        for &e in &el.edges {
            out.extend((0..=deg.edge[e]).map(|j| self.edge_offset[e] + j));
        }
        let s = dim_p(deg.elem[k] - 1);
        out.extend((0..2 * s - 1).map(|t| self.elem_offset[k] + t));
        out
    }
}

/// Local matrices of the flux space on one element of degree p.
#[derive(Debug, Clone)]
pub struct MixedLocalMats {
    pub element: usize,
    pub p: usize,
    pub n_dofs: usize,
    pub edge_start: Vec<usize>,
    pub edge_degree: Vec<usize>,
    /// Outward normal sign of each local edge relative to its global normal.
    pub edge_sign: Vec<f64>,
    pub grad_start: usize,
    pub rot_start: usize,
    /// dim P_{p-1}.
    pub n_scalar: usize,
    /// Scaled monomials up to degree p+1; the first `n_scalar` span P_{p-1}.
    pub basis: Basis,
    /// ∫_K m_α m_β over P_{p-1}.
    pub mass_s: DenseMat,
    /// ∫_K div τ m_β (n_scalar × n_dofs).
    pub bdiv: DenseMat,
    /// DOFs → P_{p-1} coefficients of div τ.
    pub div: DenseMat,
    /// DOFs → P_{p-1} coefficients of rot τ.
    pub rot: DenseMat,
    /// Gram matrix of the gradient basis h∇m_γ, γ = 1..dim P_{p+1}-1.
    pub gram: DenseMat,
    /// DOFs → coefficients of Π⁰_p τ in the gradient basis.
    pub pi: DenseMat,
    /// DOF values of the gradient basis fields (columns).
    pub dg: DenseMat,
    pub consistency: DenseMat,
    pub stab: DenseMat,
    /// Unprojected stabilization core, used by diagnostics.
    pub stab_core: DenseMat,
    pub kappa: f64,
    pub area: f64,
    pub h: f64,
}

impl MixedLocalMats {
    pub fn new(mesh: &PolyMesh, deg: &DegreeMap, k: usize, variant: StabVariant) -> Result<Self> {
        let el = &mesh.elements[k];
        let p = deg.elem[k];
        let pts = mesh.element_points(k);
        let (h, area, kappa) = (el.diameter, el.area, el.kappa);
        let basis = Basis::new(el.centroid, h, p + 1);
        let ns = dim_p(p - 1);
        let ng = basis.len() - 1;
        let edge_degree: Vec<usize> = el.edges.iter().map(|&e| deg.edge[e]).collect();
        let mut edge_start = Vec::with_capacity(el.edges.len());
        let mut n = 0;
        for &pe in &edge_degree {
            edge_start.push(n);
            n += pe + 1;
        }
        let grad_start = n;
        let rot_start = grad_start + ns - 1;
        let ndof = rot_start + ns;
        let quad = PolygonQuadrature::new(&pts, 2 * p + 4)?;
        let mass_full = mass_matrix(&basis, &quad);
        let mass_s = mass_full.view((0, 0), (ns, ns)).into_owned();
        let mut gram = DenseMat::zeros(ng, ng);
        for (x, w) in quad.points.iter().zip(&quad.weights) {
            let g = basis.eval_grad(*x);
            for a in 0..ng {
                for b in a..ng {
                    gram[(a, b)] += w * h * h * dot(g[a + 1], g[b + 1]);
                }
            }
        }
        crate::local::symmetrize_upper(&mut gram);

        // Boundary terms ∫_∂K τ·n m_γ for all γ ≤ p+1, from the edge nodes.
        let nb = basis.len();
        let mut bnd = DenseMat::zeros(nb, ndof);
        let mut dg = DenseMat::zeros(ndof, ng);
        let mut stab_edge = DenseMat::zeros(ndof, ndof);
        for (i, &e) in el.edges.iter().enumerate() {
            let s = el.edge_sign[i];
            let edge = &mesh.edges[e];
            let (a, b) = mesh.edge_points(e);
            for (j, (x, w)) in gauss(edge_degree[i] + 1).map_to_segment(a, b).into_iter().enumerate() {
                let dof = edge_start[i] + j;
                for (g, m) in basis.eval(x).iter().enumerate() {
                    bnd[(g, dof)] += s * w * m;
                }
                for (g, gr) in basis.eval_grad(x).iter().enumerate().skip(1) {
                    dg[(dof, g - 1)] = h * dot(*gr, edge.normal);
                }
                stab_edge[(dof, dof)] += w;
            }
        }
        let mut bdiv = bnd.rows(0, ns).into_owned();
        for b in 1..ns {
            bdiv[(b, grad_start + b - 1)] -= area / h;
        }
        let div = solve_dense(&mass_s, &bdiv).map_err(|_| singular(k, "scalar mass matrix"))?;
        let mut rot_sel = DenseMat::zeros(ns, ndof);
        for b in 0..ns {
            rot_sel[(b, rot_start + b)] = area / h;
        }
        let rot = solve_dense(&mass_s, &rot_sel).map_err(|_| singular(k, "scalar mass matrix"))?;

        // (τ, h∇m_γ) = h(-∫ div τ m_γ + ∫_∂K τ·n m_γ).
        let mx = mass_full.view((1, 0), (ng, ns)).into_owned();
        let q = (bnd.rows(1, ng).into_owned() - mx * &div) * h;
        let pi = solve_dense(&gram, &q).map_err(|_| singular(k, "gradient Gram matrix"))?;
        for a in 0..ns - 1 {
            for g in 0..ng {
                dg[(grad_start + a, g)] = gram[(a, g)] / area;
            }
        }

        let kinv = 1.0 / kappa;
        let consistency = (pi.transpose() * &gram * &pi) * kinv;
        let stab_core = match variant {
            StabVariant::DRecipe | StabVariant::DRecipeDiameter => {
                let floor = kinv.abs() * if variant == StabVariant::DRecipe { area } else { h * h };
                let mut d = DenseMat::zeros(ndof, ndof);
                for j in 0..ndof {
                    d[(j, j)] = floor.max(consistency[(j, j)]);
                }
                d
            }
            StabVariant::Theoretical => {
                let mut s = stab_edge * (h * kinv);
                s += (div.transpose() * &mass_s * &div + rot.transpose() * &mass_s * &rot) * (h * h * kinv);
                s
            }
        };
        let proj = DenseMat::identity(ndof, ndof) - &dg * &pi;
        let stab = proj.transpose() * &stab_core * &proj;
        Ok(Self {
            element: k,
            p,
            n_dofs: ndof,
            edge_start,
            edge_degree,
            edge_sign: el.edge_sign.clone(),
            grad_start,
            rot_start,
            n_scalar: ns,
            basis,
            mass_s,
            bdiv,
            div,
            rot,
            gram,
            pi,
            dg,
            consistency,
            stab,
            stab_core,
            kappa,
            area,
            h,
        })
    }

    pub fn stiffness(&self) -> DenseMat {
        &self.consistency + &self.stab
    }

    pub fn project(&self, local: &[f64]) -> Vec<f64> {
        mat_vec(&self.pi, local)
    }

    /// Value at x of the gradient-basis field with coefficients c.
    pub fn eval_grad_field(&self, c: &[f64], x: Point) -> Point {
        let g = self.basis.eval_grad(x);
        let mut out = [0.0, 0.0];
        for (ci, gi) in c.iter().zip(&g[1..]) {
            out[0] += ci * self.h * gi[0];
            out[1] += ci * self.h * gi[1];
        }
        out
    }

    /// Value at x of the P_{p-1} polynomial with coefficients c.
    pub fn eval_scalar(&self, c: &[f64], x: Point) -> f64 {
        self.basis.eval(x).iter().zip(c).map(|(m, c)| m * c).sum()
    }
}

fn singular(k: usize, what: &str) -> Error {
    Error::SingularLocal { element: k, what: what.into() }
}

/// DOFs on element k of a smooth vector field with known rotor.
pub fn local_flux_dofs(mesh: &PolyMesh, loc: &MixedLocalMats, field: impl Fn(Point) -> Point, rot: impl Fn(Point) -> f64) -> Result<Vec<f64>> {
    let el = &mesh.elements[loc.element];
    let mut v = vec![0.0; loc.n_dofs];
    for (i, &e) in el.edges.iter().enumerate() {
        let (a, b) = mesh.edge_points(e);
        for (j, (x, _)) in gauss(loc.edge_degree[i] + 1).map_to_segment(a, b).into_iter().enumerate() {
            v[loc.edge_start[i] + j] = dot(field(x), mesh.edges[e].normal);
        }
    }
    let quad = PolygonQuadrature::new(&mesh.element_points(loc.element), 2 * loc.p + 8)?;
    let ns = loc.n_scalar;
    for (x, w) in quad.points.iter().zip(&quad.weights) {
        let m = loc.basis.eval(*x);
        let g = loc.basis.eval_grad(*x);
        let fx = field(*x);
        let r = rot(*x);
        for a in 1..ns {
            v[loc.grad_start + a - 1] += w * loc.h * dot(fx, g[a]) / loc.area;
        }
        for b in 0..ns {
            v[loc.rot_start + b] += w * loc.h * r * m[b] / loc.area;
        }
    }
    Ok(v)
}

pub fn build_mixed_locals(mesh: &PolyMesh, deg: &DegreeMap, variant: StabVariant) -> Result<Vec<MixedLocalMats>> {
    (0..mesh.n_elements())
        .into_par_iter()
        .map(|k| MixedLocalMats::new(mesh, deg, k, variant))
        .collect()
}

/// One element's contribution to a saddle system
/// [A Bᵀ; B 0] with B = -(div τ, q).
#[derive(Debug, Clone)]
pub(crate) struct SaddleBlock<'a> {
    pub local: &'a MixedLocalMats,
    /// Local flux DOF → unknown index, `None` for prescribed DOFs.
    pub flux_map: Vec<Option<usize>>,
    /// Prescribed values (read only where `flux_map` is `None`).
    pub flux_fixed: Vec<f64>,
    pub scalar_offset: usize,
    pub rhs_flux: Vec<f64>,
    pub rhs_scalar: Vec<f64>,
}

/// Assemble and solve; with `zero_mean` the scalar is constrained to zero
/// mean through one multiplier. Returns (free flux values, scalar values).
pub(crate) fn solve_saddle(blocks: &[SaddleBlock], n_flux: usize, n_scalar: usize, zero_mean: bool) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = n_flux + n_scalar + usize::from(zero_mean);
    let mut a = SparseSym::new(n);
    let mut rhs = vec![0.0; n];
    for b in blocks {
        let loc = b.local;
        let kl = loc.stiffness();
        let bl = -&loc.bdiv;
        let smap: Vec<Option<usize>> = (0..loc.n_scalar).map(|i| Some(n_flux + b.scalar_offset + i)).collect();
        a.add_block(&b.flux_map, &b.flux_map, &kl);
        a.add_block(&smap, &b.flux_map, &bl);
        a.add_block(&b.flux_map, &smap, &bl.transpose());
        for (r, mr) in b.flux_map.iter().enumerate() {
            if let Some(fr) = mr {
                rhs[*fr] += b.rhs_flux[r];
            }
        }
        for i in 0..loc.n_scalar {
            rhs[n_flux + b.scalar_offset + i] += b.rhs_scalar[i];
        }
        for (c, mc) in b.flux_map.iter().enumerate() {
            if mc.is_some() || b.flux_fixed[c] == 0.0 {
                continue;
            }
            let v = b.flux_fixed[c];
            for (r, mr) in b.flux_map.iter().enumerate() {
                if let Some(fr) = mr {
                    rhs[*fr] -= kl[(r, c)] * v;
                }
            }
            for i in 0..loc.n_scalar {
                rhs[n_flux + b.scalar_offset + i] -= bl[(i, c)] * v;
            }
        }
        if zero_mean {
            for i in 0..loc.n_scalar {
                let m = loc.mass_s[(0, i)];
                a.add(n - 1, n_flux + b.scalar_offset + i, m);
                a.add(n_flux + b.scalar_offset + i, n - 1, m);
            }
        }
    }
    let x = a.solve_sym_indef(&rhs)?;
    Ok((x[..n_flux].to_vec(), x[n_flux..n_flux + n_scalar].to_vec()))
}

/// Mixed solution: flux DOFs, scalar coefficients and cached projections.
#[derive(Debug, Clone)]
pub struct MixedSolution {
    pub layout: FluxDofLayout,
    pub flux: Vec<f64>,
    pub scalar: Vec<f64>,
    pub locals: Vec<MixedLocalMats>,
    pub l2g: Vec<Vec<usize>>,
    /// Π⁰_p σ_n coefficients per element.
    pub pi_coeffs: Vec<Vec<f64>>,
    pub variant: StabVariant,
}

impl MixedSolution {
    pub fn local_flux(&self, k: usize) -> Vec<f64> {
        self.l2g[k].iter().map(|&g| self.flux[g]).collect()
    }

    pub fn local_scalar(&self, k: usize) -> &[f64] {
        let o = self.layout.scalar_offset[k];
        &self.scalar[o..o + self.locals[k].n_scalar]
    }

    /// P_{p-1} coefficients of div σ_n on element k.
    pub fn divergence(&self, k: usize) -> Vec<f64> {
        mat_vec(&self.locals[k].div, &self.local_flux(k))
    }

    pub fn n_dofs(&self) -> usize {
        self.layout.n_flux + self.layout.n_scalar
    }
}

/// Prescribed Neumann DOFs n_e·σ = -κ n_e·∇u at the Gauss nodes.
fn neumann_values(mesh: &PolyMesh, deg: &DegreeMap, layout: &FluxDofLayout, prob: &dyn Problem) -> Vec<f64> {
    let mut out = vec![0.0; layout.n_flux];
    for e in mesh.edges.iter().filter(|e| e.tag == EdgeTag::Neumann) {
        let kappa = mesh.elements[e.neighbors.0].kappa;
        let (a, b) = mesh.edge_points(e.id);
        for (j, (x, _)) in gauss(deg.edge[e.id] + 1).map_to_segment(a, b).into_iter().enumerate() {
            out[layout.edge_offset[e.id] + j] = -kappa * dot(prob.grad_u(x, e.side), e.normal);
        }
    }
    out
}

pub fn assemble_solve_mixed(mesh: &PolyMesh, deg: &DegreeMap, prob: &dyn Problem, variant: StabVariant) -> Result<MixedSolution> {
    if !mesh.edges.iter().any(|e| e.tag == EdgeTag::Dirichlet) {
        return Err(Error::Precondition("the mixed problem needs a Dirichlet boundary part".into()));
    }
    let layout = FluxDofLayout::new(mesh, deg);
    let locals = build_mixed_locals(mesh, deg, variant)?;
    let l2g: Vec<Vec<usize>> = (0..mesh.n_elements()).map(|k| layout.local_to_global(mesh, deg, k)).collect();
    let fixed = neumann_values(mesh, deg, &layout, prob);
    let mut free = vec![None; layout.n_flux];
    let mut n_free = 0;
    for (slot, &nm) in free.iter_mut().zip(&layout.neumann) {
        if !nm {
            *slot = Some(n_free);
            n_free += 1;
        }
    }
    let blocks: Vec<SaddleBlock> = locals
        .par_iter()
        .map(|loc| -> Result<SaddleBlock> {
            let k = loc.element;
            let el = &mesh.elements[k];
            let mut rhs_flux = vec![0.0; loc.n_dofs];
            for (i, &e) in el.edges.iter().enumerate() {
                let edge = &mesh.edges[e];
                if edge.tag != EdgeTag::Dirichlet {
                    continue;
                }
                let pe = loc.edge_degree[i];
                let nodes = &gauss(pe + 1).nodes;
                let (a, b) = mesh.edge_points(e);
                let g = gauss(pe + 8);
                for ((x, w), t) in g.map_to_segment(a, b).into_iter().zip(&g.nodes) {
                    let gd = prob.u(x, edge.side);
                    for (j, l) in lagrange(nodes, *t).into_iter().enumerate() {
                        rhs_flux[loc.edge_start[i] + j] -= loc.edge_sign[i] * w * gd * l;
                    }
                }
            }
            let quad = PolygonQuadrature::new(&mesh.element_points(k), 2 * loc.p + 6)?;
            let mut rhs_scalar = vec![0.0; loc.n_scalar];
            for (x, w) in quad.points.iter().zip(&quad.weights) {
                let fx = prob.f(*x) * w;
                for (r, m) in rhs_scalar.iter_mut().zip(loc.basis.eval(*x)) {
                    *r -= fx * m;
                }
            }
            Ok(SaddleBlock {
                local: loc,
                flux_map: l2g[k].iter().map(|&g| free[g]).collect(),
                flux_fixed: l2g[k].iter().map(|&g| fixed[g]).collect(),
                scalar_offset: layout.scalar_offset[k],
                rhs_flux,
                rhs_scalar,
            })
        })
        .collect::<Result<_>>()?;
    let (xf, scalar) = solve_saddle(&blocks, n_free, layout.n_scalar, false)?;
    drop(blocks);
    let mut flux = fixed;
    for i in 0..layout.n_flux {
        if let Some(fi) = free[i] {
            flux[i] = xf[fi];
        }
    }
    let pi_coeffs = locals
        .iter()
        .zip(&l2g)
        .map(|(loc, map)| loc.project(&map.iter().map(|&g| flux[g]).collect::<Vec<_>>()))
        .collect();
    Ok(MixedSolution {
        layout,
        flux,
        scalar,
        locals,
        l2g,
        pi_coeffs,
        variant,
    })
}

/// Smallest generalized singular value of the divergence form with respect
/// to the discrete H(div) norm a_n(τ,τ) + ‖div τ‖² and the L² norm of the
/// scalars, with all fluxes free. Dense; refuses meshes above `max_dofs`.
pub fn infsup_constant(mesh: &PolyMesh, deg: &DegreeMap, variant: StabVariant, max_dofs: usize) -> Result<f64> {
    let layout = FluxDofLayout::new(mesh, deg);
    if layout.n_flux + layout.n_scalar > max_dofs {
        return Err(Error::Precondition(format!(
            "{} unknowns exceed the dense cap {max_dofs}",
            layout.n_flux + layout.n_scalar
        )));
    }
    let locals = build_mixed_locals(mesh, deg, variant)?;
    let (nf, ns) = (layout.n_flux, layout.n_scalar);
    let mut msig = DenseMat::zeros(nf, nf);
    let mut b = DenseMat::zeros(ns, nf);
    let mut mv = DenseMat::zeros(ns, ns);
    for loc in &locals {
        let map = layout.local_to_global(mesh, deg, loc.element);
        let norm = loc.stiffness() + loc.div.transpose() * &loc.mass_s * &loc.div;
        let so = layout.scalar_offset[loc.element];
        for (r, &gr) in map.iter().enumerate() {
            for (c, &gc) in map.iter().enumerate() {
                msig[(gr, gc)] += norm[(r, c)];
            }
            for i in 0..loc.n_scalar {
                b[(so + i, gr)] -= loc.bdiv[(i, r)];
            }
        }
        for i in 0..loc.n_scalar {
            for j in 0..loc.n_scalar {
                mv[(so + i, so + j)] = loc.mass_s[(i, j)];
            }
        }
    }
    let chol = msig
        .cholesky()
        .ok_or_else(|| Error::Solver("flux norm matrix is not positive definite".into()))?;
    let schur = &b * chol.solve(&b.transpose());
    let lv = mv
        .cholesky()
        .ok_or_else(|| Error::Solver("scalar mass matrix is not positive definite".into()))?
        .l();
    let linv = lv.clone().try_inverse().ok_or_else(|| Error::Solver("singular mass factor".into()))?;
    let mut s = &linv * schur * linv.transpose();
    s = (&s + s.transpose()) * 0.5;
    let eig = s.symmetric_eigenvalues();
    Ok(eig.iter().copied().fold(f64::INFINITY, f64::min).max(0.0).sqrt())
}
