//! Flux reconstruction from the primal solution: a virtual partition of
//! unity, one small mixed problem per vertex patch, the summed flux and its
//! estimator and diagnostics. Requires κ = 1 and a pure Dirichlet boundary.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::degrees::DegreeMap;
use crate::error::{Error, Result};
use crate::estimators::{eta_flux, oscillation, require_unit_kappa, Estimate};
use crate::local::{dot, mat_vec, quad_form};
use crate::mesh::{EdgeTag, PolyMesh, Side};
use crate::mixed::{build_mixed_locals, solve_saddle, FluxDofLayout, MixedLocalMats, MixedSolution, SaddleBlock};
use crate::poly::PolygonQuadrature;
use crate::primal::{PrimalLocalMats, PrimalSolution, StabVariant};
use crate::problem::Problem;

const COMPAT_TOL: f64 = 1e-10;

/// Local primal DOFs of φ_ν on one support element.
#[derive(Debug, Clone, PartialEq)]
pub struct PouPiece {
    pub element: usize,
    pub dofs: Vec<f64>,
}

/// φ_ν: 1 at ν, 0 at the other vertices, affine along the skeleton, and
/// with the moments of 1/N^K on each support element.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionOfUnityFn {
    pub vertex: usize,
    pub pieces: Vec<PouPiece>,
}

pub fn pou_piece(mesh: &PolyMesh, loc: &PrimalLocalMats, vertex: usize) -> PouPiece {
    let el = &mesh.elements[loc.element];
    let nv = el.vertices.len();
    let i = el.vertices.iter().position(|&v| v == vertex).expect("vertex of the element");
    let mut dofs = vec![0.0; loc.n_dofs];
    dofs[i] = 1.0;
    let prev = (i + nv - 1) % nv;
    for (edge, start) in [(i, true), (prev, false)] {
        let pe = loc.edge_degree[edge];
        let nodes = &crate::poly::lobatto(pe + 1).nodes;
        for kn in 1..pe {
            let t = nodes[kn];
            dofs[loc.edge_start[edge] + kn - 1] = if start { 0.5 * (1.0 - t) } else { 0.5 * (1.0 + t) };
        }
    }
    let nm = loc.pi0.nrows();
    for a in 0..nm {
        dofs[loc.moment_start + a] = loc.mass[(a, 0)] / (nv as f64 * loc.area);
    }
    PouPiece { element: loc.element, dofs }
}

pub fn build_pou(mesh: &PolyMesh, primal: &PrimalSolution) -> Vec<PartitionOfUnityFn> {
    (0..mesh.n_vertices())
        .map(|v| PartitionOfUnityFn {
            vertex: v,
            pieces: mesh.elements_of_vertex(v).iter().map(|&k| pou_piece(mesh, &primal.locals[k], v)).collect(),
        })
        .collect()
}

/// c^K = S̃^K((I-Π∇)φ_ν, (I-Π∇)ũ_n) / |K|.
pub fn c_e(primal: &PrimalSolution, piece: &PouPiece) -> f64 {
    let loc = &primal.locals[piece.element];
    let u = primal.local(piece.element);
    let su = mat_vec(&loc.stab, &u);
    piece.dofs.iter().zip(&su).map(|(a, b)| a * b).sum::<f64>() / loc.area
}

/// Solution of one patch problem, already in global flux numbering.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchSolution {
    pub vertex: usize,
    pub interior: bool,
    /// (global flux DOF, value).
    pub flux: Vec<(usize, f64)>,
    /// (element, P_{p-1} coefficients of r_ν).
    pub scalar: Vec<(usize, Vec<f64>)>,
    /// Relative defect of the compatibility condition (interior patches).
    pub compatibility: f64,
    /// ‖Π⁰σ_ν + Π⁰_{p-2}φ_ν ∇Π∇ũ_n‖²_{ω_ν}.
    pub pou_sq: f64,
}

/// Data shared by all patch problems on one discretization.
pub struct PatchContext<'a> {
    pub mesh: &'a PolyMesh,
    pub primal: &'a PrimalSolution,
    pub mixed_locals: &'a [MixedLocalMats],
    pub layout: &'a FluxDofLayout,
    pub l2g: &'a [Vec<usize>],
    pub prob: &'a dyn Problem,
    /// Per element: w_γ = ∫_K ∇Π∇ũ_n · g_γ.
    grad_u_moments: Vec<Vec<f64>>,
    /// Per element: ∫_K f m_β.
    f_moments: Vec<Vec<f64>>,
}

impl<'a> PatchContext<'a> {
    pub fn new(
        mesh: &'a PolyMesh,
        primal: &'a PrimalSolution,
        mixed_locals: &'a [MixedLocalMats],
        layout: &'a FluxDofLayout,
        l2g: &'a [Vec<usize>],
        prob: &'a dyn Problem,
    ) -> Result<Self> {
        let per: Vec<(Vec<f64>, Vec<f64>)> = (0..mesh.n_elements())
            .into_par_iter()
            .map(|k| -> Result<(Vec<f64>, Vec<f64>)> {
                let ml = &mixed_locals[k];
                let pl = &primal.locals[k];
                let pts = mesh.element_points(k);
                let q = PolygonQuadrature::new(&pts, 2 * ml.p + 6)?;
                let ng = ml.gram.nrows();
                let mut w = vec![0.0; ng];
                for (x, wt) in q.points.iter().zip(&q.weights) {
                    let gu = pl.basis.eval_poly_grad(&primal.pi_coeffs[k], *x);
                    let g = ml.basis.eval_grad(*x);
                    for (gam, wg) in w.iter_mut().enumerate() {
                        *wg += wt * ml.h * dot(gu, g[gam + 1]);
                    }
                }
                // same rule as the primal load, so the patch data stay compatible
                let qf = PolygonQuadrature::new(&pts, 2 * pl.p + 3)?;
                let mut fm = vec![0.0; ml.n_scalar];
                for (x, wt) in qf.points.iter().zip(&qf.weights) {
                    let fx = prob.f(*x);
                    for (b, m) in fm.iter_mut().zip(ml.basis.eval(*x)) {
                        *b += wt * fx * m;
                    }
                }
                Ok((w, fm))
            })
            .collect::<Result<_>>()?;
        let (grad_u_moments, f_moments) = per.into_iter().unzip();
        Ok(Self {
            mesh,
            primal,
            mixed_locals,
            layout,
            l2g,
            prob,
            grad_u_moments,
            f_moments,
        })
    }

    /// ∫_K (∇Π∇φ·∇Π∇ũ_n) m_β for the piece of φ on element k.
    fn cross_moments(&self, k: usize, phi: &[f64]) -> Result<Vec<f64>> {
        let ml = &self.mixed_locals[k];
        let pl = &self.primal.locals[k];
        let cphi = pl.project(phi);
        let q = PolygonQuadrature::new(&self.mesh.element_points(k), 2 * ml.p + 6)?;
        let mut out = vec![0.0; ml.n_scalar];
        for (x, w) in q.points.iter().zip(&q.weights) {
            let a = pl.basis.eval_poly_grad(&cphi, *x);
            let b = pl.basis.eval_poly_grad(&self.primal.pi_coeffs[k], *x);
            let d = w * dot(a, b);
            for (o, m) in out.iter_mut().zip(ml.basis.eval(*x)) {
                *o += d * m;
            }
        }
        Ok(out)
    }

    pub fn solve_patch(&self, vertex: usize) -> Result<PatchSolution> {
        let mesh = self.mesh;
        let patch = mesh.patch(vertex);
        let interior = !mesh.is_boundary_vertex(vertex);
        let mut fixed_edges: Vec<usize> = Vec::new();
        for &e in &patch.boundary_edges {
            let edge = &mesh.edges[e];
            if interior || !(edge.is_boundary() && edge.tag == EdgeTag::Dirichlet) {
                fixed_edges.push(e);
            }
        }
        let mut fixed = std::collections::HashSet::new();
        for &e in &fixed_edges {
            for j in 0..=self.primal.degrees.edge[e] {
                fixed.insert(self.layout.edge_offset[e] + j);
            }
        }
        let mut index: HashMap<usize, usize> = HashMap::new();
        let mut globals = Vec::new();
        let mut scalar_offsets = Vec::new();
        let mut ns_total = 0;
        for &k in &patch.elements {
            for &g in &self.l2g[k] {
                if !fixed.contains(&g) && !index.contains_key(&g) {
                    index.insert(g, globals.len());
                    globals.push(g);
                }
            }
            scalar_offsets.push(ns_total);
            ns_total += self.mixed_locals[k].n_scalar;
        }

        let mut blocks = Vec::with_capacity(patch.elements.len());
        let mut compat = 0.0;
        let mut compat_scale = 0.0;
        let mut phis = Vec::new();
        for (pos, &k) in patch.elements.iter().enumerate() {
            let ml = &self.mixed_locals[k];
            let piece = pou_piece(mesh, &self.primal.locals[k], vertex);
            let nk = mesh.elements[k].vertices.len() as f64;
            let ck = c_e(self.primal, &piece);
            let cross = self.cross_moments(k, &piece.dofs)?;
            let fm = &self.f_moments[k];
            let rhs_scalar: Vec<f64> = (0..ml.n_scalar).map(|b| -(fm[b] / nk - cross[b] - ck * ml.mass_s[(0, b)])).collect();
            compat += rhs_scalar[0];
            compat_scale += (fm[0] / nk).abs() + cross[0].abs() + (ck * ml.area).abs();
            let w = &self.grad_u_moments[k];
            let rhs_flux: Vec<f64> = (0..ml.n_dofs).map(|j| -(0..w.len()).map(|g| ml.pi[(g, j)] * w[g]).sum::<f64>() / nk).collect();
            blocks.push(SaddleBlock {
                local: ml,
                flux_map: self.l2g[k].iter().map(|g| index.get(g).copied()).collect(),
                flux_fixed: vec![0.0; ml.n_dofs],
                scalar_offset: scalar_offsets[pos],
                rhs_flux,
                rhs_scalar,
            });
            phis.push(nk);
        }
        // m_0 = 1, so the first scalar row is the test with q = 1.
        let compatibility = compat.abs() / compat_scale.max(f64::MIN_POSITIVE);
        if interior && compatibility > COMPAT_TOL {
            return Err(Error::Compatibility { vertex, defect: compatibility });
        }
        let (xf, xs) = solve_saddle(&blocks, globals.len(), ns_total, interior)?;
        let flux: Vec<(usize, f64)> = globals.iter().copied().zip(xf.iter().copied()).collect();
        let mut scalar = Vec::new();
        let mut pou_sq = 0.0;
        for (pos, &k) in patch.elements.iter().enumerate() {
            let ml = &self.mixed_locals[k];
            let o = scalar_offsets[pos];
            scalar.push((k, xs[o..o + ml.n_scalar].to_vec()));
            let local: Vec<f64> = self.l2g[k].iter().map(|g| index.get(g).map_or(0.0, |&i| xf[i])).collect();
            let c = ml.project(&local);
            // ‖Πσ + ∇Πũ/N‖² with Πσ and ∇Πũ both in G_p.
            let gu = gradient_coeffs(ml, &self.primal.locals[k], &self.primal.pi_coeffs[k], phis[pos]);
            let sum: Vec<f64> = c.iter().zip(&gu).map(|(a, b)| a + b).collect();
            pou_sq += quad_form(&ml.gram, &sum);
        }
        Ok(PatchSolution {
            vertex,
            interior,
            flux,
            scalar,
            compatibility,
            pou_sq,
        })
    }
}

/// Coefficients in the gradient basis of ∇Π∇ũ_n / n.
fn gradient_coeffs(ml: &MixedLocalMats, pl: &PrimalLocalMats, pi: &[f64], n: f64) -> Vec<f64> {
    // ∇m_α (primal basis) = h^{-1} g_{α-1} in the mixed basis: same center,
    // same h, and monomial indices agree up to degree p.
    let mut out = vec![0.0; ml.gram.nrows()];
    for (a, c) in pi.iter().enumerate().skip(1) {
        out[a - 1] += c / (pl.basis.h * n);
    }
    out
}

/// Reconstructed flux with its patch data.
#[derive(Debug, Clone)]
pub struct FluxReconstruction {
    pub sigma: MixedSolution,
    pub patches: Vec<PatchSolution>,
}

impl FluxReconstruction {
    pub fn max_compatibility_defect(&self) -> f64 {
        self.patches.iter().filter(|p| p.interior).map(|p| p.compatibility).fold(0.0, f64::max)
    }

    pub fn pou_quantity(&self) -> f64 {
        self.patches.iter().map(|p| p.pou_sq).sum::<f64>().sqrt()
    }
}

fn check_assumptions(mesh: &PolyMesh) -> Result<()> {
    require_unit_kappa(mesh)?;
    if mesh.edges.iter().any(|e| e.tag == EdgeTag::Neumann) {
        return Err(Error::Precondition("flux reconstruction needs a pure Dirichlet boundary".into()));
    }
    Ok(())
}

/// σ_n = Σ_ν σ_ν, using the given stabilization for the patch problems.
pub fn reconstruct_flux(mesh: &PolyMesh, primal: &PrimalSolution, prob: &dyn Problem, variant: StabVariant) -> Result<FluxReconstruction> {
    check_assumptions(mesh)?;
    let deg: &DegreeMap = &primal.degrees;
    let layout = FluxDofLayout::new(mesh, deg);
    let locals = build_mixed_locals(mesh, deg, variant)?;
    let l2g: Vec<Vec<usize>> = (0..mesh.n_elements()).map(|k| layout.local_to_global(mesh, deg, k)).collect();
    let ctx = PatchContext::new(mesh, primal, &locals, &layout, &l2g, prob)?;
    let patches: Vec<PatchSolution> = (0..mesh.n_vertices()).into_par_iter().map(|v| ctx.solve_patch(v)).collect::<Result<_>>()?;
    let flux = accumulate_sigma(layout.n_flux, &patches);
    drop(ctx);
    let pi_coeffs = locals
        .iter()
        .zip(&l2g)
        .map(|(loc, map)| loc.project(&map.iter().map(|&g| flux[g]).collect::<Vec<_>>()))
        .collect();
    let scalar = vec![0.0; layout.n_scalar];
    let sigma = MixedSolution {
        layout,
        flux,
        scalar,
        locals,
        l2g,
        pi_coeffs,
        variant,
    };
    Ok(FluxReconstruction { sigma, patches })
}

/// DOF-wise sum of the patch fluxes.
pub fn accumulate_sigma(n_flux: usize, patches: &[PatchSolution]) -> Vec<f64> {
    let mut out = vec![0.0; n_flux];
    for p in patches {
        for &(g, v) in &p.flux {
            out[g] += v;
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FluxDiagnostics {
    pub eta_flux: Estimate,
    pub oscillation: f64,
    pub pou_quantity: f64,
    pub compatibility_defect: f64,
}

pub fn diagnostics(mesh: &PolyMesh, primal: &PrimalSolution, rec: &FluxReconstruction, prob: &dyn Problem) -> Result<FluxDiagnostics> {
    Ok(FluxDiagnostics {
        eta_flux: eta_flux(mesh, primal, &rec.sigma)?,
        oscillation: oscillation(mesh, &rec.sigma, prob)?,
        pou_quantity: rec.pou_quantity(),
        compatibility_defect: rec.max_compatibility_defect(),
    })
}

/// Norms from the global counterpart of the patch problems.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GlobalVariant {
    /// ‖r_n‖₀.
    pub residual: f64,
    /// ‖Π⁰σ_n + ∇Π∇ũ_n‖₀.
    pub discrete_mismatch: f64,
    /// ‖Π⁰σ_n + ∇u‖₀ against the exact gradient.
    pub exact_mismatch: f64,
}

/// Global counterpart of the patch problems on the whole domain.
pub fn global_variant(mesh: &PolyMesh, primal: &PrimalSolution, prob: &dyn Problem, variant: StabVariant) -> Result<GlobalVariant> {
    check_assumptions(mesh)?;
    let deg = &primal.degrees;
    let layout = FluxDofLayout::new(mesh, deg);
    let locals = build_mixed_locals(mesh, deg, variant)?;
    let l2g: Vec<Vec<usize>> = (0..mesh.n_elements()).map(|k| layout.local_to_global(mesh, deg, k)).collect();
    let ctx = PatchContext::new(mesh, primal, &locals, &layout, &l2g, prob)?;
    let blocks: Vec<SaddleBlock> = locals
        .iter()
        .map(|ml| {
            let k = ml.element;
            let w = &ctx.grad_u_moments[k];
            SaddleBlock {
                local: ml,
                flux_map: l2g[k].iter().map(|&g| Some(g)).collect(),
                flux_fixed: vec![0.0; ml.n_dofs],
                scalar_offset: layout.scalar_offset[k],
                rhs_flux: (0..ml.n_dofs).map(|j| -(0..w.len()).map(|g| ml.pi[(g, j)] * w[g]).sum::<f64>()).collect(),
                rhs_scalar: ctx.f_moments[k].iter().map(|v| -v).collect(),
            }
        })
        .collect();
    let (xf, xs) = solve_saddle(&blocks, layout.n_flux, layout.n_scalar, false)?;
    let per: Vec<[f64; 3]> = locals
        .par_iter()
        .map(|ml| -> Result<[f64; 3]> {
            let k = ml.element;
            let o = layout.scalar_offset[k];
            let r2 = quad_form(&ml.mass_s, &xs[o..o + ml.n_scalar]);
            let c = ml.project(&l2g[k].iter().map(|&g| xf[g]).collect::<Vec<_>>());
            let gu = gradient_coeffs(ml, &primal.locals[k], &primal.pi_coeffs[k], 1.0);
            let s: Vec<f64> = c.iter().zip(&gu).map(|(a, b)| a + b).collect();
            let m2 = quad_form(&ml.gram, &s);
            let q = PolygonQuadrature::new(&mesh.element_points(k), 2 * ml.p + 8)?;
            let mut e2 = 0.0;
            for (x, w) in q.points.iter().zip(&q.weights) {
                let sg = ml.eval_grad_field(&c, *x);
                let g = prob.grad_u(*x, Side::None);
                e2 += w * ((sg[0] + g[0]).powi(2) + (sg[1] + g[1]).powi(2));
            }
            Ok([r2, m2, e2])
        })
        .collect::<Result<_>>()?;
    let sum = |i: usize| per.iter().map(|v| v[i]).sum::<f64>().sqrt();
    Ok(GlobalVariant {
        residual: sum(0),
        discrete_mismatch: sum(1),
        exact_mismatch: sum(2),
    })
}
