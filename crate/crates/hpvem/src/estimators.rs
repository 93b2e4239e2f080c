//! Equilibrated and residual estimators, approximate errors, efficiency
//! indices and oscillation terms.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::local::{dot, quad_form};
use crate::mesh::{EdgeTag, PolyMesh, Side};
use crate::mixed::{local_flux_dofs, MixedSolution};
use crate::poly::{gauss, PolygonQuadrature};
use crate::primal::PrimalSolution;
use crate::problem::Problem;
use crate::{Basis, Point};

/// Per-element values and their ℓ² sum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub local: Vec<f64>,
    pub global: f64,
}

impl Estimate {
    pub fn from_squares(sq: Vec<f64>) -> Self {
        let global = sq.iter().map(|s| s.max(0.0)).sum::<f64>().sqrt();
        Self {
            local: sq.into_iter().map(|s| s.max(0.0).sqrt()).collect(),
            global,
        }
    }
}

/// Which flux enters the mixed part of the approximate error.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MixedErrorReading {
    /// σ - Π⁰_p σ_n.
    Discrete,
    /// σ - Π⁰_p σ, the projection of the exact flux.
    ExactProjection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApproxErrors {
    pub primal: Estimate,
    /// Present when a flux was supplied.
    pub mixed_pair: Option<Estimate>,
}

fn quad(mesh: &PolyMesh, k: usize, p: usize) -> Result<PolygonQuadrature<f64>> {
    PolygonQuadrature::new(&mesh.element_points(k), 2 * p + 6)
}

fn grad_pi(primal: &PrimalSolution, k: usize, x: Point) -> Point {
    primal.locals[k].basis.eval_poly_grad(&primal.pi_coeffs[k], x)
}

/// ‖κ^{1/2}(∇u - ∇Π∇ũ_n)‖ and, with a flux, the mixed pair
/// (‖κ^{1/2}(∇u - ∇Π∇ũ_n)‖² + ‖κ^{-1/2}(σ - Π⁰σ_·)‖²)^{1/2}.
pub fn approx_errors(
    mesh: &PolyMesh,
    primal: &PrimalSolution,
    flux: Option<&MixedSolution>,
    prob: &dyn Problem,
    reading: MixedErrorReading,
) -> Result<ApproxErrors> {
    let per: Vec<(f64, f64)> = (0..mesh.n_elements())
        .into_par_iter()
        .map(|k| -> Result<(f64, f64)> {
            let kappa = mesh.elements[k].kappa;
            let q = quad(mesh, k, primal.degrees.elem[k])?;
            let mut ep = 0.0;
            for (x, w) in q.points.iter().zip(&q.weights) {
                let g = prob.grad_u(*x, Side::None);
                let d = grad_pi(primal, k, *x);
                ep += w * kappa * ((g[0] - d[0]).powi(2) + (g[1] - d[1]).powi(2));
            }
            let mut em = 0.0;
            if let Some(fl) = flux {
                let loc = &fl.locals[k];
                let coeffs = match reading {
                    MixedErrorReading::Discrete => fl.pi_coeffs[k].clone(),
                    MixedErrorReading::ExactProjection => {
                        let dofs = local_flux_dofs(
                            mesh,
                            loc,
                            |x| {
                                let g = prob.grad_u(x, Side::None);
                                [-kappa * g[0], -kappa * g[1]]
                            },
                            |_| 0.0,
                        )?;
                        loc.project(&dofs)
                    }
                };
                for (x, w) in q.points.iter().zip(&q.weights) {
                    let g = prob.grad_u(*x, Side::None);
                    let s = loc.eval_grad_field(&coeffs, *x);
                    em += w / kappa * ((-kappa * g[0] - s[0]).powi(2) + (-kappa * g[1] - s[1]).powi(2));
                }
            }
            Ok((ep, em))
        })
        .collect::<Result<_>>()?;
    let primal_est = Estimate::from_squares(per.iter().map(|p| p.0).collect());
    let mixed_pair = flux.map(|_| Estimate::from_squares(per.iter().map(|p| p.0 + p.1).collect()));
    Ok(ApproxErrors {
        primal: primal_est,
        mixed_pair,
    })
}

/// Squared local hypercircle terms: ‖κ^{1/2}∇Π∇ũ_n + κ^{-1/2}Π⁰σ‖²_K plus
/// both stabilizations of the projection remainders.
pub fn hypercircle_terms(mesh: &PolyMesh, primal: &PrimalSolution, flux: &MixedSolution) -> Result<Vec<[f64; 3]>> {
    check_same(mesh, primal, flux)?;
    (0..mesh.n_elements())
        .into_par_iter()
        .map(|k| {
            let kappa = mesh.elements[k].kappa;
            let q = quad(mesh, k, primal.degrees.elem[k])?;
            let loc = &flux.locals[k];
            let mut norm = 0.0;
            for (x, w) in q.points.iter().zip(&q.weights) {
                let a = grad_pi(primal, k, *x);
                let s = loc.eval_grad_field(&flux.pi_coeffs[k], *x);
                let r = [kappa.sqrt() * a[0] + s[0] / kappa.sqrt(), kappa.sqrt() * a[1] + s[1] / kappa.sqrt()];
                norm += w * dot(r, r);
            }
            let sp = quad_form(&primal.locals[k].stab, &primal.local(k));
            let sm = quad_form(&loc.stab, &flux.local_flux(k));
            Ok([norm, sp, sm])
        })
        .collect()
}

fn check_same(mesh: &PolyMesh, primal: &PrimalSolution, flux: &MixedSolution) -> Result<()> {
    if primal.locals.len() != mesh.n_elements() || flux.locals.len() != mesh.n_elements() {
        return Err(Error::Precondition("solutions live on different meshes".into()));
    }
    if primal.locals.iter().zip(&flux.locals).any(|(a, b)| a.p != b.p) {
        return Err(Error::Precondition("solutions use different degrees".into()));
    }
    Ok(())
}

/// η_eq from the primal and mixed discrete solutions.
pub fn eta_eq(mesh: &PolyMesh, primal: &PrimalSolution, mixed: &MixedSolution) -> Result<Estimate> {
    let t = hypercircle_terms(mesh, primal, mixed)?;
    Ok(Estimate::from_squares(t.iter().map(|t| t[0] + t[1] + t[2]).collect()))
}

/// η_flux: the same local terms with the reconstructed flux; needs κ = 1.
pub fn eta_flux(mesh: &PolyMesh, primal: &PrimalSolution, reconstructed: &MixedSolution) -> Result<Estimate> {
    require_unit_kappa(mesh)?;
    eta_eq(mesh, primal, reconstructed)
}

pub(crate) fn require_unit_kappa(mesh: &PolyMesh) -> Result<()> {
    if mesh.elements.iter().any(|e| (e.kappa - 1.0).abs() > 1e-14) {
        return Err(Error::Precondition("κ must be 1".into()));
    }
    Ok(())
}

/// Residual estimator for κ = 1. Jumps are taken on every edge off the
/// Dirichlet boundary; on Neumann edges the jump is against g_N. For p = 1
/// the volume term uses the mean of f.
pub fn eta_res(mesh: &PolyMesh, primal: &PrimalSolution, prob: &dyn Problem) -> Result<Estimate> {
    require_unit_kappa(mesh)?;
    let sq: Vec<f64> = (0..mesh.n_elements())
        .into_par_iter()
        .map(|k| -> Result<f64> {
            let el = &mesh.elements[k];
            let loc = &primal.locals[k];
            let p = loc.p;
            let pf = p as f64;
            let h = el.diameter;
            let q = quad(mesh, k, p)?;
            // Π⁰_{max(p-2,0)} f.
            let low = Basis::new(loc.basis.center, loc.basis.h, p.saturating_sub(2));
            let nm = low.len();
            let mass = loc.mass.view((0, 0), (nm, nm)).into_owned();
            let mut b = crate::linalg::DenseMat::zeros(nm, 1);
            for (x, w) in q.points.iter().zip(&q.weights) {
                let fx = prob.f(*x);
                for (i, m) in low.eval(*x).iter().enumerate() {
                    b[(i, 0)] += w * fx * m;
                }
            }
            let pf_coeffs = crate::linalg::solve_dense(&mass, &b)?;
            let pf_coeffs: Vec<f64> = pf_coeffs.iter().copied().collect();
            let lap: Vec<f64> = {
                let mut c = vec![0.0; low.len()];
                for (alpha, coef) in primal.pi_coeffs[k].iter().enumerate() {
                    for (beta, l) in loc.basis.laplacian_coeffs(alpha) {
                        c[beta] += coef * l;
                    }
                }
                c
            };
            let mut vol = 0.0;
            for (x, w) in q.points.iter().zip(&q.weights) {
                let m = low.eval(*x);
                let r: f64 = m.iter().zip(lap.iter().zip(&pf_coeffs)).map(|(m, (l, f))| m * (l + f)).sum();
                vol += w * r * r;
            }
            let mut jump = 0.0;
            for (i, &e) in el.edges.iter().enumerate() {
                let edge = &mesh.edges[e];
                if edge.tag == EdgeTag::Dirichlet {
                    continue;
                }
                let (a, b) = mesh.edge_points(e);
                let pe = primal.degrees.edge[e];
                let nrm = [edge.normal[0] * el.edge_sign[i], edge.normal[1] * el.edge_sign[i]];
                for (x, w) in gauss(pe + 4).map_to_segment(a, b) {
                    let mine = dot(grad_pi(primal, k, x), nrm);
                    let other = match (edge.neighbors, edge.tag) {
                        ((n0, Some(n1)), _) => {
                            let nb = if n0 == k { n1 } else { n0 };
                            dot(grad_pi(primal, nb, x), nrm)
                        }
                        (_, EdgeTag::Neumann) => dot(prob.grad_u(x, edge.side), nrm),
                        _ => mine,
                    };
                    jump += w * (mine - other).powi(2);
                }
            }
            let s = quad_form(&loc.stab, &primal.local(k));
            Ok(h * h / (pf * pf) * vol + 0.5 * h / pf * jump + s)
        })
        .collect::<Result<_>>()?;
    Ok(Estimate::from_squares(sq))
}

/// sqrt Σ_K (h²/p²)‖f - div σ‖²_K.
pub fn oscillation(mesh: &PolyMesh, flux: &MixedSolution, prob: &dyn Problem) -> Result<f64> {
    let sq: Vec<f64> = (0..mesh.n_elements())
        .into_par_iter()
        .map(|k| -> Result<f64> {
            let loc = &flux.locals[k];
            let d = flux.divergence(k);
            let q = quad(mesh, k, loc.p)?;
            let mut s = 0.0;
            for (x, w) in q.points.iter().zip(&q.weights) {
                s += w * (prob.f(*x) - loc.eval_scalar(&d, *x)).powi(2);
            }
            let pf = loc.p as f64;
            Ok(loc.h * loc.h / (pf * pf) * s)
        })
        .collect::<Result<_>>()?;
    Ok(sq.iter().sum::<f64>().sqrt())
}

/// Largest relative defect of ∫_K div σ v = ∫_K f v over v ∈ P_{p-1}(K).
pub fn equilibration_defect(mesh: &PolyMesh, flux: &MixedSolution, prob: &dyn Problem) -> Result<f64> {
    let per: Vec<f64> = (0..mesh.n_elements())
        .into_par_iter()
        .map(|k| -> Result<f64> {
            let loc = &flux.locals[k];
            let sig = flux.local_flux(k);
            let lhs = crate::local::mat_vec(&loc.bdiv, &sig);
            let q = quad(mesh, k, loc.p)?;
            let mut rhs = vec![0.0; loc.n_scalar];
            let mut scale = 0.0;
            for (x, w) in q.points.iter().zip(&q.weights) {
                let fx = prob.f(*x);
                scale += w * fx * fx;
                for (r, m) in rhs.iter_mut().zip(loc.basis.eval(*x)) {
                    *r += w * fx * m;
                }
            }
            let defect = lhs.iter().zip(&rhs).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            let norm_m = (0..loc.n_scalar).map(|i| loc.mass_s[(i, i)].sqrt()).fold(0.0, f64::max);
            // size of the summed terms, so that f = 0 still gives a relative value
            let terms = (0..loc.bdiv.nrows())
                .map(|i| (0..sig.len()).map(|j| (loc.bdiv[(i, j)] * sig[j]).abs()).sum::<f64>())
                .fold(0.0, f64::max);
            Ok(defect / (scale.sqrt() * norm_m).max(terms).max(1e-300))
        })
        .collect::<Result<_>>()?;
    Ok(per.into_iter().fold(0.0, f64::max))
}

/// η / error, with +∞ when the error vanishes.
pub fn efficiency_index(eta: f64, err: f64) -> f64 {
    if err <= 1e-300 {
        f64::INFINITY
    } else {
        eta / err
    }
}

/// Everything estimated on one discretization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorReport {
    pub eta_eq: Option<Estimate>,
    pub eta_res: Option<Estimate>,
    pub eta_flux: Option<Estimate>,
    pub errors: ApproxErrors,
    pub i_eq: Option<f64>,
    pub i_res: Option<f64>,
    pub oscillation: Option<f64>,
    pub pou_quantity: Option<f64>,
}

impl EstimatorReport {
    pub fn new(errors: ApproxErrors) -> Self {
        Self {
            eta_eq: None,
            eta_res: None,
            eta_flux: None,
            errors,
            i_eq: None,
            i_res: None,
            oscillation: None,
            pou_quantity: None,
        }
    }

    /// Fill the efficiency indices from whatever is present.
    pub fn finish(mut self) -> Self {
        if let (Some(e), Some(m)) = (&self.eta_eq, &self.errors.mixed_pair) {
            self.i_eq = Some(efficiency_index(e.global, m.global));
        }
        if let Some(e) = &self.eta_res {
            self.i_res = Some(efficiency_index(e.global, self.errors.primal.global));
        }
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::degrees::DegreeMap;
    use crate::mesh::{build_mesh, Domain, Family};
    use crate::mixed::assemble_solve_mixed;
    use crate::primal::{assemble_solve_primal, StabVariant};
    use crate::problem::{CaseId, PolynomialProblem, TestCase};

    #[test]
    fn exact_polynomial_gives_zero() {
        let prob = PolynomialProblem::new(vec![(2, 0, 1.0), (1, 2, 0.5), (0, 3, -0.2)]);
        let mesh = build_mesh(Domain::UnitSquare, Family::Cartesian, 1).unwrap();
        let deg = DegreeMap::uniform(&mesh, 4).unwrap();
        let u = assemble_solve_primal(&mesh, &deg, &prob, StabVariant::DRecipe).unwrap();
        let s = assemble_solve_mixed(&mesh, &deg, &prob, StabVariant::DRecipe).unwrap();
        let eq = eta_eq(&mesh, &u, &s).unwrap().global;
        assert!(eq < 1e-7, "{eq}");
        let res = eta_res(&mesh, &u, &prob).unwrap().global;
        assert!(res < 1e-7, "{res}");
        let e = approx_errors(&mesh, &u, Some(&s), &prob, MixedErrorReading::Discrete).unwrap();
        assert!(e.primal.global < 1e-9 && e.mixed_pair.unwrap().global < 1e-9);
        assert!(oscillation(&mesh, &s, &prob).unwrap() < 1e-9);
    }

    #[test]
    fn global_is_root_sum_of_squares() {
        let e = Estimate::from_squares(vec![1.0, 4.0, 4.0]);
        assert_eq!(e.global, 3.0);
        assert_eq!(e.local, vec![1.0, 2.0, 2.0]);
        assert!((efficiency_index(2f64.sqrt(), 1.0) - 2f64.sqrt()).abs() < 1e-15);
        assert!(efficiency_index(1.0, 0.0).is_infinite());
    }

    #[test]
    fn tc3_mixed_divergence_is_projected_load() {
        let prob = TestCase::new(CaseId::Tc3);
        let mesh = build_mesh(Domain::UnitSquare, Family::StructuredTriangles, 1).unwrap();
        for p in 1..=3 {
            let deg = DegreeMap::uniform(&mesh, p).unwrap();
            let s = assemble_solve_mixed(&mesh, &deg, &prob, StabVariant::DRecipe).unwrap();
            assert!(equilibration_defect(&mesh, &s, &prob).unwrap() < 1e-9);
        }
    }
}
