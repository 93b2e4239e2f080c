//! Marking, the h-or-p decision and the SOLVE → ESTIMATE → MARK → REFINE loop.

use std::collections::BTreeSet;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::degrees::DegreeMap;
use crate::error::{Error, Result};
use crate::estimators::{approx_errors, equilibration_defect, eta_eq, eta_res, oscillation, EstimatorReport, MixedErrorReading};
use crate::flux::{diagnostics, reconstruct_flux};
use crate::mesh::{child_parents, refine_elements, validate, EdgeTag, ElementKind, PolyMesh, RefineOptions};
use crate::mixed::{assemble_solve_mixed, MixedSolution};
use crate::primal::{assemble_solve_primal, StabVariant};
use crate::problem::Problem;

/// Reference value η̄ of the marking rule η_K ≥ σ η̄.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Threshold {
    /// η / card(T_n) with η = (Σ η_K²)^{1/2}.
    GlobalOverCount,
    /// Σ η_K / card(T_n).
    Mean,
    /// (Σ η_K² / card(T_n))^{1/2}.
    RootMeanSquare,
}

impl Threshold {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "global_over_count" => Ok(Threshold::GlobalOverCount),
            "mean" => Ok(Threshold::Mean),
            "rms" | "root_mean_square" => Ok(Threshold::RootMeanSquare),
            _ => Err(Error::Config(format!("unknown marking threshold {s}"))),
        }
    }

    pub fn value(self, eta_local: &[f64]) -> f64 {
        let n = eta_local.len() as f64;
        let sq = eta_local.iter().map(|e| e * e).sum::<f64>();
        match self {
            Threshold::GlobalOverCount => sq.sqrt() / n,
            Threshold::Mean => eta_local.iter().sum::<f64>() / n,
            Threshold::RootMeanSquare => (sq / n).sqrt(),
        }
    }
}

/// Elements with η_K ≥ σ η̄.
pub fn mark(eta_local: &[f64], sigma: f64, threshold: Threshold) -> Result<BTreeSet<usize>> {
    if eta_local.is_empty() {
        return Err(Error::Precondition("no element estimators to mark".into()));
    }
    if !(sigma > 0.0 && sigma <= 1.0) {
        return Err(Error::Config(format!("marking parameter {sigma} outside (0, 1]")));
    }
    let bar = sigma * threshold.value(eta_local);
    Ok(eta_local.iter().enumerate().filter(|(_, &e)| e >= bar).map(|(k, _)| k).collect())
}

/// Constants of the predicted-error hp decision.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HpParams {
    pub lambda: f64,
    pub gamma_h: f64,
    pub gamma_p: f64,
    pub gamma_n: f64,
    /// Elements already at this degree are h-refined instead.
    pub p_max: usize,
}

impl Default for HpParams {
    fn default() -> Self {
        Self {
            lambda: 0.2,
            gamma_h: 1.0,
            gamma_p: 1.0,
            gamma_n: 1.0,
            p_max: 6,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RefinePlan {
    pub h_set: BTreeSet<usize>,
    pub p_set: BTreeSet<usize>,
}

/// Split the marked set and update the squared predictions.
///
/// The returned vector holds, per current element, its new prediction, or
/// the prediction each of its children inherits when it is h-refined.
/// Marked elements that can be neither split nor raised are left alone.
pub fn hp_decide(mesh: &PolyMesh, degrees: &[usize], eta_sq: &[f64], pred_sq: &[f64], marked: &BTreeSet<usize>, params: &HpParams) -> (RefinePlan, Vec<f64>) {
    let mut plan = RefinePlan::default();
    let mut next: Vec<f64> = pred_sq.iter().map(|p| params.gamma_n * p).collect();
    for &k in marked {
        let p = degrees[k];
        let splittable = mesh.elements[k].kind != ElementKind::Generic;
        let smooth = eta_sq[k] <= pred_sq[k];
        let raise = p < params.p_max && (smooth || !splittable);
        if raise {
            plan.p_set.insert(k);
            next[k] = params.gamma_p * params.lambda * eta_sq[k];
        } else if splittable {
            plan.h_set.insert(k);
            next[k] = params.gamma_h * 0.5f64.powi(2 * p as i32) * eta_sq[k] / 4.0;
        }
    }
    (plan, next)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// Every element h-refined each step.
    Uniform,
    AdaptH,
    AdaptHp,
    /// Degree raised by one everywhere each step, mesh fixed.
    PSweep,
}

impl Mode {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(Mode::Uniform),
            "adapt-h" => Ok(Mode::AdaptH),
            "adapt-hp" => Ok(Mode::AdaptHp),
            "p-sweep" => Ok(Mode::PSweep),
            _ => Err(Error::Config(format!("unknown mode {s}"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Mode::Uniform => "uniform",
            Mode::AdaptH => "adapt-h",
            Mode::AdaptHp => "adapt-hp",
            Mode::PSweep => "p-sweep",
        }
    }
}

/// Estimator driving the marking.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EstimatorKind {
    Eq,
    Res,
    Flux,
}

impl EstimatorKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "eq" => Ok(EstimatorKind::Eq),
            "res" => Ok(EstimatorKind::Res),
            "flux" => Ok(EstimatorKind::Flux),
            _ => Err(Error::Config(format!("unknown estimator {s}"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            EstimatorKind::Eq => "eq",
            EstimatorKind::Res => "res",
            EstimatorKind::Flux => "flux",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriveConfig {
    pub mode: Mode,
    pub estimator: EstimatorKind,
    pub stab: StabVariant,
    /// Starting degree.
    pub p: usize,
    /// Number of refinement steps; the trace holds one more record.
    pub iterations: usize,
    pub sigma: f64,
    pub threshold: Threshold,
    pub hp: HpParams,
    #[serde(skip, default)]
    pub refine: RefineOptions,
    pub reading: MixedErrorReading,
    /// Also compute the estimators that do not drive the marking, where
    /// their assumptions hold.
    pub all_estimators: bool,
    /// Stop early once a solve reaches this many degrees of freedom.
    pub max_ndof: Option<usize>,
}

impl Default for DriveConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Uniform,
            estimator: EstimatorKind::Eq,
            stab: StabVariant::DRecipe,
            p: 1,
            iterations: 0,
            sigma: 1.0,
            threshold: Threshold::Mean,
            hp: HpParams::default(),
            refine: RefineOptions::default(),
            reading: MixedErrorReading::Discrete,
            all_estimators: true,
            max_ndof: None,
        }
    }
}

/// Per-element data of one iteration.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ElementArrays {
    pub degree: Vec<usize>,
    pub diameter: Vec<f64>,
    pub err_primal: Vec<f64>,
    pub eta_eq: Option<Vec<f64>>,
    pub eta_res: Option<Vec<f64>>,
    pub eta_flux: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iter: usize,
    pub ndof: usize,
    pub n_elements: usize,
    pub h_max: f64,
    pub p_min: usize,
    pub p_max: usize,
    pub err_primal: f64,
    pub err_mixed_pair: Option<f64>,
    pub eta_eq: Option<f64>,
    pub eta_res: Option<f64>,
    pub eta_flux: Option<f64>,
    pub i_eq: Option<f64>,
    pub i_res: Option<f64>,
    pub oscillation: Option<f64>,
    pub pou_quantity: Option<f64>,
    /// Largest relative defect of ∫_K div σ v = ∫_K f v for the mixed solution.
    pub mixed_equilibration: Option<f64>,
    /// Same for the reconstructed flux.
    pub flux_equilibration: Option<f64>,
    pub wall_ms: f64,
    pub marked: Vec<usize>,
    pub plan: RefinePlan,
    pub elements: ElementArrays,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveTrace {
    pub records: Vec<IterationRecord>,
}

impl AdaptiveTrace {
    pub fn errors(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.err_primal).collect()
    }

    pub fn ndofs(&self) -> Vec<usize> {
        self.records.iter().map(|r| r.ndof).collect()
    }
}

fn unit_kappa(mesh: &PolyMesh) -> bool {
    mesh.elements.iter().all(|e| (e.kappa - 1.0).abs() <= 1e-14)
}

fn flux_applicable(mesh: &PolyMesh) -> bool {
    unit_kappa(mesh) && mesh.edges.iter().all(|e| e.tag != EdgeTag::Neumann)
}

/// Solve and estimate on one discretization; returns the record (without
/// marking data) and the local values of the driving estimator.
pub fn solve_estimate(mesh: &PolyMesh, deg: &DegreeMap, prob: &dyn Problem, cfg: &DriveConfig, iter: usize) -> Result<(IterationRecord, Vec<f64>)> {
    let start = Instant::now();
    let all = cfg.all_estimators;
    let want_eq = cfg.estimator == EstimatorKind::Eq || all;
    let want_res = cfg.estimator == EstimatorKind::Res || (all && unit_kappa(mesh));
    let want_flux = cfg.estimator == EstimatorKind::Flux || (all && flux_applicable(mesh));

    let primal = assemble_solve_primal(mesh, deg, prob, cfg.stab)?;
    let mixed: Option<MixedSolution> = if want_eq {
        Some(assemble_solve_mixed(mesh, deg, prob, cfg.stab)?)
    } else {
        None
    };
    let errors = approx_errors(mesh, &primal, mixed.as_ref(), prob, cfg.reading)?;
    let mut report = EstimatorReport::new(errors);
    let mut arrays = ElementArrays {
        degree: deg.elem.clone(),
        diameter: mesh.elements.iter().map(|e| e.diameter).collect(),
        err_primal: report.errors.primal.local.clone(),
        ..ElementArrays::default()
    };
    let mut mixed_equilibration = None;
    let mut flux_equilibration = None;
    if let Some(m) = &mixed {
        let e = eta_eq(mesh, &primal, m)?;
        arrays.eta_eq = Some(e.local.clone());
        report.eta_eq = Some(e);
        report.oscillation = Some(oscillation(mesh, m, prob)?);
        mixed_equilibration = Some(equilibration_defect(mesh, m, prob)?);
    }
    if want_res {
        let e = eta_res(mesh, &primal, prob)?;
        arrays.eta_res = Some(e.local.clone());
        report.eta_res = Some(e);
    }
    if want_flux {
        let rec = reconstruct_flux(mesh, &primal, prob, cfg.stab)?;
        let d = diagnostics(mesh, &primal, &rec, prob)?;
        arrays.eta_flux = Some(d.eta_flux.local.clone());
        report.eta_flux = Some(d.eta_flux);
        report.oscillation = Some(d.oscillation);
        report.pou_quantity = Some(d.pou_quantity);
        flux_equilibration = Some(equilibration_defect(mesh, &rec.sigma, prob)?);
    }
    let report = report.finish();
    let driving = match cfg.estimator {
        EstimatorKind::Eq => report.eta_eq.as_ref(),
        EstimatorKind::Res => report.eta_res.as_ref(),
        EstimatorKind::Flux => report.eta_flux.as_ref(),
    }
    .map(|e| e.local.clone())
    .ok_or_else(|| Error::Precondition(format!("estimator {} unavailable", cfg.estimator.name())))?;
    let record = IterationRecord {
        iter,
        ndof: primal.n_dofs(),
        n_elements: mesh.n_elements(),
        h_max: mesh.h_max(),
        p_min: deg.p_min(),
        p_max: deg.p_max(),
        err_primal: report.errors.primal.global,
        err_mixed_pair: report.errors.mixed_pair.as_ref().map(|e| e.global),
        eta_eq: report.eta_eq.as_ref().map(|e| e.global),
        eta_res: report.eta_res.as_ref().map(|e| e.global),
        eta_flux: report.eta_flux.as_ref().map(|e| e.global),
        i_eq: report.i_eq,
        i_res: report.i_res,
        oscillation: report.oscillation,
        pou_quantity: report.pou_quantity,
        mixed_equilibration,
        flux_equilibration,
        wall_ms: start.elapsed().as_secs_f64() * 1e3,
        marked: Vec::new(),
        plan: RefinePlan::default(),
        elements: arrays,
    };
    Ok((record, driving))
}

/// Run the adaptive loop from `mesh`; `iterations` refinement steps.
pub fn drive(mesh: PolyMesh, prob: &dyn Problem, cfg: &DriveConfig) -> Result<AdaptiveTrace> {
    drive_with(mesh, prob, cfg, |_| {})
}

/// Refine `h_set`, adding unrefined elements that would break the
/// shape-regularity bounds (typically a coarse neighbor collecting hanging
/// nodes) until the result is admissible.
pub fn refine_closed(mesh: &PolyMesh, h_set: &mut BTreeSet<usize>, opts: &RefineOptions) -> Result<PolyMesh> {
    loop {
        let out = refine_elements(mesh, h_set, &RefineOptions::unchecked())?;
        if !opts.enforce {
            return Ok(out);
        }
        let report = validate(&out, opts.gamma, opts.gamma_tilde);
        if report.failing.is_empty() {
            return Ok(out);
        }
        let parents = child_parents(mesh, h_set);
        let mut grew = false;
        for &k in &report.failing {
            let pk = parents[k];
            if mesh.elements[pk].kind != ElementKind::Generic && h_set.insert(pk) {
                grew = true;
            }
        }
        if !grew {
            let k = report.failing[0];
            return Err(Error::Refinement(
                k,
                format!("result violates shape regularity (gamma {}, gamma_tilde {})", opts.gamma, opts.gamma_tilde),
            ));
        }
    }
}

/// As `drive`, calling `on_record` after every solve.
pub fn drive_with(mut mesh: PolyMesh, prob: &dyn Problem, cfg: &DriveConfig, mut on_record: impl FnMut(&IterationRecord)) -> Result<AdaptiveTrace> {
    let mut deg = DegreeMap::uniform(&mesh, cfg.p)?;
    let mut pred_sq = vec![0.0; mesh.n_elements()];
    let mut trace = AdaptiveTrace::default();
    for iter in 0..=cfg.iterations {
        let start = Instant::now();
        let (mut record, eta) = solve_estimate(&mesh, &deg, prob, cfg, iter)?;
        if iter == cfg.iterations || cfg.max_ndof.is_some_and(|m| record.ndof >= m) {
            on_record(&record);
            trace.records.push(record);
            break;
        }
        let (plan, next_pred) = match cfg.mode {
            Mode::Uniform => {
                let all: BTreeSet<usize> = (0..mesh.n_elements()).collect();
                record.marked = all.iter().copied().collect();
                (
                    RefinePlan {
                        h_set: all,
                        p_set: BTreeSet::new(),
                    },
                    pred_sq.clone(),
                )
            }
            Mode::PSweep => {
                let all: BTreeSet<usize> = (0..mesh.n_elements()).collect();
                record.marked = all.iter().copied().collect();
                (
                    RefinePlan {
                        h_set: BTreeSet::new(),
                        p_set: all,
                    },
                    pred_sq.clone(),
                )
            }
            Mode::AdaptH => {
                let marked = mark(&eta, cfg.sigma, cfg.threshold)?;
                record.marked = marked.iter().copied().collect();
                (
                    RefinePlan {
                        h_set: marked,
                        p_set: BTreeSet::new(),
                    },
                    pred_sq.clone(),
                )
            }
            Mode::AdaptHp => {
                let marked = mark(&eta, cfg.sigma, cfg.threshold)?;
                record.marked = marked.iter().copied().collect();
                let eta_sq: Vec<f64> = eta.iter().map(|e| e * e).collect();
                hp_decide(&mesh, &deg.elem, &eta_sq, &pred_sq, &marked, &cfg.hp)
            }
        };
        let mut plan = plan;
        let refined = if plan.h_set.is_empty() {
            None
        } else {
            Some(refine_closed(&mesh, &mut plan.h_set, &cfg.refine)?)
        };
        plan.p_set.retain(|k| !plan.h_set.contains(k));
        let mut p_elem = deg.elem.clone();
        for &k in &plan.p_set {
            p_elem[k] += 1;
        }
        let (new_mesh, parents) = match refined {
            None => (mesh, (0..p_elem.len()).collect::<Vec<_>>()),
            Some(out) => {
                let parents = child_parents(&mesh, &plan.h_set);
                (out, parents)
            }
        };
        mesh = new_mesh;
        deg = DegreeMap::new(&mesh, parents.iter().map(|&k| p_elem[k]).collect())?;
        pred_sq = parents.iter().map(|&k| next_pred[k]).collect();
        record.plan = plan;
        record.wall_ms = start.elapsed().as_secs_f64() * 1e3;
        on_record(&record);
        trace.records.push(record);
    }
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_mesh, Domain, Family};

    #[test]
    fn mark_threshold() {
        let eta = [0.1, 0.5, 0.2, 0.05];
        let g = eta.iter().map(|e| e * e).sum::<f64>().sqrt();
        let brute = |bar: f64| (0..4).filter(|&k| eta[k] >= bar).collect::<BTreeSet<usize>>();
        assert_eq!(mark(&eta, 1.0, Threshold::GlobalOverCount).unwrap(), brute(g / 4.0));
        assert_eq!(mark(&eta, 1.0, Threshold::Mean).unwrap(), brute(0.85 / 4.0));
        assert_eq!(mark(&eta, 0.5, Threshold::RootMeanSquare).unwrap(), brute(0.5 * g / 2.0));
        for t in [Threshold::GlobalOverCount, Threshold::Mean, Threshold::RootMeanSquare] {
            assert_eq!(mark(&[0.0, 1.0, 0.0], 1.0, t).unwrap(), BTreeSet::from([1]));
        }
        assert!(mark(&[], 1.0, Threshold::Mean).is_err());
        assert!(mark(&[1.0], 0.0, Threshold::Mean).is_err());
    }

    #[test]
    fn first_pass_is_pure_h() {
        let mesh = build_mesh(Domain::UnitSquare, Family::Cartesian, 1).unwrap();
        let marked = BTreeSet::from([0, 2]);
        let (plan, next) = hp_decide(&mesh, &[2; 4], &[1.0, 0.5, 0.25, 0.1], &[0.0; 4], &marked, &HpParams::default());
        assert_eq!(plan.h_set, marked);
        assert!(plan.p_set.is_empty());
        assert!((next[0] - 1.0 / 16.0 / 4.0).abs() < 1e-15);
        assert_eq!(next[1], 0.0);
    }

    #[test]
    fn smooth_element_is_raised_again() {
        let mesh = build_mesh(Domain::UnitSquare, Family::Cartesian, 0).unwrap();
        let params = HpParams::default();
        let marked = BTreeSet::from([0]);
        let (plan, next) = hp_decide(&mesh, &[3], &[0.19], &[0.2], &marked, &params);
        assert_eq!(plan.p_set, marked);
        assert!((next[0] - 0.2 * 0.19).abs() < 1e-15);
        let (plan, _) = hp_decide(&mesh, &[3], &[0.05], &next, &marked, &params);
        assert_eq!(plan.h_set, marked);
        let (plan, _) = hp_decide(&mesh, &[6], &[0.01], &[1.0], &marked, &params);
        assert_eq!(plan.h_set, marked);
    }
}
