//! Run configuration and the starting meshes.

use std::path::PathBuf;

use serde::Serialize;

use hpvem::adaptivity::{DriveConfig, EstimatorKind, HpParams, Mode, Threshold};
use hpvem::degrees::MAX_DEGREE;
use hpvem::mesh::{build_mesh, zigzag_mesh, Domain, Family, PolyMesh};
use hpvem::primal::StabVariant;
use hpvem::problem::{CaseId, Problem, TestCase};
use hpvem::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum MeshKind {
    Cartesian,
    Triangular,
    /// The 8-element mesh of the unit square with 4 nonconvex elements.
    Nonconvex,
}

impl MeshKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "cartesian" => Ok(MeshKind::Cartesian),
            "triangular" => Ok(MeshKind::Triangular),
            "nonconvex" => Ok(MeshKind::Nonconvex),
            _ => Err(Error::Config(format!("unknown mesh {s}"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            MeshKind::Cartesian => "cartesian",
            MeshKind::Triangular => "triangular",
            MeshKind::Nonconvex => "nonconvex",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub case: CaseId,
    pub mesh: MeshKind,
    /// Starting level; `None` picks the coarse mesh of the case.
    pub level: Option<u32>,
    pub p: usize,
    pub mode: Mode,
    pub estimator: EstimatorKind,
    pub stab: StabVariant,
    /// Number of solves, one CSV row each.
    pub iters: usize,
    pub sigma: f64,
    pub threshold: Threshold,
    pub out: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            case: CaseId::Tc3,
            mesh: MeshKind::Triangular,
            level: None,
            p: 1,
            mode: Mode::Uniform,
            estimator: EstimatorKind::Eq,
            stab: StabVariant::DRecipe,
            iters: 1,
            sigma: 1.0,
            threshold: Threshold::Mean,
            out: PathBuf::from("out"),
        }
    }
}

impl RunConfig {
    pub fn problem(&self) -> TestCase {
        TestCase::new(self.case)
    }

    /// Coarse level: the 12-element L-shape, 16 squares on the slit domain,
    /// 4×4 squares on the unit square, level 1 for triangles.
    pub fn start_level(&self) -> u32 {
        self.level.unwrap_or(match (self.mesh, self.problem().domain()) {
            (MeshKind::Cartesian, Domain::UnitSquare) => 2,
            _ => 1,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=MAX_DEGREE).contains(&self.p) {
            return Err(Error::Degree(self.p));
        }
        if !(self.sigma > 0.0 && self.sigma <= 1.0) {
            return Err(Error::Config(format!("sigma {} outside (0, 1]", self.sigma)));
        }
        let domain = self.problem().domain();
        if self.mesh == MeshKind::Nonconvex && domain != Domain::UnitSquare {
            return Err(Error::Config("the nonconvex mesh covers the unit square only".into()));
        }
        if matches!(self.mode, Mode::AdaptH | Mode::AdaptHp) && self.mesh == MeshKind::Nonconvex {
            return Err(Error::Config("adaptive runs need a Cartesian or triangular start".into()));
        }
        if self.estimator == EstimatorKind::Flux && domain == Domain::Slit {
            return Err(Error::Config("the flux estimator needs a pure Dirichlet boundary".into()));
        }
        Ok(())
    }

    pub fn initial_mesh(&self) -> Result<PolyMesh> {
        let domain = self.problem().domain();
        match self.mesh {
            MeshKind::Nonconvex => Ok(zigzag_mesh()),
            MeshKind::Cartesian => build_mesh(domain, Family::Cartesian, self.start_level()),
            MeshKind::Triangular => build_mesh(domain, Family::StructuredTriangles, self.start_level()),
        }
    }

    pub fn drive_config(&self) -> DriveConfig {
        DriveConfig {
            mode: self.mode,
            estimator: self.estimator,
            stab: self.stab,
            p: self.p,
            iterations: self.iters.saturating_sub(1),
            sigma: self.sigma,
            threshold: self.threshold,
            hp: HpParams::default(),
            ..DriveConfig::default()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coarse_meshes() {
        let cfg = RunConfig {
            case: CaseId::Tc1,
            mesh: MeshKind::Cartesian,
            ..RunConfig::default()
        };
        assert_eq!(cfg.initial_mesh().unwrap().n_elements(), 12);
        let cfg = RunConfig {
            case: CaseId::Tc3,
            mesh: MeshKind::Cartesian,
            ..RunConfig::default()
        };
        assert_eq!(cfg.initial_mesh().unwrap().n_elements(), 16);
        let cfg = RunConfig {
            case: CaseId::Smooth,
            mesh: MeshKind::Nonconvex,
            ..RunConfig::default()
        };
        assert_eq!(cfg.initial_mesh().unwrap().n_elements(), 8);
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(RunConfig { p: 7, ..RunConfig::default() }.validate().is_err());
        assert!(RunConfig {
            case: CaseId::Tc1,
            mesh: MeshKind::Nonconvex,
            ..RunConfig::default()
        }
        .validate()
        .is_err());
        assert!(RunConfig {
            case: CaseId::Tc2,
            estimator: EstimatorKind::Flux,
            ..RunConfig::default()
        }
        .validate()
        .is_err());
        assert!(RunConfig::default().validate().is_ok());
    }

    #[test]
    fn iteration_count_is_solves() {
        let cfg = RunConfig {
            iters: 4,
            ..RunConfig::default()
        };
        assert_eq!(cfg.drive_config().iterations, 3);
        let cfg = RunConfig {
            iters: 0,
            ..RunConfig::default()
        };
        assert_eq!(cfg.drive_config().iterations, 0);
    }
}
