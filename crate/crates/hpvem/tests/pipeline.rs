use hpvem::adaptivity::{drive, DriveConfig, EstimatorKind, Mode};
use hpvem::mesh::{build_mesh, dump_mesh, load_mesh, refine_elements, Domain, Family, RefineOptions};
use hpvem::problem::{CaseId, TestCase};
use hpvem::Error;

fn eoc(e: &[f64], h: &[f64]) -> Vec<f64> {
    e.windows(2).zip(h.windows(2)).map(|(e, h)| (e[0] / e[1]).ln() / (h[0] / h[1]).ln()).collect()
}

#[test]
fn uniform_rates_on_the_square() {
    let prob = TestCase::new(CaseId::Tc3);
    for p in 1..=3 {
        let mesh = build_mesh(Domain::UnitSquare, Family::Cartesian, 2).unwrap();
        let cfg = DriveConfig {
            p,
            iterations: 2,
            estimator: EstimatorKind::Flux,
            ..DriveConfig::default()
        };
        let t = drive(mesh, &prob, &cfg).unwrap();
        let h: Vec<f64> = t.records.iter().map(|r| r.h_max).collect();
        let rates = eoc(&t.errors(), &h);
        assert!((rates.last().unwrap() - p as f64).abs() < 0.15, "p {p}: {rates:?}");
        for r in &t.records {
            assert!(r.mixed_equilibration.unwrap() < 1e-9);
            assert!(r.flux_equilibration.unwrap() < 1e-9);
            assert!(r.eta_flux.unwrap() >= r.err_primal * 0.9);
        }
    }
}

#[test]
fn h_adaptive_lshape() {
    let prob = TestCase::new(CaseId::Tc1);
    let mesh = build_mesh(Domain::LShape, Family::Cartesian, 1).unwrap();
    let cfg = DriveConfig {
        mode: Mode::AdaptH,
        iterations: 4,
        ..DriveConfig::default()
    };
    let t = drive(mesh, &prob, &cfg).unwrap();
    assert_eq!(t.records.len(), 5);
    for w in t.records.windows(2) {
        assert!(w[1].ndof > w[0].ndof);
        assert!(w[1].err_mixed_pair.unwrap() < w[0].err_mixed_pair.unwrap());
        assert!(!w[0].marked.is_empty());
    }
    for r in &t.records {
        let i = r.i_eq.unwrap();
        assert!((0.8..=1.5).contains(&i), "{i}");
    }
}

#[test]
fn hp_adaptive_raises_degrees() {
    let prob = TestCase::new(CaseId::Tc2);
    let mesh = build_mesh(Domain::Slit, Family::Cartesian, 1).unwrap();
    let cfg = DriveConfig {
        mode: Mode::AdaptHp,
        iterations: 6,
        all_estimators: false,
        ..DriveConfig::default()
    };
    let t = drive(mesh, &prob, &cfg).unwrap();
    let last = t.records.last().unwrap();
    assert!(last.p_max > 1);
    assert!(t.records.iter().any(|r| !r.plan.h_set.is_empty()));
    assert!(last.err_mixed_pair.unwrap() < t.records[0].err_mixed_pair.unwrap());
}

#[test]
fn flux_estimator_needs_dirichlet_boundary() {
    let prob = TestCase::new(CaseId::Tc2);
    let mesh = build_mesh(Domain::Slit, Family::Cartesian, 1).unwrap();
    let cfg = DriveConfig {
        estimator: EstimatorKind::Flux,
        all_estimators: false,
        ..DriveConfig::default()
    };
    assert!(matches!(drive(mesh, &prob, &cfg), Err(Error::Precondition(_))));
}

#[test]
fn refined_mesh_survives_text_roundtrip() {
    let mesh = build_mesh(Domain::Slit, Family::StructuredTriangles, 1).unwrap();
    let marked = [0, 3, 5].into_iter().collect();
    let mesh = refine_elements(&mesh, &marked, &RefineOptions::default()).unwrap();
    let text = dump_mesh(&mesh);
    let back = load_mesh(&text).unwrap();
    assert_eq!(dump_mesh(&back), text);
    assert_eq!(back.n_edges(), mesh.n_edges());
}
