//! Acceptance run: one PASS/FAIL line per criterion.
//!
//! Criteria listed in KNOWN_GAPS are printed like the others but do not fail
//! the target; any other failure does. A known gap that passes is reported.

use std::collections::BTreeSet;
use std::process::ExitCode;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};

use hpvem::adaptivity::{drive, solve_estimate, DriveConfig, EstimatorKind, IterationRecord, Mode};
use hpvem::degrees::DegreeMap;
use hpvem::estimators::{approx_errors, MixedErrorReading};
use hpvem::flux::{build_pou, reconstruct_flux};
use hpvem::local::{mat_vec, quad_form};
use hpvem::mesh::{build_mesh, zigzag_mesh, BoundaryRule, Domain, Family, PolyMesh, Side};
use hpvem::mixed::{assemble_solve_mixed, infsup_constant, local_flux_dofs, MixedLocalMats};
use hpvem::poly::{lobatto, PolygonQuadrature};
use hpvem::primal::{assemble_solve_primal, PrimalLocalMats, StabVariant};
use hpvem::problem::{CaseId, PolynomialProblem, Problem, TestCase};
use hpvem::{Basis, Point};
use hpvem_cli::tables::{self, Computed, ReproReport};

const KNOWN_GAPS: &[usize] = &[3, 7, 10];

const EQUILIBRATION_TOL: f64 = 1e-9;
const PROJECTOR_TOL: f64 = 1e-9;

struct Outcome {
    id: usize,
    title: &'static str,
    pass: bool,
    detail: String,
}

fn outcome(id: usize, title: &'static str, pass: bool, detail: String) -> Outcome {
    Outcome { id, title, pass, detail }
}

fn repro(id: &str) -> (ReproReport, Computed) {
    let (report, computed) = tables::repro(id).unwrap_or_else(|e| panic!("table {id}: {e}"));
    print!(
        "{}",
        report
            .render()
            .lines()
            .filter(|l| !l.ends_with(" ok"))
            .map(|l| format!("    {l}\n"))
            .collect::<String>()
    );
    (report, computed)
}

fn failures(r: &ReproReport) -> String {
    let off: Vec<String> = r
        .cells
        .iter()
        .filter(|c| !c.flagged && !c.pass)
        .map(|c| format!("row {} {} {:.1}%", c.row + 1, c.column, 100.0 * c.rel_diff))
        .chain(r.checks.iter().filter(|c| !c.pass).map(|c| c.name.clone()))
        .collect();
    if off.is_empty() {
        "all cells and checks within tolerance".into()
    } else {
        format!("off: {}", off.join(", "))
    }
}

fn fmt_seq(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.4}")).collect::<Vec<_>>().join(" ")
}

fn strictly_decreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] < w[0])
}

// ---- criteria 1-6: printed tables ----

fn criterion_1(eq: &mut Vec<f64>) -> Outcome {
    let (r, c) = repro("tri-p1");
    eq.extend(&c.equilibration);
    let pass = r.pass() && r.seconds < 30.0;
    outcome(1, "p=1 triangular table", pass, format!("{} in {:.1} s (limit 30 s)", failures(&r), r.seconds))
}

fn criterion_2(eq: &mut Vec<f64>) -> Outcome {
    let (r, c) = repro("cart-p1");
    eq.extend(&c.equilibration);
    outcome(2, "p=1 Cartesian table", r.pass(), failures(&r))
}

fn criterion_3(eq: &mut Vec<f64>) -> Outcome {
    let mut pass = true;
    let mut detail = Vec::new();
    for id in ["tri-p2", "cart-p2"] {
        let (r, c) = repro(id);
        eq.extend(&c.equilibration);
        pass &= r.pass();
        detail.push(format!("{id}: {} (ratios {})", failures(&r), fmt_seq(&c.columns["ratio"])));
    }
    outcome(3, "p=2 tables", pass, detail.join("; "))
}

type Bookkeeping = (usize, usize, Vec<usize>, Vec<usize>, Vec<usize>, u64, Option<u64>);

fn bookkeeping(r: &IterationRecord) -> Bookkeeping {
    (
        r.ndof,
        r.n_elements,
        r.marked.clone(),
        r.plan.h_set.iter().copied().collect(),
        r.plan.p_set.iter().copied().collect(),
        r.err_primal.to_bits(),
        r.eta_flux.map(f64::to_bits),
    )
}

fn criterion_4(eq: &mut Vec<f64>) -> Outcome {
    let (r, c) = repro("adaptive");
    eq.extend(&c.equilibration);
    let errors_ok = r.cells.iter().filter(|c| c.column == "error").all(|c| c.pass || c.flagged);
    let again = tables::compute(&tables::find("adaptive").unwrap()).unwrap();
    let a: Vec<_> = c.records.iter().map(bookkeeping).collect();
    let b: Vec<_> = again.records.iter().map(bookkeeping).collect();
    let deterministic = a == b;
    let rows = c.records.len();
    outcome(
        4,
        "adaptive table",
        errors_ok && deterministic && rows == 8,
        format!(
            "{rows} rows, errors {}, rerun bookkeeping {}; other columns: {}",
            if errors_ok { "within 5%" } else { "off" },
            if deterministic { "identical" } else { "differs" },
            failures(&r)
        ),
    )
}

fn criterion_5(eq: &mut Vec<f64>) -> Outcome {
    let mut pass = true;
    let mut detail = Vec::new();
    for id in ["global-p2", "global-p3"] {
        let (r, c) = repro(id);
        eq.extend(&c.equilibration);
        pass &= r.pass();
        detail.push(format!("{id}: {}", failures(&r)));
    }
    outcome(5, "global-variant table", pass, detail.join("; "))
}

fn criterion_6(eq: &[f64]) -> Outcome {
    let worst = eq.iter().copied().fold(0.0, f64::max);
    let pass = !eq.is_empty() && eq.iter().all(|d| d.is_finite()) && worst <= EQUILIBRATION_TOL;
    outcome(
        6,
        "equilibration identities",
        pass,
        format!("{} fluxes, worst relative defect {worst:.2e} (limit {EQUILIBRATION_TOL:.0e})", eq.len()),
    )
}

// ---- criterion 7: p-robustness on the L-shape ----

fn criterion_7() -> Outcome {
    let start = Instant::now();
    let prob = TestCase::new(CaseId::Tc1);
    let mesh = build_mesh(Domain::LShape, Family::Cartesian, 1).unwrap();
    let mut i_eq = Vec::new();
    let mut i_res = Vec::new();
    for p in 1..=6 {
        let deg = DegreeMap::uniform(&mesh, p).unwrap();
        let cfg = DriveConfig { p, ..DriveConfig::default() };
        let (r, _) = solve_estimate(&mesh, &deg, &prob, &cfg, 0).unwrap();
        i_eq.push(r.i_eq.unwrap());
        i_res.push(r.i_res.unwrap());
    }
    let secs = start.elapsed().as_secs_f64();
    let eq_ok = i_eq.iter().all(|i| (0.8..=1.5).contains(i));
    let res_ok = i_res.windows(2).all(|w| w[1] > w[0]);
    outcome(
        7,
        "p-robustness of eta_eq",
        mesh.n_elements() == 12 && eq_ok && res_ok && secs < 120.0,
        format!(
            "I_eq {} ({}), I_res {} ({}), {secs:.1} s",
            fmt_seq(&i_eq),
            if eq_ok { "in [0.8, 1.5]" } else { "outside [0.8, 1.5]" },
            fmt_seq(&i_res),
            if res_ok { "increasing" } else { "not increasing" }
        ),
    )
}

// ---- criterion 8: mixed stabilizations on the nonconvex mesh ----

/// ‖σ - Π⁰_p σ_n‖ with σ = -∇u (κ = 1), by quadrature.
fn mixed_error(mesh: &PolyMesh, prob: &dyn Problem, sol: &hpvem::mixed::MixedSolution) -> f64 {
    let mut e = 0.0;
    for k in 0..mesh.n_elements() {
        let loc = &sol.locals[k];
        let q = PolygonQuadrature::new(&mesh.element_points(k), 2 * loc.p + 8).unwrap();
        for (x, w) in q.points.iter().zip(&q.weights) {
            let g = prob.grad_u(*x, Side::None);
            let s = loc.eval_grad_field(&sol.pi_coeffs[k], *x);
            e += w * ((g[0] + s[0]).powi(2) + (g[1] + s[1]).powi(2));
        }
    }
    e.sqrt()
}

fn criterion_8() -> Outcome {
    let prob = TestCase::new(CaseId::Smooth);
    let mesh = zigzag_mesh();
    let mut curves = [Vec::new(), Vec::new()];
    let mut pairs = [Vec::new(), Vec::new()];
    for p in 1..=5 {
        let deg = DegreeMap::uniform(&mesh, p).unwrap();
        let primal = assemble_solve_primal(&mesh, &deg, &prob, StabVariant::DRecipe).unwrap();
        for (i, v) in [StabVariant::Theoretical, StabVariant::DRecipe].into_iter().enumerate() {
            let m = assemble_solve_mixed(&mesh, &deg, &prob, v).unwrap();
            curves[i].push(mixed_error(&mesh, &prob, &m));
            let e = approx_errors(&mesh, &primal, Some(&m), &prob, MixedErrorReading::Discrete).unwrap();
            pairs[i].push(e.mixed_pair.unwrap().global);
        }
    }
    let ratio: Vec<f64> = curves[0].iter().zip(&curves[1]).map(|(a, b)| (a / b).max(b / a)).collect();
    let within = ratio.iter().all(|r| *r <= 2.0);
    let mono = curves.iter().all(|c| strictly_decreasing(c)) && pairs.iter().all(|c| strictly_decreasing(c));
    outcome(
        8,
        "stabilization equivalence",
        mesh.n_elements() == 8 && within && mono,
        format!(
            "mixed error theoretical {} / D-recipe {}, max ratio {:.3}, {}",
            curves[0].iter().map(|x| format!("{x:.3e}")).collect::<Vec<_>>().join(" "),
            curves[1].iter().map(|x| format!("{x:.3e}")).collect::<Vec<_>>().join(" "),
            ratio.iter().copied().fold(0.0, f64::max),
            if mono { "both decreasing" } else { "not monotone" }
        ),
    )
}

// ---- criterion 9: inf-sup constant ----

fn criterion_9() -> Outcome {
    let mesh = build_mesh(Domain::UnitSquare, Family::Cartesian, 1).unwrap();
    let mut pass = mesh.n_elements() == 4;
    let mut detail = Vec::new();
    for v in [StabVariant::DRecipe, StabVariant::Theoretical] {
        let b: Vec<f64> = (1..=4)
            .map(|p| infsup_constant(&mesh, &DegreeMap::uniform(&mesh, p).unwrap(), v, 5000).unwrap())
            .collect();
        let hi = b.iter().copied().fold(0.0, f64::max);
        let lo = b.iter().copied().fold(f64::INFINITY, f64::min);
        let spread = (hi - lo) / hi;
        pass &= lo > 0.0 && spread < 0.1;
        detail.push(format!("{}: {} (spread {:.2}%)", v.name(), fmt_seq(&b), 100.0 * spread));
    }
    outcome(9, "inf-sup p-independence", pass, detail.join("; "))
}

// ---- criterion 10: hp against h ----

const HP_REFINEMENTS: usize = 14;

fn r_squared(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    sxy * sxy / (sxx * syy)
}

/// Error of an h run at `ndof`, log-log interpolated between its solves.
fn error_at(records: &[IterationRecord], ndof: usize) -> f64 {
    let pts: Vec<(f64, f64)> = records.iter().map(|r| ((r.ndof as f64).ln(), r.err_mixed_pair.unwrap().ln())).collect();
    let x = (ndof as f64).ln();
    let i = pts.iter().position(|p| p.0 >= x).unwrap_or(pts.len() - 1).max(1);
    let (a, b) = (pts[i - 1], pts[i]);
    (a.1 + (b.1 - a.1) * (x - a.0) / (b.0 - a.0)).exp()
}

fn criterion_10() -> Outcome {
    let mut pass = true;
    let mut detail = Vec::new();
    for case in [CaseId::Tc1, CaseId::Tc2] {
        let prob = TestCase::new(case);
        for fam in [Family::Cartesian, Family::StructuredTriangles] {
            let mesh = build_mesh(prob.domain(), fam, 1).unwrap();
            let cfg = DriveConfig {
                mode: Mode::AdaptHp,
                estimator: EstimatorKind::Eq,
                iterations: HP_REFINEMENTS,
                all_estimators: false,
                ..DriveConfig::default()
            };
            let hp = drive(mesh.clone(), &prob, &cfg).unwrap().records;
            let x: Vec<f64> = hp.iter().map(|r| (r.ndof as f64).cbrt()).collect();
            let y: Vec<f64> = hp.iter().map(|r| r.err_mixed_pair.unwrap().ln()).collect();
            let r2 = r_squared(&x[2..], &y[2..]);
            let last = hp.last().unwrap();
            let mut beats = true;
            let mut h_err = Vec::new();
            for p in 1..=3 {
                let cfg = DriveConfig {
                    mode: Mode::AdaptH,
                    estimator: EstimatorKind::Eq,
                    p,
                    iterations: 40,
                    all_estimators: false,
                    max_ndof: Some(last.ndof),
                    ..DriveConfig::default()
                };
                let h = drive(mesh.clone(), &prob, &cfg).unwrap().records;
                let e = error_at(&h, last.ndof);
                beats &= last.err_mixed_pair.unwrap() < e;
                h_err.push(format!("{e:.3e}"));
            }
            pass &= r2 >= 0.97 && beats;
            detail.push(format!(
                "{} {}: R2 {r2:.4}, ndof {} hp {:.3e} vs h p1..3 {}",
                case.name(),
                if fam == Family::Cartesian { "cart" } else { "tri" },
                last.ndof,
                last.err_mixed_pair.unwrap(),
                h_err.join(" ")
            ));
        }
    }
    outcome(10, "hp exponential convergence", pass, detail.join("; "))
}

// ---- criterion 11: projector suites ----

/// Polynomial in the scaled coordinates ((x - c)/h) with its exact derivatives.
struct Poly2 {
    c: Point,
    h: f64,
    terms: Vec<(i32, i32, f64)>,
}

impl Poly2 {
    fn of_degree(c: Point, h: f64, p: usize, seed: f64) -> Self {
        let mut terms = Vec::new();
        for d in 0..=p as i32 {
            for j in 0..=d {
                let t = (d * 7 + j * 3) as f64 + seed;
                terms.push((d - j, j, (t * 0.731).sin()));
            }
        }
        Self { c, h, terms }
    }

    fn st(&self, x: Point) -> (f64, f64) {
        ((x[0] - self.c[0]) / self.h, (x[1] - self.c[1]) / self.h)
    }

    fn eval(&self, x: Point) -> f64 {
        let (s, t) = self.st(x);
        self.terms.iter().map(|&(i, j, a)| a * s.powi(i) * t.powi(j)).sum()
    }

    fn dx(&self, x: Point) -> f64 {
        let (s, t) = self.st(x);
        self.terms
            .iter()
            .filter(|e| e.0 > 0)
            .map(|&(i, j, a)| a * i as f64 * s.powi(i - 1) * t.powi(j) / self.h)
            .sum()
    }

    fn dy(&self, x: Point) -> f64 {
        let (s, t) = self.st(x);
        self.terms
            .iter()
            .filter(|e| e.1 > 0)
            .map(|&(i, j, a)| a * j as f64 * s.powi(i) * t.powi(j - 1) / self.h)
            .sum()
    }
}

/// Element DOFs of a smooth function: vertex values, Gauss-Lobatto edge
/// nodes, scaled moments against P_{p-2}.
fn primal_dofs(loc: &PrimalLocalMats, mesh: &PolyMesh, f: impl Fn(Point) -> f64) -> Vec<f64> {
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
    if loc.p >= 2 {
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

/// L² projection onto span{φ_i} by quadrature; returns the coefficients.
fn l2_project(quad: &PolygonQuadrature<f64>, n: usize, basis: impl Fn(Point) -> Vec<[f64; 2]>, f: impl Fn(Point) -> [f64; 2]) -> DVector<f64> {
    let mut g = DMatrix::zeros(n, n);
    let mut rhs = DVector::zeros(n);
    for (x, w) in quad.points.iter().zip(&quad.weights) {
        let b = basis(*x);
        let v = f(*x);
        for i in 0..n {
            rhs[i] += w * (b[i][0] * v[0] + b[i][1] * v[1]);
            for j in 0..n {
                g[(i, j)] += w * (b[i][0] * b[j][0] + b[i][1] * b[j][1]);
            }
        }
    }
    g.lu().solve(&rhs).expect("Gram matrix is regular")
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[derive(Default)]
struct Worst {
    pi_nabla: f64,
    pi0_low: f64,
    pi0_flux: f64,
    div_rot: f64,
    pou: f64,
    compat: f64,
}

fn primal_suite(mesh: &PolyMesh, p: usize, w: &mut Worst) {
    let deg = DegreeMap::uniform(mesh, p).unwrap();
    for k in 0..mesh.n_elements() {
        let loc = PrimalLocalMats::new(mesh, &deg, k, StabVariant::DRecipe).unwrap();
        let el = &mesh.elements[k];
        let q = Poly2::of_degree(el.centroid, el.diameter, p, k as f64);
        let v = primal_dofs(&loc, mesh, |x| q.eval(x));
        // Π∇ q = q
        let c = loc.project(&v);
        let quad = PolygonQuadrature::new(&mesh.element_points(k), 2 * p + 2).unwrap();
        for x in &quad.points {
            w.pi_nabla = w.pi_nabla.max((loc.basis.eval_poly(&c, *x) - q.eval(*x)).abs());
        }
        w.pi_nabla = w.pi_nabla.max(quad_form(&loc.stab, &v).abs());
        // Π⁰_{p-2} q against a quadrature L² projection
        if p >= 2 {
            let n = loc.pi0.nrows();
            let got = mat_vec(&loc.pi0, &v);
            let want = l2_project(&quad, n, |x| loc.basis.eval(x)[..n].iter().map(|m| [*m, 0.0]).collect(), |x| [q.eval(x), 0.0]);
            w.pi0_low = w.pi0_low.max(max_abs_diff(&got, want.as_slice()));
        }
    }
}

fn mixed_suite(mesh: &PolyMesh, p: usize, w: &mut Worst) {
    let deg = DegreeMap::uniform(mesh, p).unwrap();
    for k in 0..mesh.n_elements() {
        for variant in [StabVariant::DRecipe, StabVariant::Theoretical] {
            let loc = MixedLocalMats::new(mesh, &deg, k, variant).unwrap();
            let el = &mesh.elements[k];
            let a = Poly2::of_degree(el.centroid, el.diameter, p, 1.0 + k as f64);
            let b = Poly2::of_degree(el.centroid, el.diameter, p, 5.0 + k as f64);
            let field = |x: Point| [a.eval(x), b.eval(x)];
            let v = local_flux_dofs(mesh, &loc, field, |x| b.dx(x) - a.dy(x)).unwrap();
            let quad = PolygonQuadrature::new(&mesh.element_points(k), 2 * p + 4).unwrap();
            // div and rot of a P_p field lie in P_{p-1} and are recovered exactly
            let d = mat_vec(&loc.div, &v);
            let r = mat_vec(&loc.rot, &v);
            for x in &quad.points {
                w.div_rot = w.div_rot.max((loc.eval_scalar(&d, *x) - (a.dx(*x) + b.dy(*x))).abs());
                w.div_rot = w.div_rot.max((loc.eval_scalar(&r, *x) - (b.dx(*x) - a.dy(*x))).abs());
            }
            // Π⁰_p onto ∇P_{p+1} against a quadrature L² projection
            let ng = loc.gram.nrows();
            let unit = |g: usize| {
                let mut e = vec![0.0; ng];
                e[g] = 1.0;
                e
            };
            let fields: Vec<Vec<f64>> = (0..ng).map(unit).collect();
            let want = l2_project(&quad, ng, |x| fields.iter().map(|e| loc.eval_grad_field(e, x)).collect(), field);
            let got = loc.project(&v);
            w.pi0_flux = w.pi0_flux.max(max_abs_diff(&got, want.as_slice()));
        }
    }
}

fn pou_suite(mesh: &PolyMesh, p: usize, w: &mut Worst) {
    let prob = PolynomialProblem::new(vec![(2, 0, 1.0), (1, 1, -0.5), (0, 3, 0.25), (4, 1, 0.1)]);
    let deg = DegreeMap::uniform(mesh, p).unwrap();
    let u = assemble_solve_primal(mesh, &deg, &prob, StabVariant::DRecipe).unwrap();
    let pou = build_pou(mesh, &u);
    for k in 0..mesh.n_elements() {
        let loc = &u.locals[k];
        let mut sum = vec![0.0; loc.n_dofs];
        for f in &pou {
            for piece in f.pieces.iter().filter(|pc| pc.element == k) {
                for (s, d) in sum.iter_mut().zip(&piece.dofs) {
                    *s += d;
                }
            }
        }
        let proj = loc.project(&sum);
        w.pou = w.pou.max((proj[0] - 1.0).abs()).max(max_abs_diff(&proj[1..], &vec![0.0; proj.len() - 1]));
        w.pou = w.pou.max(quad_form(&loc.stab, &sum).abs());
    }
    let rec = reconstruct_flux(mesh, &u, &prob, StabVariant::DRecipe).unwrap();
    w.compat = w.compat.max(rec.max_compatibility_defect());
}

fn unit_square_mesh(coords: &[Point], loops: Vec<Vec<usize>>) -> PolyMesh {
    let n = loops.len();
    PolyMesh::from_loops(coords, loops, vec![1.0; n], Domain::UnitSquare, BoundaryRule::AllDirichlet).unwrap()
}

fn shape_meshes() -> Vec<(&'static str, PolyMesh)> {
    // pentagon with a triangle cut from one corner
    let pentagon = unit_square_mesh(
        &[[0.0, 0.0], [1.0, 0.0], [1.0, 0.5], [0.5, 1.0], [0.0, 1.0], [1.0, 1.0]],
        vec![vec![0, 1, 2, 3, 4], vec![2, 5, 3]],
    );
    // L-shaped hexagon with the remaining square
    let hexagon = unit_square_mesh(
        &[[0.0, 0.0], [1.0, 0.0], [1.0, 0.5], [0.5, 0.5], [0.5, 1.0], [0.0, 1.0], [1.0, 1.0]],
        vec![vec![0, 1, 2, 3, 4, 5], vec![3, 2, 6, 4]],
    );
    vec![
        ("squares", build_mesh(Domain::UnitSquare, Family::Cartesian, 1).unwrap()),
        ("triangles", build_mesh(Domain::UnitSquare, Family::StructuredTriangles, 1).unwrap()),
        ("pentagon", pentagon),
        ("nonconvex hexagon", hexagon),
        ("nonconvex zigzag", zigzag_mesh()),
    ]
}

fn criterion_11() -> Outcome {
    let start = Instant::now();
    let mut w = Worst::default();
    let meshes = shape_meshes();
    let mut sizes: BTreeSet<usize> = BTreeSet::new();
    for (_, mesh) in &meshes {
        sizes.extend(mesh.elements.iter().map(|e| e.vertices.len()));
        for p in 1..=4 {
            primal_suite(mesh, p, &mut w);
            mixed_suite(mesh, p, &mut w);
            pou_suite(mesh, p, &mut w);
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let worst = [w.pi_nabla, w.pi0_low, w.pi0_flux, w.div_rot, w.pou, w.compat];
    let pass = worst.iter().all(|e| *e <= PROJECTOR_TOL) && secs < 60.0 && [3, 4, 5, 6].iter().all(|n| sizes.contains(n));
    outcome(
        11,
        "projector and consistency suites",
        pass,
        format!(
            "p=1..4 on {}: Pi_nabla {:.1e}, Pi0_(p-2) {:.1e}, Pi0_p {:.1e}, div/rot {:.1e}, pou {:.1e}, patch compatibility {:.1e} (limit {PROJECTOR_TOL:.0e}), {secs:.1} s",
            meshes.iter().map(|m| m.0).collect::<Vec<_>>().join(", "),
            w.pi_nabla,
            w.pi0_low,
            w.pi0_flux,
            w.div_rot,
            w.pou,
            w.compat
        ),
    )
}

fn main() -> ExitCode {
    let only: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let wanted = |id: usize| only.is_empty() || only.contains(&id);
    let start = Instant::now();
    let mut equilibration = Vec::new();
    let mut results = Vec::new();
    let mut record = |o: Outcome| {
        println!("criterion {:>2}: {}  {}: {}", o.id, if o.pass { "PASS" } else { "FAIL" }, o.title, o.detail);
        results.push(o);
    };
    let table_criteria: [fn(&mut Vec<f64>) -> Outcome; 5] = [criterion_1, criterion_2, criterion_3, criterion_4, criterion_5];
    for (i, c) in table_criteria.iter().enumerate() {
        if wanted(i + 1) || wanted(6) {
            record(c(&mut equilibration));
        }
    }
    if wanted(6) {
        record(criterion_6(&equilibration));
    }
    let rest: [(usize, fn() -> Outcome); 5] = [(7, criterion_7), (8, criterion_8), (9, criterion_9), (10, criterion_10), (11, criterion_11)];
    for (id, c) in rest {
        if wanted(id) {
            record(c());
        }
    }

    let failed: Vec<usize> = results.iter().filter(|o| !o.pass).map(|o| o.id).collect();
    let unexpected: Vec<usize> = failed.iter().copied().filter(|id| !KNOWN_GAPS.contains(id)).collect();
    let closed: Vec<usize> = results.iter().filter(|o| o.pass && KNOWN_GAPS.contains(&o.id)).map(|o| o.id).collect();
    println!(
        "acceptance: {} of {} criteria pass in {:.0} s; failing {:?}, known gaps {:?}",
        results.len() - failed.len(),
        results.len(),
        start.elapsed().as_secs_f64(),
        failed,
        KNOWN_GAPS
    );
    if !closed.is_empty() {
        println!("known gaps now passing: {closed:?}");
    }
    if unexpected.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("unexpected failures: {unexpected:?}");
        ExitCode::FAILURE
    }
}
