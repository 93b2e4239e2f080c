//! Printed convergence tables of the unit-square case and their reproduction.
//!
//! Errors, estimators and the global-variant norms are relative to |u|_1;
//! oscillation and the partition-of-unity quantity are absolute. A cell
//! passes when |computed - printed| ≤ rel·|printed| + abs + half a unit of the
//! printed last digit (one unit above the fixed-point cells, which are truncated).

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::time::Instant;

use hpvem::adaptivity::{drive, solve_estimate, DriveConfig, EstimatorKind, IterationRecord, Mode};
use hpvem::degrees::DegreeMap;
use hpvem::estimators::equilibration_defect;
use hpvem::flux::global_variant;
use hpvem::mesh::{build_mesh, Domain, Family};
use hpvem::mixed::assemble_solve_mixed;
use hpvem::primal::{assemble_solve_primal, StabVariant};
use hpvem::problem::{CaseId, TestCase};
use hpvem::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Source {
    Uniform {
        family: Family,
        p: usize,
        levels: &'static [u32],
    },
    /// h-adaptive, flux-driven, from the coarse triangular mesh.
    Adaptive {
        p: usize,
        iterations: usize,
    },
    /// Global counterpart of the patch problems on Cartesian meshes.
    Global {
        p: usize,
        levels: &'static [u32],
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Check {
    /// Every computed EOC within `tol` of `target`.
    Eoc {
        target: f64,
        tol: f64,
    },
    Increasing(&'static str),
    Decreasing(&'static str),
}

/// A printed column; cells starting with '!' are known misprints and are
/// reported but not judged, "---" is an empty cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Column {
    pub name: &'static str,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub cells: &'static [&'static str],
}

#[derive(Debug, Clone, PartialEq)]
pub struct TableSpec {
    pub id: &'static str,
    pub caption: &'static str,
    pub source: Source,
    pub columns: Vec<Column>,
    pub checks: Vec<Check>,
}

const fn col(name: &'static str, rel_tol: f64, cells: &'static [&'static str]) -> Column {
    Column {
        name,
        rel_tol,
        abs_tol: 0.0,
        cells,
    }
}

const fn eoc(cells: &'static [&'static str]) -> Column {
    Column {
        name: "eoc",
        rel_tol: 0.0,
        abs_tol: 0.02,
        cells,
    }
}

pub fn registry() -> Vec<TableSpec> {
    vec![
        TableSpec {
            id: "tri-p1",
            caption: "h-version, triangular meshes, p=1",
            source: Source::Uniform {
                family: Family::StructuredTriangles,
                p: 1,
                levels: &[1, 2, 3, 4],
            },
            columns: vec![
                col("error", 0.02, &["0.446", "0.234", "0.120", "0.060"]),
                eoc(&["---", "0.927", "0.966", "0.9872"]),
                col("eta_flux", 0.02, &["0.469", "0.260", "0.137", "0.071"]),
                col("ratio", 0.05, &["1.0515", "1.1121", "1.1422", "1.1804"]),
                col("oscillation", 0.10, &["6.454e-02", "1.638e-02", "4.112e-03", "1.029e-03"]),
                col("pou", 0.10, &["7.784e-02", "5.860e-02", "5.104e-02", "4.869e-02"]),
            ],
            checks: vec![],
        },
        TableSpec {
            id: "cart-p1",
            caption: "h-version, uniform Cartesian meshes, p=1",
            source: Source::Uniform {
                family: Family::Cartesian,
                p: 1,
                levels: &[2, 3, 4, 5],
            },
            columns: vec![
                col("error", 0.02, &["0.339", "0.169", "0.084", "0.042"]),
                eoc(&["---", "0.999", "0.999", "0.999"]),
                col("eta_flux", 0.02, &["0.362", "0.186", "0.093", "0.046"]),
                col("ratio", 0.05, &["1.068", "1.098", "1.106", "1.108"]),
                col("oscillation", 0.10, &["!1.035e-02", "!1.638e-02", "2.600e-03", "6.507e-04"]),
                col("pou", 0.10, &["5.723e-02", "4.703e-02", "4.407e-02", "4.329e-02"]),
            ],
            checks: vec![Check::Eoc { target: 0.999, tol: 0.02 }],
        },
        TableSpec {
            id: "tri-p2",
            caption: "h-version, triangular meshes, p=2",
            source: Source::Uniform {
                family: Family::StructuredTriangles,
                p: 2,
                levels: &[1, 2, 3, 4],
            },
            columns: vec![
                col("error", 0.03, &["0.095", "0.024", "0.006", "0.001"]),
                eoc(&["---", "1.989", "1.991", "2"]),
                col("eta_flux", 0.10, &["0.171", "0.089", "0.064", "0.055"]),
                col("ratio", 0.10, &["1.803", "3.718", "10.649", "36.798"]),
                col("oscillation", 0.10, &["5.892e-03", "7.365e-04", "9.207e-05", "1.150e-05"]),
                col("pou", 0.10, &["5.105e-02", "4.722e-02", "4.614e-02", "4.588e-02"]),
            ],
            checks: vec![Check::Increasing("ratio")],
        },
        TableSpec {
            id: "cart-p2",
            caption: "h-version, uniform Cartesian meshes, p=2",
            source: Source::Uniform {
                family: Family::Cartesian,
                p: 2,
                levels: &[2, 3, 4, 5],
            },
            columns: vec![
                col("error", 0.03, &["0.079", "0.020", "0.005", "0.001"]),
                eoc(&["---", "1.965", "1.991", "1.998"]),
                col("eta_flux", 0.10, &["0.162", "0.070", "0.033", "0.016"]),
                col("ratio", 0.10, &["2.053", "3.461", "6.529", "12.846"]),
                col("oscillation", 0.10, &["2.329e-03", "2.911e-04", "3.639e-05", "4.549e-06"]),
                col("pou", 0.10, &["5.518e-02", "5.130e-02", "5.027e-02", "5.000e-02"]),
            ],
            checks: vec![Check::Increasing("ratio")],
        },
        TableSpec {
            id: "adaptive",
            caption: "h-adaptive version from a coarse triangular mesh, p=1",
            source: Source::Adaptive { p: 1, iterations: 7 },
            columns: vec![
                col("error", 0.05, &["0.446", "0.385", "0.234", "0.182", "0.120", "0.098", "0.059", "0.049"]),
                col("eta_flux", 0.05, &["0.469", "0.534", "0.260", "0.239", "0.137", "0.162", "0.092", "0.112"]),
                col("ratio", 0.05, &["1.051", "1.386", "1.112", "1.313", "1.142", "1.652", "1.555", "2.283"]),
                col(
                    "oscillation",
                    0.10,
                    &[
                        "6.454e-02",
                        "3.951e-02",
                        "1.638e-02",
                        "1.178e-02",
                        "4.112e-03",
                        "2.998e-03",
                        "1.001e-03",
                        "7.417e-04",
                    ],
                ),
                col(
                    "pou",
                    0.10,
                    &[
                        "7.784e-02",
                        "7.813e-02",
                        "5.860e-02",
                        "6.102e-02",
                        "5.104e-02",
                        "5.517e-02",
                        "5.045e-02",
                        "5.238e-02",
                    ],
                ),
            ],
            checks: vec![],
        },
        TableSpec {
            id: "global-p2",
            caption: "global version, uniform Cartesian meshes, p=2",
            source: Source::Global {
                p: 2,
                levels: &[2, 3, 4, 5, 6],
            },
            columns: vec![
                col("residual", 0.10, &["0.011", "0.002", "7.213e-4", "1.802e-4", "4.505e-05"]),
                col("mismatch", 0.10, &["2.321e-02", "3.920e-03", "6.695e-04", "1.166e-04", "2.07587e-05"]),
            ],
            checks: vec![Check::Decreasing("residual"), Check::Decreasing("mismatch")],
        },
        TableSpec {
            id: "global-p3",
            caption: "global version, uniform Cartesian meshes, p=3",
            source: Source::Global {
                p: 3,
                levels: &[2, 3, 4, 5, 6],
            },
            columns: vec![
                col("residual", 0.10, &["1.766e-04", "1.081e-05", "6.726e-07", "4.201e-08", "2.626e-09"]),
                col("mismatch", 0.10, &["4.256e-04", "2.896e-05", "1.913e-06", "1.308e-07", "9.432e-09"]),
            ],
            checks: vec![Check::Decreasing("residual"), Check::Decreasing("mismatch")],
        },
    ]
}

pub fn find(id: &str) -> Result<TableSpec> {
    registry().into_iter().find(|t| t.id == id).ok_or_else(|| {
        Error::Config(format!(
            "unknown table {id}; known: {}",
            registry().iter().map(|t| t.id).collect::<Vec<_>>().join(", ")
        ))
    })
}

/// Computed columns plus the records behind them.
#[derive(Debug, Clone, Default)]
pub struct Computed {
    pub columns: BTreeMap<&'static str, Vec<f64>>,
    pub records: Vec<IterationRecord>,
    /// Largest relative equilibration defect of every flux involved.
    pub equilibration: Vec<f64>,
}

fn table_config(p: usize) -> DriveConfig {
    DriveConfig {
        estimator: EstimatorKind::Flux,
        p,
        all_estimators: true,
        ..DriveConfig::default()
    }
}

pub fn eoc_column(errors: &[f64], h: &[f64]) -> Vec<f64> {
    let mut out = vec![f64::NAN; errors.len()];
    for i in 1..errors.len() {
        out[i] = (errors[i - 1] / errors[i]).ln() / (h[i - 1] / h[i]).ln();
    }
    out
}

fn record_columns(records: &[IterationRecord], norm: f64, with_eoc: bool) -> BTreeMap<&'static str, Vec<f64>> {
    let get = |f: fn(&IterationRecord) -> Option<f64>| records.iter().map(|r| f(r).unwrap_or(f64::NAN)).collect::<Vec<f64>>();
    let err = get(|r| Some(r.err_primal));
    let eta = get(|r| r.eta_flux);
    let mut c = BTreeMap::new();
    c.insert("error", err.iter().map(|e| e / norm).collect());
    c.insert("eta_flux", eta.iter().map(|e| e / norm).collect());
    c.insert("ratio", eta.iter().zip(&err).map(|(a, b)| a / b).collect());
    c.insert("oscillation", get(|r| r.oscillation));
    c.insert("pou", get(|r| r.pou_quantity));
    if with_eoc {
        c.insert("eoc", eoc_column(&err, &get(|r| Some(r.h_max))));
    }
    c
}

fn record_equilibration(records: &[IterationRecord]) -> Vec<f64> {
    records.iter().flat_map(|r| [r.mixed_equilibration, r.flux_equilibration]).flatten().collect()
}

pub fn compute(spec: &TableSpec) -> Result<Computed> {
    let prob = TestCase::new(CaseId::Tc3);
    let norm = prob.h1_seminorm().expect("unit-square case");
    match spec.source {
        Source::Uniform { family, p, levels } => {
            let cfg = table_config(p);
            let mut records = Vec::new();
            for (i, &level) in levels.iter().enumerate() {
                let mesh = build_mesh(Domain::UnitSquare, family, level)?;
                let deg = DegreeMap::uniform(&mesh, p)?;
                records.push(solve_estimate(&mesh, &deg, &prob, &cfg, i)?.0);
            }
            Ok(Computed {
                columns: record_columns(&records, norm, true),
                equilibration: record_equilibration(&records),
                records,
            })
        }
        Source::Adaptive { p, iterations } => {
            let mesh = build_mesh(Domain::UnitSquare, Family::StructuredTriangles, 1)?;
            let cfg = DriveConfig {
                mode: Mode::AdaptH,
                iterations,
                ..table_config(p)
            };
            let records = drive(mesh, &prob, &cfg)?.records;
            Ok(Computed {
                columns: record_columns(&records, norm, false),
                equilibration: record_equilibration(&records),
                records,
            })
        }
        Source::Global { p, levels } => {
            let mut residual = Vec::new();
            let mut mismatch = Vec::new();
            let mut equilibration = Vec::new();
            for &level in levels {
                let mesh = build_mesh(Domain::UnitSquare, Family::Cartesian, level)?;
                let deg = DegreeMap::uniform(&mesh, p)?;
                let primal = assemble_solve_primal(&mesh, &deg, &prob, StabVariant::DRecipe)?;
                let g = global_variant(&mesh, &primal, &prob, StabVariant::DRecipe)?;
                residual.push(g.residual / norm);
                mismatch.push(g.exact_mismatch / norm);
                let mixed = assemble_solve_mixed(&mesh, &deg, &prob, StabVariant::DRecipe)?;
                equilibration.push(equilibration_defect(&mesh, &mixed, &prob)?);
            }
            let mut columns = BTreeMap::new();
            columns.insert("residual", residual);
            columns.insert("mismatch", mismatch);
            Ok(Computed {
                columns,
                records: Vec::new(),
                equilibration,
            })
        }
    }
}

/// Half a unit of the last printed digit of a decimal string.
pub fn half_unit(printed: &str) -> f64 {
    let (mant, exp) = match printed.split_once(['e', 'E']) {
        Some((m, e)) => (m, e.parse::<i32>().unwrap_or(0)),
        None => (printed, 0),
    };
    let decimals = mant.split_once('.').map_or(0, |(_, d)| d.len()) as i32;
    0.5 * 10f64.powi(exp - decimals)
}

/// Slack for the printed precision. Scientific cells are rounded; the short
/// fixed-point cells are truncated, so a value up to one unit above them
/// prints the same.
pub fn digit_slack(printed: &str, signed_diff: f64) -> f64 {
    let h = half_unit(printed);
    let fixed = !printed.contains(['e', 'E']);
    if fixed && signed_diff > 0.0 {
        2.0 * h
    } else {
        h
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellReport {
    pub row: usize,
    pub column: &'static str,
    pub printed: &'static str,
    pub computed: f64,
    pub rel_diff: f64,
    pub tol: f64,
    pub flagged: bool,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckReport {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReproReport {
    pub id: &'static str,
    pub caption: &'static str,
    pub cells: Vec<CellReport>,
    pub checks: Vec<CheckReport>,
    pub seconds: f64,
}

impl ReproReport {
    pub fn pass(&self) -> bool {
        self.cells.iter().all(|c| c.flagged || c.pass) && self.checks.iter().all(|c| c.pass)
    }

    pub fn failures(&self) -> usize {
        self.cells.iter().filter(|c| !c.flagged && !c.pass).count() + self.checks.iter().filter(|c| !c.pass).count()
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "table {} ({})", self.id, self.caption);
        let _ = writeln!(
            s,
            "{:>4} {:<12} {:>12} {:>14} {:>9} {:>9}  status",
            "row", "column", "printed", "computed", "rel.diff", "tol"
        );
        for c in &self.cells {
            let status = if c.flagged {
                "misprint"
            } else if c.pass {
                "ok"
            } else {
                "FAIL"
            };
            let _ = writeln!(
                s,
                "{:>4} {:<12} {:>12} {:>14.6e} {:>9.4} {:>9.4}  {status}",
                c.row + 1,
                c.column,
                c.printed.trim_start_matches('!'),
                c.computed,
                c.rel_diff,
                c.tol
            );
        }
        for c in &self.checks {
            let _ = writeln!(s, "check {:<30} {}  {}", c.name, if c.pass { "ok" } else { "FAIL" }, c.detail);
        }
        let _ = writeln!(s, "{} in {:.1} s: {}", self.id, self.seconds, if self.pass() { "PASS" } else { "FAIL" });
        s
    }
}

pub fn compare(spec: &TableSpec, computed: &Computed, seconds: f64) -> ReproReport {
    let mut cells = Vec::new();
    for column in &spec.columns {
        let values = computed.columns.get(column.name).cloned().unwrap_or_default();
        for (row, &printed) in column.cells.iter().enumerate() {
            if printed == "---" {
                continue;
            }
            let flagged = printed.starts_with('!');
            let text = printed.trim_start_matches('!');
            let expected: f64 = text.parse().expect("printed cell is a number");
            let got = values.get(row).copied().unwrap_or(f64::NAN);
            let tol = column.rel_tol * expected.abs() + column.abs_tol + digit_slack(text, got - expected);
            let diff = (got - expected).abs();
            cells.push(CellReport {
                row,
                column: column.name,
                printed,
                computed: got,
                rel_diff: diff / expected.abs().max(f64::MIN_POSITIVE),
                tol: tol / expected.abs().max(f64::MIN_POSITIVE),
                flagged,
                pass: diff <= tol,
            });
        }
    }
    let mut checks = Vec::new();
    for check in &spec.checks {
        checks.push(match *check {
            Check::Eoc { target, tol } => {
                let e: Vec<f64> = computed
                    .columns
                    .get("eoc")
                    .map(|v| v.iter().copied().filter(|x| !x.is_nan()).collect())
                    .unwrap_or_default();
                CheckReport {
                    name: format!("eoc within {tol} of {target}"),
                    pass: !e.is_empty() && e.iter().all(|x| (x - target).abs() <= tol),
                    detail: format!("{e:.4?}"),
                }
            }
            Check::Increasing(name) | Check::Decreasing(name) => {
                let v = computed.columns.get(name).cloned().unwrap_or_default();
                let up = matches!(check, Check::Increasing(_));
                let ok = v.len() > 1 && v.windows(2).all(|w| if up { w[1] > w[0] } else { w[1] < w[0] });
                CheckReport {
                    name: format!("{name} strictly {}", if up { "increasing" } else { "decreasing" }),
                    pass: ok,
                    detail: v.iter().map(|x| format!("{x:.4e}")).collect::<Vec<_>>().join(" "),
                }
            }
        });
    }
    ReproReport {
        id: spec.id,
        caption: spec.caption,
        cells,
        checks,
        seconds,
    }
}

/// Run the configuration of a printed table and compare every cell.
pub fn repro(id: &str) -> Result<(ReproReport, Computed)> {
    let spec = find(id)?;
    let start = Instant::now();
    let computed = compute(&spec)?;
    let report = compare(&spec, &computed, start.elapsed().as_secs_f64());
    Ok((report, computed))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn printed_precision() {
        assert!((half_unit("0.446") - 5e-4).abs() < 1e-15);
        assert!((half_unit("6.454e-02") - 5e-6).abs() < 1e-18);
        assert!((half_unit("2.07587e-5") - 5e-11).abs() < 1e-22);
        assert_eq!(half_unit("2"), 0.5);
        assert!((digit_slack("0.002", 1e-4) - 1e-3).abs() < 1e-15);
        assert!((digit_slack("0.002", -1e-4) - 5e-4).abs() < 1e-15);
        assert!((digit_slack("2.0e-3", 1e-4) - 5e-5).abs() < 1e-15);
    }

    #[test]
    fn registry_is_rectangular() {
        for t in registry() {
            let rows = t.columns[0].cells.len();
            assert!(t.columns.iter().all(|c| c.cells.len() == rows), "{}", t.id);
            for c in &t.columns {
                for cell in c.cells {
                    assert!(*cell == "---" || cell.trim_start_matches('!').parse::<f64>().is_ok(), "{cell}");
                }
            }
        }
        assert!(find("nope").is_err());
    }

    #[test]
    fn compare_judges_cells_and_checks() {
        let spec = TableSpec {
            id: "t",
            caption: "",
            source: Source::Adaptive { p: 1, iterations: 0 },
            columns: vec![col("ratio", 0.05, &["1.00", "!9.0", "2.00"])],
            checks: vec![Check::Increasing("ratio")],
        };
        let mut c = Computed::default();
        c.columns.insert("ratio", vec![1.04, 1.5, 2.2]);
        let r = compare(&spec, &c, 0.0);
        assert!(r.cells[0].pass && r.cells[1].flagged && !r.cells[2].pass);
        assert!(r.checks[0].pass);
        assert!(!r.pass());
        assert_eq!(r.failures(), 1);
    }

    #[test]
    fn eoc_of_halving() {
        let e = eoc_column(&[1.0, 0.5, 0.25], &[0.4, 0.2, 0.1]);
        assert!(e[0].is_nan());
        assert!((e[1] - 1.0).abs() < 1e-14 && (e[2] - 1.0).abs() < 1e-14);
    }
}
