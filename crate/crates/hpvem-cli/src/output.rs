//! results.csv, results.json and plot.svg.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use hpvem::adaptivity::{ElementArrays, IterationRecord, Mode};
use hpvem::Result;

use crate::config::RunConfig;

pub const CSV_COLUMNS: [&str; 15] = [
    "iter",
    "ndof",
    "h_max",
    "p_min",
    "p_max",
    "err_primal",
    "err_mixed_pair",
    "eta_eq",
    "eta_res",
    "eta_flux",
    "I_eq",
    "I_res",
    "oscillation",
    "pou_quantity",
    "wall_ms",
];

/// 17 significant digits; empty for a missing value.
pub fn fmt_real(v: Option<f64>) -> String {
    match v {
        Some(x) if x.is_finite() => format!("{x:.16e}"),
        Some(x) => format!("{x}"),
        None => String::new(),
    }
}

pub fn csv_string(records: &[IterationRecord]) -> String {
    let mut s = CSV_COLUMNS.join(",");
    s.push('\n');
    for r in records {
        let fields = [
            r.iter.to_string(),
            r.ndof.to_string(),
            fmt_real(Some(r.h_max)),
            r.p_min.to_string(),
            r.p_max.to_string(),
            fmt_real(Some(r.err_primal)),
            fmt_real(r.err_mixed_pair),
            fmt_real(r.eta_eq),
            fmt_real(r.eta_res),
            fmt_real(r.eta_flux),
            fmt_real(r.i_eq),
            fmt_real(r.i_res),
            fmt_real(r.oscillation),
            fmt_real(r.pou_quantity),
            fmt_real(Some(r.wall_ms)),
        ];
        s.push_str(&fields.join(","));
        s.push('\n');
    }
    s
}

#[derive(Debug, Serialize)]
struct Row<'a> {
    iter: usize,
    ndof: usize,
    h_max: f64,
    p_min: usize,
    p_max: usize,
    err_primal: f64,
    err_mixed_pair: Option<f64>,
    eta_eq: Option<f64>,
    eta_res: Option<f64>,
    eta_flux: Option<f64>,
    #[serde(rename = "I_eq")]
    i_eq: Option<f64>,
    #[serde(rename = "I_res")]
    i_res: Option<f64>,
    oscillation: Option<f64>,
    pou_quantity: Option<f64>,
    wall_ms: f64,
    n_elements: usize,
    mixed_equilibration: Option<f64>,
    flux_equilibration: Option<f64>,
    marked: &'a [usize],
    h_refined: Vec<usize>,
    p_raised: Vec<usize>,
    elements: &'a ElementArrays,
}

#[derive(Debug, Serialize)]
struct Document<'a> {
    config: &'a RunConfig,
    /// |u|_1 of the exact solution when known, for relative errors.
    h1_seminorm: Option<f64>,
    rows: Vec<Row<'a>>,
}

pub fn json_string(cfg: &RunConfig, records: &[IterationRecord]) -> Result<String> {
    let rows = records
        .iter()
        .map(|r| Row {
            iter: r.iter,
            ndof: r.ndof,
            h_max: r.h_max,
            p_min: r.p_min,
            p_max: r.p_max,
            err_primal: r.err_primal,
            err_mixed_pair: r.err_mixed_pair,
            eta_eq: r.eta_eq,
            eta_res: r.eta_res,
            eta_flux: r.eta_flux,
            i_eq: r.i_eq,
            i_res: r.i_res,
            oscillation: r.oscillation,
            pou_quantity: r.pou_quantity,
            wall_ms: r.wall_ms,
            n_elements: r.n_elements,
            mixed_equilibration: r.mixed_equilibration,
            flux_equilibration: r.flux_equilibration,
            marked: &r.marked,
            h_refined: r.plan.h_set.iter().copied().collect(),
            p_raised: r.plan.p_set.iter().copied().collect(),
            elements: &r.elements,
        })
        .collect();
    let doc = Document {
        config: cfg,
        h1_seminorm: cfg.problem().h1_seminorm(),
        rows,
    };
    serde_json::to_string_pretty(&doc).map_err(|e| hpvem::Error::Io(e.to_string()))
}

struct Series {
    name: &'static str,
    color: &'static str,
    points: Vec<(f64, f64)>,
}

type Curve = (&'static str, &'static str, fn(&IterationRecord) -> Option<f64>);

/// Error and estimator curves against ndof^{1/3} (hp) or ndof^{1/2}, log y.
pub fn svg_string(mode: Mode, records: &[IterationRecord]) -> String {
    let hp = mode == Mode::AdaptHp;
    let xof = |n: usize| if hp { (n as f64).cbrt() } else { (n as f64).sqrt() };
    let pick: [Curve; 5] = [
        ("err_primal", "#1f77b4", |r| Some(r.err_primal)),
        ("err_mixed_pair", "#ff7f0e", |r| r.err_mixed_pair),
        ("eta_eq", "#2ca02c", |r| r.eta_eq),
        ("eta_res", "#d62728", |r| r.eta_res),
        ("eta_flux", "#9467bd", |r| r.eta_flux),
    ];
    let series: Vec<Series> = pick
        .iter()
        .map(|(name, color, f)| Series {
            name,
            color,
            points: records
                .iter()
                .filter_map(|r| f(r).filter(|v| *v > 0.0 && v.is_finite()).map(|v| (xof(r.ndof), v)))
                .collect(),
        })
        .filter(|s| !s.points.is_empty())
        .collect();

    let (w, h) = (640.0, 420.0);
    let (left, right, top, bottom) = (70.0, 150.0, 20.0, 50.0);
    let pw = w - left - right;
    let ph = h - top - bottom;
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#);
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(s, r#"<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#);
    let xlabel = if hp { "ndof^(1/3)" } else { "ndof^(1/2)" };
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" font-size="13" text-anchor="middle">{xlabel}</text>"#,
        left + pw / 2.0,
        h - 10.0
    );

    let all: Vec<(f64, f64)> = series.iter().flat_map(|s| s.points.iter().copied()).collect();
    if all.is_empty() {
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" font-size="13" text-anchor="middle">no data</text>"#,
            left + pw / 2.0,
            top + ph / 2.0
        );
        s.push_str("</svg>\n");
        return s;
    }
    let (mut x0, mut x1) = all.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p.0), b.max(p.0)));
    if x1 - x0 < 1e-12 {
        x0 -= 0.5;
        x1 += 0.5;
    }
    let ly = all.iter().map(|p| p.1.log10());
    let y0 = ly.clone().fold(f64::INFINITY, f64::min).floor();
    let mut y1 = ly.fold(f64::NEG_INFINITY, f64::max).ceil();
    if y1 <= y0 {
        y1 = y0 + 1.0;
    }
    let px = |x: f64| left + (x - x0) / (x1 - x0) * pw;
    let py = |v: f64| top + (y1 - v.log10()) / (y1 - y0) * ph;

    let mut d = y0 as i32;
    while d <= y1 as i32 {
        let y = top + (y1 - d as f64) / (y1 - y0) * ph;
        let _ = writeln!(s, r##"<line x1="{left}" y1="{y:.2}" x2="{}" y2="{y:.2}" stroke="#dddddd"/>"##, left + pw);
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{:.2}" font-size="11" text-anchor="end">1e{d}</text>"#,
            left - 6.0,
            y + 4.0
        );
        d += 1;
    }
    for i in 0..=4 {
        let x = x0 + (x1 - x0) * i as f64 / 4.0;
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{}" font-size="11" text-anchor="middle">{x:.1}</text>"#,
            px(x),
            top + ph + 16.0
        );
    }
    for (i, se) in series.iter().enumerate() {
        let pts: Vec<String> = se.points.iter().map(|&(x, v)| format!("{:.2},{:.2}", px(x), py(v))).collect();
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{}" stroke-width="1.5" points="{}"/>"#,
            se.color,
            pts.join(" ")
        );
        for &(x, v) in &se.points {
            let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="{}"/>"#, px(x), py(v), se.color);
        }
        let ly = top + 14.0 + 18.0 * i as f64;
        let lx = left + pw + 12.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{}" stroke-width="2"/>"#,
            lx + 20.0,
            se.color
        );
        let _ = writeln!(s, r#"<text x="{}" y="{}" font-size="12">{}</text>"#, lx + 26.0, ly + 4.0, se.name);
    }
    s.push_str("</svg>\n");
    s
}

/// Paths written by `write_all`.
#[derive(Debug, Clone)]
pub struct OutputFiles {
    pub csv: PathBuf,
    pub json: PathBuf,
    pub svg: PathBuf,
}

pub fn write_all(dir: &Path, cfg: &RunConfig, records: &[IterationRecord]) -> Result<OutputFiles> {
    fs::create_dir_all(dir)?;
    let files = OutputFiles {
        csv: dir.join("results.csv"),
        json: dir.join("results.json"),
        svg: dir.join("plot.svg"),
    };
    fs::write(&files.csv, csv_string(records))?;
    fs::write(&files.json, json_string(cfg, records)?)?;
    fs::write(&files.svg, svg_string(cfg.mode, records))?;
    Ok(files)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits() {
        let s = fmt_real(Some(0.1));
        assert_eq!(s, "1.0000000000000001e-1");
        assert_eq!(s.parse::<f64>().unwrap(), 0.1);
        assert_eq!(fmt_real(None), "");
    }

    #[test]
    fn header_only_without_records() {
        let s = csv_string(&[]);
        assert_eq!(s.lines().count(), 1);
        assert_eq!(s.trim_end().split(',').count(), 15);
        assert!(svg_string(Mode::Uniform, &[]).contains("no data"));
    }
}
