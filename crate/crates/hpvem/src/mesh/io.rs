use std::fmt::Write as _;

use super::{BoundaryRule, Domain, PolyMesh, VertexTag};
use crate::error::{Error, Result};
use crate::poly::geometry;

pub const FORMAT_HEADER: &str = "hpvem-mesh 1";

fn tag_name(t: VertexTag) -> &'static str {
    match t {
        VertexTag::Interior => "interior",
        VertexTag::Dirichlet => "dirichlet",
        VertexTag::Neumann => "neumann",
        VertexTag::SlitLower => "slit_lower",
        VertexTag::SlitUpper => "slit_upper",
    }
}

/// Text form of the mesh; reals are written with 17 significant digits.
pub fn dump_mesh(mesh: &PolyMesh) -> String {
    let mut s = String::new();
    writeln!(s, "{FORMAT_HEADER}").unwrap();
    writeln!(s, "domain {}", mesh.domain.name()).unwrap();
    writeln!(s, "boundary {}", mesh.rule.name()).unwrap();
    writeln!(s, "vertices {}", mesh.n_vertices()).unwrap();
    for v in &mesh.vertices {
        writeln!(s, "{} {:.16e} {:.16e} {}", v.id, v.x, v.y, tag_name(v.tag)).unwrap();
    }
    writeln!(s, "elements {}", mesh.n_elements()).unwrap();
    for e in &mesh.elements {
        write!(s, "{}", e.id).unwrap();
        for v in &e.vertices {
            write!(s, " {v}").unwrap();
        }
        writeln!(s, " ; {:.16e}", e.kappa).unwrap();
    }
    s
}

/// Parse the text form. Element loops are reoriented counterclockwise.
pub fn load_mesh(text: &str) -> Result<PolyMesh> {
    let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#'));
    let bad = |m: &str| Error::Format(m.to_string());
    if lines.next() != Some(FORMAT_HEADER) {
        return Err(bad("missing or unsupported header"));
    }
    let mut field = |key: &str| -> Result<String> {
        let l = lines.next().ok_or_else(|| bad("unexpected end of file"))?;
        l.strip_prefix(key)
            .map(|r| r.trim().to_string())
            .ok_or_else(|| Error::Format(format!("expected `{key}`, found `{l}`")))
    };
    let domain = Domain::parse(&field("domain")?)?;
    let rule = BoundaryRule::parse(&field("boundary")?)?;
    let nv: usize = field("vertices")?.parse().map_err(|_| bad("vertex count"))?;
    let mut coords = Vec::with_capacity(nv);
    for i in 0..nv {
        let row = field("")?;
        let parts: Vec<&str> = row.split_whitespace().collect();
        if parts.len() != 4 || parts[0].parse::<usize>() != Ok(i) {
            return Err(Error::Format(format!("vertex row {i}: `{row}`")));
        }
        let x: f64 = parts[1].parse().map_err(|_| bad("vertex x"))?;
        let y: f64 = parts[2].parse().map_err(|_| bad("vertex y"))?;
        if !(x.is_finite() && y.is_finite()) {
            return Err(bad("non-finite coordinate"));
        }
        coords.push([x, y]);
    }
    let ne: usize = field("elements")?.parse().map_err(|_| bad("element count"))?;
    let mut loops = Vec::with_capacity(ne);
    let mut kappa = Vec::with_capacity(ne);
    for i in 0..ne {
        let row = field("")?;
        let (ids, k) = row.split_once(';').ok_or_else(|| Error::Format(format!("element row {i} lacks `; kappa`")))?;
        let mut ids = ids.split_whitespace().map(|t| t.parse::<usize>().map_err(|_| bad("element index")));
        if ids.next().transpose()? != Some(i) {
            return Err(Error::Format(format!("element row {i} has the wrong id")));
        }
        let mut l: Vec<usize> = ids.collect::<Result<_>>()?;
        if l.iter().any(|&v| v >= nv) {
            return Err(Error::Format(format!("element {i} references a missing vertex")));
        }
        let pts: Vec<_> = l.iter().map(|&v| coords[v]).collect();
        if geometry::signed_area(&pts) < 0.0 {
            l.reverse();
        }
        loops.push(l);
        kappa.push(k.trim().parse::<f64>().map_err(|_| bad("kappa"))?);
    }
    PolyMesh::from_loops(&coords, loops, kappa, domain, rule)
}
