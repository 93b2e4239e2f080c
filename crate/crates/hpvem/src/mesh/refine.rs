use std::collections::{BTreeSet, HashMap};

use super::{validate, ElementKind, PolyMesh};
use crate::error::{Error, Result};
use crate::poly::geometry::dist;
use crate::Point;

/// Shape-regularity bounds checked after refinement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefineOptions {
    /// Star-shapedness ratio bound (radius ≥ gamma · h_E).
    pub gamma: f64,
    /// Edge ratio bound (h_E ≤ gamma_tilde · h_e).
    pub gamma_tilde: f64,
    pub enforce: bool,
}

impl Default for RefineOptions {
    fn default() -> Self {
        Self {
            gamma: 0.1,
            gamma_tilde: 10.0,
            enforce: true,
        }
    }
}

impl RefineOptions {
    pub fn unchecked() -> Self {
        Self {
            enforce: false,
            ..Self::default()
        }
    }
}

/// Split marked geometric squares (centroid to side midpoints) and geometric
/// triangles (side midpoints) into four children each. Neighbors receive the
/// new midpoints as ordinary vertices; an existing vertex at a midpoint is reused.
pub fn refine_elements(mesh: &PolyMesh, marked: &BTreeSet<usize>, opts: &RefineOptions) -> Result<PolyMesh> {
    for &k in marked {
        let el = mesh.elements.get(k).ok_or_else(|| Error::Refinement(k, "no such element".into()))?;
        if el.kind == ElementKind::Generic {
            return Err(Error::Refinement(k, "only geometric squares and triangles can be split".into()));
        }
    }
    let mut coords = mesh.coords();
    // new vertices placed inside existing edges, keyed by edge id, with their
    // parameter along the edge orientation
    let mut splits: HashMap<usize, Vec<(f64, usize)>> = HashMap::new();
    let mut mids: HashMap<usize, Vec<usize>> = HashMap::new();
    for &k in marked {
        let el = &mesh.elements[k];
        let n = el.vertices.len();
        let tol = 1e-10 * el.diameter;
        let mut mk = Vec::with_capacity(el.corners.len());
        for side in el.straight_sides() {
            let first = side[0];
            let last = (side[side.len() - 1] + 1) % n;
            let (a, b) = (coords[el.vertices[first]], coords[el.vertices[last]]);
            let m = [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])];
            let existing = side.iter().skip(1).map(|&i| el.vertices[i]).find(|&v| dist(coords[v], m) < tol);
            let vid = match existing {
                Some(v) => v,
                None => {
                    let &i = side
                        .iter()
                        .find(|&&i| {
                            let (p, q) = (coords[el.vertices[i]], coords[el.vertices[(i + 1) % n]]);
                            (dist(p, m) + dist(m, q) - dist(p, q)).abs() < tol
                        })
                        .expect("midpoint lies on its side");
                    let e = el.edges[i];
                    let edge = &mesh.edges[e];
                    let (p, q) = (coords[edge.v[0]], coords[edge.v[1]]);
                    let t = dist(p, m) / dist(p, q);
                    let list = splits.entry(e).or_default();
                    match list.iter().find(|(s, _)| (s - t).abs() < 1e-10) {
                        Some(&(_, v)) => v,
                        None => {
                            coords.push(m);
                            let v = coords.len() - 1;
                            list.push((t, v));
                            v
                        }
                    }
                }
            };
            mk.push(vid);
        }
        mids.insert(k, mk);
    }
    for list in splits.values_mut() {
        list.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    }
    let mut loops = Vec::with_capacity(mesh.n_elements() + 3 * marked.len());
    let mut kappa = Vec::with_capacity(loops.capacity());
    for el in &mesh.elements {
        let n = el.vertices.len();
        let mut l = Vec::with_capacity(n + 4);
        for i in 0..n {
            l.push(el.vertices[i]);
            if let Some(list) = splits.get(&el.edges[i]) {
                if el.edge_sign[i] > 0.0 {
                    l.extend(list.iter().map(|&(_, v)| v));
                } else {
                    l.extend(list.iter().rev().map(|&(_, v)| v));
                }
            }
        }
        let Some(mk) = mids.get(&el.id) else {
            loops.push(l);
            kappa.push(el.kappa);
            continue;
        };
        let pos = |v: usize| l.iter().position(|&x| x == v).expect("vertex in loop");
        let m = l.len();
        let segment = |from: usize, to: usize| -> Vec<usize> {
            let (a, b) = (pos(from), pos(to));
            let len = (b + m - a) % m;
            (0..=len).map(|j| l[(a + j) % m]).collect()
        };
        let c = mk.len();
        match el.kind {
            ElementKind::GeometricSquare => {
                let corner_pts: Vec<Point> = el.corners.iter().map(|&i| coords[el.vertices[i]]).collect();
                let center = [
                    corner_pts.iter().map(|p| p[0]).sum::<f64>() / 4.0,
                    corner_pts.iter().map(|p| p[1]).sum::<f64>() / 4.0,
                ];
                coords.push(center);
                let cv = coords.len() - 1;
                for s in 0..c {
                    let mut child = segment(mk[(s + c - 1) % c], mk[s]);
                    child.push(cv);
                    loops.push(child);
                    kappa.push(el.kappa);
                }
            }
            ElementKind::GeometricTriangle => {
                for s in 0..c {
                    loops.push(segment(mk[(s + c - 1) % c], mk[s]));
                    kappa.push(el.kappa);
                }
                loops.push(mk.clone());
                kappa.push(el.kappa);
            }
            ElementKind::Generic => unreachable!(),
        }
    }
    let out = PolyMesh::from_loops(&coords, loops, kappa, mesh.domain, mesh.rule)?;
    if opts.enforce {
        let report = validate(&out, opts.gamma, opts.gamma_tilde);
        if let Some(&k) = report.failing.first() {
            return Err(Error::Refinement(
                k,
                format!("result violates shape regularity (gamma {}, gamma_tilde {})", opts.gamma, opts.gamma_tilde),
            ));
        }
    }
    Ok(out)
}

/// Parent of every element produced by `refine_elements(mesh, marked, _)`,
/// in the output numbering: unmarked elements keep their order, marked ones
/// are replaced in place by their four children.
pub fn child_parents(mesh: &PolyMesh, marked: &BTreeSet<usize>) -> Vec<usize> {
    let mut out = Vec::with_capacity(mesh.n_elements() + 3 * marked.len());
    for el in &mesh.elements {
        let n = if marked.contains(&el.id) { 4 } else { 1 };
        out.extend(std::iter::repeat_n(el.id, n));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_mesh, Domain, Family};

    #[test]
    fn single_square_split() {
        let m = build_mesh(Domain::UnitSquare, Family::Cartesian, 0).unwrap();
        let r = refine_elements(&m, &BTreeSet::from([0]), &RefineOptions::default()).unwrap();
        assert_eq!((r.n_elements(), r.n_vertices()), (4, 9));
        assert!(r.elements.iter().all(|e| (e.area - 0.25).abs() < 1e-15));
    }

    #[test]
    fn hanging_node_then_reuse() {
        let m = build_mesh(Domain::UnitSquare, Family::Cartesian, 1).unwrap();
        let r = refine_elements(&m, &BTreeSet::from([0]), &RefineOptions::default()).unwrap();
        assert_eq!((r.n_elements(), r.n_vertices()), (7, 14));
        let parents = child_parents(&m, &BTreeSet::from([0]));
        assert_eq!(parents, vec![0, 0, 0, 0, 1, 2, 3]);
        for (child, &parent) in r.elements.iter().zip(&parents) {
            let el = &m.elements[parent];
            let inside = |x: f64, lo: f64| x > lo - 1e-12 && x < lo + 0.5 + 1e-12;
            let (x0, y0) = (el.centroid[0] - 0.25, el.centroid[1] - 0.25);
            assert!(inside(child.centroid[0], x0) && inside(child.centroid[1], y0));
        }
        let right = r.elements.iter().find(|e| e.centroid[0] > 0.5 && e.centroid[1] < 0.5).unwrap();
        assert_eq!(right.n_vertices(), 5);
        assert_eq!(right.kind, ElementKind::GeometricSquare);
        let r2 = refine_elements(&r, &BTreeSet::from([right.id]), &RefineOptions::default()).unwrap();
        assert_eq!((r2.n_elements(), r2.n_vertices()), (10, 18));
        let report = crate::mesh::validate(&r2, 0.1, 10.0);
        assert!(report.conforming && report.no_duplicates);
        assert!(r2.edges.iter().filter(|e| !e.is_boundary()).all(|e| e.neighbors.1.is_some()));
    }
}
