use std::collections::HashMap;

use serde::Serialize;

use super::{PolyMesh, Side};
use crate::poly::geometry::{self, point_segment_distance};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    /// Radius of the largest ball in the kernel, divided by h_E.
    pub star_ratio: Vec<f64>,
    /// Shortest edge of the element divided by h_E.
    pub edge_ratio: Vec<f64>,
    pub g1: bool,
    pub g2: bool,
    /// Every edge with a single neighbor lies on the domain boundary.
    pub conforming: bool,
    /// No two vertices share coordinates, except the copies along the slit.
    pub no_duplicates: bool,
    pub counterclockwise: bool,
    /// Elements violating G1 or G2.
    pub failing: Vec<usize>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.g1 && self.g2 && self.conforming && self.no_duplicates && self.counterclockwise
    }
}

pub fn validate(mesh: &PolyMesh, gamma: f64, gamma_tilde: f64) -> ValidationReport {
    let mut star_ratio = Vec::with_capacity(mesh.n_elements());
    let mut edge_ratio = Vec::with_capacity(mesh.n_elements());
    let mut failing = Vec::new();
    let mut ccw = true;
    for el in &mesh.elements {
        let pts = mesh.element_points(el.id);
        ccw &= geometry::signed_area(&pts) > 0.0;
        let (_, r) = geometry::kernel_ball(&pts);
        let s = r / el.diameter;
        let e = el.edges.iter().map(|&e| mesh.edges[e].length).fold(f64::INFINITY, f64::min) / el.diameter;
        if s < gamma || e * gamma_tilde < 1.0 - 1e-12 {
            failing.push(el.id);
        }
        star_ratio.push(s);
        edge_ratio.push(e);
    }
    let segs = mesh.domain.boundary_segments();
    let conforming = mesh.edges.iter().filter(|e| e.is_boundary()).all(|e| {
        let (a, b) = mesh.edge_points(e.id);
        segs.iter()
            .any(|s| point_segment_distance(a, s[0], s[1]) < 1e-12 && point_segment_distance(b, s[0], s[1]) < 1e-12)
    });
    let mut seen: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
    for v in &mesh.vertices {
        let key = ((v.x * 1e9).round() as i64, (v.y * 1e9).round() as i64);
        seen.entry(key).or_default().push(v.id);
    }
    let no_duplicates = seen.values().all(|ids| match ids.len() {
        1 => true,
        2 => {
            let sides: Vec<Side> = ids.iter().map(|&v| mesh.vertices[v].side()).collect();
            sides.contains(&Side::Lower) && sides.contains(&Side::Upper)
        }
        _ => false,
    });
    let g1 = star_ratio.iter().all(|&s| s >= gamma);
    let g2 = edge_ratio.iter().all(|&e| e * gamma_tilde >= 1.0 - 1e-12);
    ValidationReport {
        star_ratio,
        edge_ratio,
        g1,
        g2,
        conforming,
        no_duplicates,
        counterclockwise: ccw,
        failing,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_mesh, BoundaryRule, Domain, Family};

    #[test]
    fn unit_square_passes() {
        let m = build_mesh(Domain::UnitSquare, Family::Cartesian, 0).unwrap();
        assert!(validate(&m, 0.3, 4.0).passed());
    }

    #[test]
    fn sliver_fails_g1() {
        let coords = [[0.0, 0.0], [1.0, 0.0], [0.5, 1e-3]];
        let m = PolyMesh::from_loops(&coords, vec![vec![0, 1, 2]], vec![1.0], Domain::UnitSquare, BoundaryRule::AllDirichlet).unwrap();
        let r = validate(&m, 0.1, 10.0);
        assert!(!r.g1);
        assert_eq!(r.failing, vec![0]);
    }
}
