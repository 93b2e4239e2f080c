use std::collections::{BTreeSet, HashMap};

use super::{refine_elements, BoundaryRule, Domain, Family, PolyMesh, RefineOptions};
use crate::error::{Error, Result};
use crate::Point;

struct Lattice {
    h: f64,
    origin: Point,
    coords: Vec<Point>,
    ids: HashMap<(i64, i64, bool), usize>,
}

impl Lattice {
    fn new(h: f64, origin: Point) -> Self {
        Self {
            h,
            origin,
            coords: Vec::new(),
            ids: HashMap::new(),
        }
    }

    /// Vertex at lattice point (i, j); `lower` selects the copy below the slit.
    fn vertex(&mut self, i: i64, j: i64, lower: bool) -> usize {
        let p = [self.origin[0] + i as f64 * self.h, self.origin[1] + j as f64 * self.h];
        let coords = &mut self.coords;
        *self.ids.entry((i, j, lower)).or_insert_with(|| {
            coords.push(p);
            coords.len() - 1
        })
    }
}

/// Cells of side 2^-level covering the domain, as lattice index pairs of their
/// lower-left corners, plus the lattice origin.
fn cells(domain: Domain, level: u32) -> (f64, Point, Vec<(i64, i64)>) {
    let h = 0.5f64.powi(level as i32);
    match domain {
        Domain::UnitSquare => {
            let n = 1i64 << level;
            (h, [0.0, 0.0], (0..n).flat_map(|j| (0..n).map(move |i| (i, j))).collect())
        }
        Domain::LShape | Domain::Slit => {
            let n = 2i64 << level;
            let half = n / 2;
            let keep = move |i: i64, j: i64| !(domain == Domain::LShape && i >= half && j < half);
            (
                h,
                [-1.0, -1.0],
                (0..n).flat_map(|j| (0..n).map(move |i| (i, j))).filter(|&(i, j)| keep(i, j)).collect(),
            )
        }
    }
}

fn on_slit(domain: Domain, lat: &Lattice, i: i64, j: i64) -> bool {
    if domain != Domain::Slit {
        return false;
    }
    let x = lat.origin[0] + i as f64 * lat.h;
    let y = lat.origin[1] + j as f64 * lat.h;
    y.abs() < 1e-14 && x > 1e-14
}

fn cartesian(domain: Domain, level: u32) -> Result<PolyMesh> {
    let (h, origin, cells) = cells(domain, level);
    let mut lat = Lattice::new(h, origin);
    let half_row = match domain {
        Domain::UnitSquare => i64::MIN,
        _ => 1i64 << level,
    };
    let mut loops = Vec::with_capacity(cells.len());
    for (i, j) in cells {
        let below = j < half_row;
        let corners = [(i, j), (i + 1, j), (i + 1, j + 1), (i, j + 1)];
        loops.push(
            corners
                .iter()
                .map(|&(a, b)| {
                    let lower = below && on_slit(domain, &lat, a, b);
                    lat.vertex(a, b, lower)
                })
                .collect(),
        );
    }
    let n = loops.len();
    PolyMesh::from_loops(&lat.coords, loops, vec![1.0; n], domain, domain.default_rule())
}

fn crossed(domain: Domain, level: u32) -> Result<PolyMesh> {
    let (h, origin, cells) = cells(domain, level);
    let mut lat = Lattice::new(h, origin);
    let half_row = match domain {
        Domain::UnitSquare => i64::MIN,
        _ => 1i64 << level,
    };
    let mut loops = Vec::with_capacity(4 * cells.len());
    for (i, j) in cells {
        let below = j < half_row;
        let c: Vec<usize> = [(i, j), (i + 1, j), (i + 1, j + 1), (i, j + 1)]
            .iter()
            .map(|&(a, b)| {
                let lower = below && on_slit(domain, &lat, a, b);
                lat.vertex(a, b, lower)
            })
            .collect();
        lat.coords.push([origin[0] + (i as f64 + 0.5) * h, origin[1] + (j as f64 + 0.5) * h]);
        let m = lat.coords.len() - 1;
        for k in 0..4 {
            loops.push(vec![c[k], c[(k + 1) % 4], m]);
        }
    }
    let n = loops.len();
    PolyMesh::from_loops(&lat.coords, loops, vec![1.0; n], domain, domain.default_rule())
}

/// Meshes of the model domains. Cartesian level L has cells of side 2^-L.
/// Structured-triangle level L ≥ 1 cuts every cell of the level-1 Cartesian
/// mesh along both diagonals and red-refines the result L - 1 times; level 0
/// cuts the level-0 cells.
pub fn build_mesh(domain: Domain, family: Family, level: u32) -> Result<PolyMesh> {
    if level > 12 {
        return Err(Error::UnsupportedMesh(format!("level {level} is too fine")));
    }
    match family {
        Family::Cartesian => cartesian(domain, level),
        Family::StructuredTriangles => {
            if level == 0 {
                return crossed(domain, 0);
            }
            let mut mesh = crossed(domain, 1)?;
            let opts = RefineOptions::unchecked();
            for _ in 1..level {
                let all: BTreeSet<usize> = (0..mesh.n_elements()).collect();
                mesh = refine_elements(&mesh, &all, &opts)?;
            }
            Ok(mesh)
        }
    }
}

/// Eight-element mesh of the unit square, four of its elements nonconvex:
/// two columns split by x = 1/2, rows split by y = 1/2 and by two zigzag lines.
pub fn zigzag_mesh() -> PolyMesh {
    let xs = [0.0, 0.25, 0.5, 0.75, 1.0];
    let mut coords: Vec<Point> = Vec::new();
    let mut row = |ys: [f64; 5]| -> Vec<usize> {
        xs.iter()
            .zip(ys)
            .map(|(&x, y)| {
                coords.push([x, y]);
                coords.len() - 1
            })
            .collect()
    };
    let lines = [
        row([0.0; 5]),
        row([0.25, 0.375, 0.25, 0.375, 0.25]),
        row([0.5; 5]),
        row([0.75, 0.875, 0.75, 0.875, 0.75]),
        row([1.0; 5]),
    ];
    let mut loops = Vec::new();
    for r in 0..4 {
        let (lo, hi) = (&lines[r], &lines[r + 1]);
        for c in 0..2 {
            let a = 2 * c;
            // bottom run left to right, then top run right to left; straight
            // lines only keep their end vertices
            let mut l: Vec<usize> = Vec::new();
            let straight_lo = r % 2 == 0;
            let straight_hi = r % 2 == 1;
            if straight_lo {
                l.extend([lo[a], lo[a + 2]]);
            } else {
                l.extend([lo[a], lo[a + 1], lo[a + 2]]);
            }
            if straight_hi {
                l.extend([hi[a + 2], hi[a]]);
            } else {
                l.extend([hi[a + 2], hi[a + 1], hi[a]]);
            }
            loops.push(l);
        }
    }
    // drop the unused midpoints of the straight lines
    let mut used = vec![false; coords.len()];
    for l in &loops {
        for &v in l {
            used[v] = true;
        }
    }
    let mut remap = vec![usize::MAX; coords.len()];
    let mut kept = Vec::new();
    for (i, p) in coords.iter().enumerate() {
        if used[i] {
            remap[i] = kept.len();
            kept.push(*p);
        }
    }
    let loops: Vec<Vec<usize>> = loops.into_iter().map(|l| l.into_iter().map(|v| remap[v]).collect()).collect();
    PolyMesh::from_loops(&kept, loops, vec![1.0; 8], Domain::UnitSquare, BoundaryRule::AllDirichlet).expect("static mesh is valid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{ElementKind, VertexTag};

    #[test]
    fn counts() {
        let m = build_mesh(Domain::UnitSquare, Family::Cartesian, 0).unwrap();
        assert_eq!((m.n_elements(), m.n_vertices(), m.n_edges()), (1, 4, 4));
        let m = build_mesh(Domain::LShape, Family::Cartesian, 1).unwrap();
        assert_eq!(m.n_elements(), 12);
        assert!(m.elements.iter().all(|e| (e.area - 0.25).abs() < 1e-15));
        let m = build_mesh(Domain::UnitSquare, Family::StructuredTriangles, 1).unwrap();
        assert_eq!(m.n_elements(), 16);
        assert!(m.elements.iter().all(|e| e.kind == ElementKind::GeometricTriangle));
    }

    #[test]
    fn slit_duplicates_vertices_right_of_tip() {
        for level in 0..4 {
            let m = build_mesh(Domain::Slit, Family::Cartesian, level).unwrap();
            let n = (2usize << level) + 1;
            let on_slit = 1usize << level;
            assert_eq!(m.n_vertices(), n * n + on_slit);
            let lower = m.vertices.iter().filter(|v| v.tag == VertexTag::SlitLower).count();
            assert_eq!(lower, on_slit);
        }
    }

    #[test]
    fn zigzag_has_four_nonconvex_elements() {
        let m = zigzag_mesh();
        assert_eq!(m.n_elements(), 8);
        assert!((m.total_area() - 1.0).abs() < 1e-15);
        let nonconvex = m
            .elements
            .iter()
            .filter(|e| {
                let p = m.element_points(e.id);
                let n = p.len();
                (0..n).any(|i| {
                    let (a, b, c) = (p[(i + n - 1) % n], p[i], p[(i + 1) % n]);
                    (b[0] - a[0]) * (c[1] - b[1]) - (b[1] - a[1]) * (c[0] - b[0]) < -1e-12
                })
            })
            .count();
        assert_eq!(nonconvex, 4);
    }
}
