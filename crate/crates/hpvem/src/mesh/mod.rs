//! Polygonal meshes with hanging nodes and the slit domain's duplicated
//! boundary. Meshes are immutable; refinement returns a new mesh.

mod build;
mod io;
mod refine;
mod validate;

pub use build::*;
pub use io::*;
pub use refine::*;
pub use validate::*;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::poly::geometry;
use crate::Point;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VertexTag {
    Interior,
    Dirichlet,
    Neumann,
    SlitLower,
    SlitUpper,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeTag {
    Interior,
    Dirichlet,
    Neumann,
}

/// Side of the slit a boundary point belongs to; `None` away from the slit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    None,
    Lower,
    Upper,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    /// (0,1)²
    UnitSquare,
    /// (-1,1)² without [0,1]×[-1,0]
    LShape,
    /// (-1,1)² cut along [0,1]×{0}
    Slit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Cartesian,
    StructuredTriangles,
}

/// How boundary edges are split between Dirichlet and Neumann parts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryRule {
    AllDirichlet,
    /// Dirichlet on the two sides meeting at the re-entrant corner of the L-shape.
    ReentrantDirichlet,
    /// Neumann on the lower side of the slit, Dirichlet elsewhere.
    SlitLowerNeumann,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ElementKind {
    GeometricSquare,
    GeometricTriangle,
    Generic,
}

impl Domain {
    pub fn name(self) -> &'static str {
        match self {
            Domain::UnitSquare => "unit_square",
            Domain::LShape => "lshape",
            Domain::Slit => "slit",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "unit_square" => Ok(Domain::UnitSquare),
            "lshape" => Ok(Domain::LShape),
            "slit" => Ok(Domain::Slit),
            _ => Err(Error::UnsupportedMesh(format!("unknown domain {s}"))),
        }
    }

    pub fn area(self) -> f64 {
        match self {
            Domain::UnitSquare => 1.0,
            Domain::LShape => 3.0,
            Domain::Slit => 4.0,
        }
    }

    /// Boundary segments, the slit counted once.
    pub fn boundary_segments(self) -> Vec<[Point; 2]> {
        let loop_of = |v: &[Point]| (0..v.len()).map(|i| [v[i], v[(i + 1) % v.len()]]).collect::<Vec<_>>();
        match self {
            Domain::UnitSquare => loop_of(&[[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]),
            Domain::LShape => loop_of(&[[-1.0, -1.0], [0.0, -1.0], [0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [-1.0, 1.0]]),
            Domain::Slit => {
                let mut s = loop_of(&[[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]]);
                s.push([[0.0, 0.0], [1.0, 0.0]]);
                s
            }
        }
    }

    pub fn default_rule(self) -> BoundaryRule {
        match self {
            Domain::UnitSquare => BoundaryRule::AllDirichlet,
            Domain::LShape => BoundaryRule::ReentrantDirichlet,
            Domain::Slit => BoundaryRule::SlitLowerNeumann,
        }
    }
}

impl BoundaryRule {
    pub fn name(self) -> &'static str {
        match self {
            BoundaryRule::AllDirichlet => "all_dirichlet",
            BoundaryRule::ReentrantDirichlet => "reentrant_dirichlet",
            BoundaryRule::SlitLowerNeumann => "slit_lower_neumann",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "all_dirichlet" => Ok(BoundaryRule::AllDirichlet),
            "reentrant_dirichlet" => Ok(BoundaryRule::ReentrantDirichlet),
            "slit_lower_neumann" => Ok(BoundaryRule::SlitLowerNeumann),
            _ => Err(Error::Format(format!("unknown boundary rule {s}"))),
        }
    }

    fn classify(self, mid: Point, side: Side) -> EdgeTag {
        let tol = 1e-12;
        match self {
            BoundaryRule::AllDirichlet => EdgeTag::Dirichlet,
            BoundaryRule::ReentrantDirichlet => {
                if (mid[1].abs() < tol && mid[0] > 0.0) || (mid[0].abs() < tol && mid[1] < 0.0) {
                    EdgeTag::Dirichlet
                } else {
                    EdgeTag::Neumann
                }
            }
            BoundaryRule::SlitLowerNeumann => {
                if side == Side::Lower {
                    EdgeTag::Neumann
                } else {
                    EdgeTag::Dirichlet
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vertex {
    pub id: usize,
    pub x: f64,
    pub y: f64,
    pub tag: VertexTag,
}

impl Vertex {
    pub fn pos(&self) -> Point {
        [self.x, self.y]
    }

    pub fn side(&self) -> Side {
        match self.tag {
            VertexTag::SlitLower => Side::Lower,
            VertexTag::SlitUpper => Side::Upper,
            _ => Side::None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub id: usize,
    /// Endpoints; the edge is oriented from `v[0]` to `v[1]`.
    pub v: [usize; 2],
    pub length: f64,
    /// Fixed unit normal, the tangent rotated clockwise.
    pub normal: Point,
    pub neighbors: (usize, Option<usize>),
    pub tag: EdgeTag,
    pub side: Side,
}

impl Edge {
    pub fn is_boundary(&self) -> bool {
        self.neighbors.1.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Element {
    pub id: usize,
    /// Counterclockwise vertex loop, hanging nodes included.
    pub vertices: Vec<usize>,
    /// `edges[i]` joins `vertices[i]` and `vertices[i + 1]`.
    pub edges: Vec<usize>,
    /// +1 when the loop runs along the edge orientation, -1 otherwise.
    pub edge_sign: Vec<f64>,
    /// Loop positions of the corners; straight side k runs from corner k to corner k + 1.
    pub corners: Vec<usize>,
    pub diameter: f64,
    pub centroid: Point,
    pub area: f64,
    pub kind: ElementKind,
    pub kappa: f64,
}

impl Element {
    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    /// Local edge positions of each straight side.
    pub fn straight_sides(&self) -> Vec<Vec<usize>> {
        let n = self.vertices.len();
        let k = self.corners.len();
        (0..k)
            .map(|s| {
                let (a, b) = (self.corners[s], self.corners[(s + 1) % k]);
                let len = (b + n - a) % n;
                let len = if len == 0 { n } else { len };
                (0..len).map(|j| (a + j) % n).collect()
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolyMesh {
    pub vertices: Vec<Vertex>,
    pub edges: Vec<Edge>,
    pub elements: Vec<Element>,
    pub domain: Domain,
    pub rule: BoundaryRule,
    vertex_elements: Vec<Vec<usize>>,
}

const COLLINEAR_TOL: f64 = 1e-10;

impl PolyMesh {
    /// Assemble a mesh from vertex coordinates and counterclockwise element loops.
    pub fn from_loops(coords: &[Point], loops: Vec<Vec<usize>>, kappa: Vec<f64>, domain: Domain, rule: BoundaryRule) -> Result<Self> {
        if loops.len() != kappa.len() {
            return Err(Error::Format("one kappa value per element required".into()));
        }
        if let Some(k) = kappa.iter().find(|k| !(k.is_finite() && **k > 0.0)) {
            return Err(Error::Format(format!("kappa must be positive, got {k}")));
        }
        let mut elements = Vec::with_capacity(loops.len());
        let mut edges: Vec<Edge> = Vec::new();
        let mut edge_of: HashMap<(usize, usize), usize> = HashMap::new();
        for (id, (vl, kap)) in loops.into_iter().zip(kappa).enumerate() {
            if vl.len() < 3 {
                return Err(Error::Geometry(format!("element {id} has fewer than 3 vertices")));
            }
            if let Some(&v) = vl.iter().find(|&&v| v >= coords.len()) {
                return Err(Error::Format(format!("element {id} references missing vertex {v}")));
            }
            let pts: Vec<Point> = vl.iter().map(|&v| coords[v]).collect();
            let area = geometry::signed_area(&pts);
            if area <= 0.0 {
                return Err(Error::Geometry(format!("element {id} is not counterclockwise")));
            }
            if !geometry::is_simple(&pts) {
                return Err(Error::Geometry(format!("element {id} is not a simple polygon")));
            }
            let diameter = geometry::diameter(&pts);
            let n = vl.len();
            let corners: Vec<usize> = (0..n)
                .filter(|&i| {
                    let (a, b, c) = (pts[(i + n - 1) % n], pts[i], pts[(i + 1) % n]);
                    geometry::point_segment_distance(b, a, c) > COLLINEAR_TOL * diameter
                })
                .collect();
            let kind = match corners.len() {
                3 => ElementKind::GeometricTriangle,
                4 => ElementKind::GeometricSquare,
                _ => ElementKind::Generic,
            };
            let mut eids = Vec::with_capacity(n);
            let mut signs = Vec::with_capacity(n);
            for i in 0..n {
                let (a, b) = (vl[i], vl[(i + 1) % n]);
                let key = (a.min(b), a.max(b));
                match edge_of.get(&key) {
                    Some(&e) => {
                        let edge = &mut edges[e];
                        if edge.neighbors.1.is_some() || edge.v != [b, a] {
                            return Err(Error::Geometry(format!("edge {a}-{b} is shared inconsistently (element {id})")));
                        }
                        edge.neighbors.1 = Some(id);
                        eids.push(e);
                        signs.push(-1.0);
                    }
                    None => {
                        let (pa, pb) = (coords[a], coords[b]);
                        let length = geometry::dist(pa, pb);
                        let t = [(pb[0] - pa[0]) / length, (pb[1] - pa[1]) / length];
                        let e = edges.len();
                        edges.push(Edge {
                            id: e,
                            v: [a, b],
                            length,
                            normal: [t[1], -t[0]],
                            neighbors: (id, None),
                            tag: EdgeTag::Interior,
                            side: Side::None,
                        });
                        edge_of.insert(key, e);
                        eids.push(e);
                        signs.push(1.0);
                    }
                }
            }
            elements.push(Element {
                id,
                vertices: vl,
                edges: eids,
                edge_sign: signs,
                corners,
                diameter,
                centroid: geometry::centroid(&pts),
                area,
                kind,
                kappa: kap,
            });
        }
        for edge in edges.iter_mut().filter(|e| e.neighbors.1.is_none()) {
            let (pa, pb) = (coords[edge.v[0]], coords[edge.v[1]]);
            let mid = [0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])];
            if domain == Domain::Slit && mid[1].abs() < 1e-12 && mid[0] > 0.0 && pa[1].abs() < 1e-12 && pb[1].abs() < 1e-12 {
                let below = elements[edge.neighbors.0].centroid[1] < 0.0;
                edge.side = if below { Side::Lower } else { Side::Upper };
            }
            edge.tag = rule.classify(mid, edge.side);
        }
        let mut vertex_elements = vec![Vec::new(); coords.len()];
        for el in &elements {
            for &v in &el.vertices {
                vertex_elements[v].push(el.id);
            }
        }
        let mut tags = vec![VertexTag::Interior; coords.len()];
        for edge in edges.iter().filter(|e| e.is_boundary()) {
            for &v in &edge.v {
                let t = &mut tags[v];
                *t = match (edge.side, *t, edge.tag) {
                    (Side::Lower, _, _) => VertexTag::SlitLower,
                    (Side::Upper, _, _) => VertexTag::SlitUpper,
                    (_, VertexTag::SlitLower | VertexTag::SlitUpper, _) => *t,
                    (_, VertexTag::Dirichlet, _) | (_, _, EdgeTag::Dirichlet) => VertexTag::Dirichlet,
                    _ => VertexTag::Neumann,
                };
            }
        }
        // the slit tip belongs to both sides: keep it an ordinary boundary vertex
        for (v, t) in tags.iter_mut().enumerate() {
            if matches!(t, VertexTag::SlitLower | VertexTag::SlitUpper) && coords[v][0].abs() < 1e-12 {
                *t = VertexTag::Dirichlet;
            }
        }
        let vertices = coords
            .iter()
            .enumerate()
            .map(|(id, p)| Vertex {
                id,
                x: p[0],
                y: p[1],
                tag: tags[id],
            })
            .collect();
        Ok(Self {
            vertices,
            edges,
            elements,
            domain,
            rule,
            vertex_elements,
        })
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn n_elements(&self) -> usize {
        self.elements.len()
    }

    pub fn coords(&self) -> Vec<Point> {
        self.vertices.iter().map(Vertex::pos).collect()
    }

    pub fn element_points(&self, k: usize) -> Vec<Point> {
        self.elements[k].vertices.iter().map(|&v| self.vertices[v].pos()).collect()
    }

    /// Endpoints of local edge `i` of element `k` in loop order.
    pub fn local_edge_points(&self, k: usize, i: usize) -> (Point, Point) {
        let el = &self.elements[k];
        let n = el.vertices.len();
        (self.vertices[el.vertices[i]].pos(), self.vertices[el.vertices[(i + 1) % n]].pos())
    }

    pub fn edge_points(&self, e: usize) -> (Point, Point) {
        let ed = &self.edges[e];
        (self.vertices[ed.v[0]].pos(), self.vertices[ed.v[1]].pos())
    }

    pub fn elements_of_vertex(&self, v: usize) -> &[usize] {
        &self.vertex_elements[v]
    }

    pub fn h_max(&self) -> f64 {
        self.elements.iter().map(|e| e.diameter).fold(0.0, f64::max)
    }

    pub fn total_area(&self) -> f64 {
        self.elements.iter().map(|e| e.area).sum()
    }

    /// Boundary vertices with at least one incident Dirichlet edge.
    pub fn dirichlet_vertices(&self) -> Vec<bool> {
        let mut out = vec![false; self.vertices.len()];
        for e in self.edges.iter().filter(|e| e.tag == EdgeTag::Dirichlet) {
            out[e.v[0]] = true;
            out[e.v[1]] = true;
        }
        out
    }

    pub fn is_boundary_vertex(&self, v: usize) -> bool {
        self.vertices[v].tag != VertexTag::Interior
    }

    pub fn loops(&self) -> Vec<Vec<usize>> {
        self.elements.iter().map(|e| e.vertices.clone()).collect()
    }

    pub fn kappas(&self) -> Vec<f64> {
        self.elements.iter().map(|e| e.kappa).collect()
    }

    /// Elements having `vertex` in their loop, and the classification of
    /// their edges into patch-interior and patch-boundary edges.
    pub fn patch(&self, vertex: usize) -> PatchIndex {
        let elements = self.vertex_elements[vertex].clone();
        let mut edges: Vec<usize> = elements.iter().flat_map(|&k| self.elements[k].edges.iter().copied()).collect();
        edges.sort_unstable();
        edges.dedup();
        let inside = |k: Option<usize>| k.is_some_and(|k| elements.contains(&k));
        let (interior, boundary): (Vec<usize>, Vec<usize>) = edges
            .iter()
            .partition(|&&e| inside(Some(self.edges[e].neighbors.0)) && inside(self.edges[e].neighbors.1));
        PatchIndex {
            vertex,
            elements: elements.clone(),
            edges,
            interior_edges: interior,
            boundary_edges: boundary,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatchIndex {
    pub vertex: usize,
    pub elements: Vec<usize>,
    pub edges: Vec<usize>,
    pub interior_edges: Vec<usize>,
    pub boundary_edges: Vec<usize>,
}
