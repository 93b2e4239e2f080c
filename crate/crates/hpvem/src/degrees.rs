use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::PolyMesh;

pub const MAX_DEGREE: usize = 6;

/// Degree of accuracy per element; an edge carries the largest degree of
/// the elements it separates.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DegreeMap {
    pub elem: Vec<usize>,
    pub edge: Vec<usize>,
}

impl DegreeMap {
    pub fn new(mesh: &PolyMesh, elem: Vec<usize>) -> Result<Self> {
        if elem.len() != mesh.n_elements() {
            return Err(Error::Precondition("one degree per element required".into()));
        }
        if let Some(&p) = elem.iter().find(|&&p| !(1..=MAX_DEGREE).contains(&p)) {
            return Err(Error::Degree(p));
        }
        let edge = mesh
            .edges
            .iter()
            .map(|e| {
                let a = elem[e.neighbors.0];
                e.neighbors.1.map_or(a, |b| a.max(elem[b]))
            })
            .collect();
        Ok(Self { elem, edge })
    }

    pub fn uniform(mesh: &PolyMesh, p: usize) -> Result<Self> {
        Self::new(mesh, vec![p; mesh.n_elements()])
    }

    pub fn p_min(&self) -> usize {
        self.elem.iter().copied().min().unwrap_or(0)
    }

    pub fn p_max(&self) -> usize {
        self.elem.iter().copied().max().unwrap_or(0)
    }
}
