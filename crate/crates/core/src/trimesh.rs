//! Plain indexed triangle list, the exchange format between the meshers,
//! file I/O and the metrics.

use std::collections::HashSet;

use crate::geom::{triangle_area, Point3};
use crate::halfedge::{HalfedgeMesh, MeshError};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TriMesh {
    pub positions: Vec<Point3>,
    pub triangles: Vec<[u32; 3]>,
}

impl TriMesh {
    pub fn new(positions: Vec<Point3>, triangles: Vec<[u32; 3]>) -> Self {
        Self { positions, triangles }
    }

    pub fn num_vertices(&self) -> usize {
        self.positions.len()
    }

    pub fn num_faces(&self) -> usize {
        self.triangles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    pub fn triangle(&self, f: usize) -> [Point3; 3] {
        self.triangles[f].map(|v| self.positions[v as usize])
    }

    pub fn area(&self, f: usize) -> f64 {
        let [a, b, c] = self.triangle(f);
        triangle_area(&a, &b, &c)
    }

    /// Number of distinct undirected edges.
    pub fn num_edges(&self) -> usize {
        let mut edges = HashSet::with_capacity(self.triangles.len() * 2);
        for t in &self.triangles {
            for (a, b) in [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])] {
                edges.insert((a.min(b), a.max(b)));
            }
        }
        edges.len()
    }

    pub fn euler_characteristic(&self) -> i64 {
        self.num_vertices() as i64 - self.num_edges() as i64 + self.num_faces() as i64
    }

    pub fn to_halfedge(&self) -> Result<HalfedgeMesh, MeshError> {
        let faces: Vec<[usize; 3]> = self.triangles.iter().map(|t| t.map(|v| v as usize)).collect();
        HalfedgeMesh::from_indexed_triangles(&self.positions, &faces)
    }
}

impl From<&HalfedgeMesh> for TriMesh {
    fn from(mesh: &HalfedgeMesh) -> Self {
        mesh.to_indexed_triangles()
    }
}
