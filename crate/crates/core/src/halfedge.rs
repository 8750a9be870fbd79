//! Growable triangle mesh with half-edge connectivity.
//!
//! Every undirected edge is stored as two twinned half-edges. A half-edge
//! with no face is a *boundary* half-edge: it lies on the open side of an
//! edge that has exactly one incident face. Boundary half-edges are kept in
//! an explicit ordered set so the front of a growing mesh can be enumerated
//! cheaply, and boundary successors are found by rotating around the
//! shared vertex, which keeps loops well defined even at vertices where
//! several fronts touch.
//!
//! Identifiers are plain indices and stay valid for the life of the mesh.

use std::collections::{BTreeSet, HashMap, HashSet};

use thiserror::Error;

use crate::geom::{triangle_area, Point3};
use crate::trimesh::TriMesh;

pub type VertexId = usize;
pub type HalfedgeId = usize;
pub type FaceId = usize;

/// Faces with area at or below this are rejected as degenerate.
pub const MIN_FACE_AREA: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MeshError {
    #[error("triangle is degenerate")]
    Degenerate,
    #[error("half-edge {0} is not a boundary half-edge")]
    NotBoundary(HalfedgeId),
    #[error("unknown half-edge {0}")]
    UnknownHalfedge(HalfedgeId),
    #[error("unknown vertex {0}")]
    UnknownVertex(VertexId),
    #[error("face repeats vertex {0}")]
    RepeatedVertex(VertexId),
    #[error("edge {from}->{to} already has a face on that side")]
    NonManifold { from: VertexId, to: VertexId },
}

#[derive(Debug, Clone)]
struct Halfedge {
    origin: VertexId,
    target: VertexId,
    twin: HalfedgeId,
    next: Option<HalfedgeId>,
    face: Option<FaceId>,
}

#[derive(Debug, Clone)]
struct Vertex {
    position: Point3,
    outgoing: Vec<HalfedgeId>,
}

/// A closed cycle of boundary half-edges.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoundaryLoop {
    pub halfedges: Vec<HalfedgeId>,
}

impl BoundaryLoop {
    pub fn len(&self) -> usize {
        self.halfedges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.halfedges.is_empty()
    }
}

/// Outcome of [`HalfedgeMesh::validate`].
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<String>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

#[derive(Debug, Clone, Default)]
pub struct HalfedgeMesh {
    vertices: Vec<Vertex>,
    halfedges: Vec<Halfedge>,
    faces: Vec<HalfedgeId>,
    edges: HashMap<(VertexId, VertexId), HalfedgeId>,
    boundary: BTreeSet<HalfedgeId>,
}

impl HalfedgeMesh {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a mesh from an indexed triangle list, inserting faces in order.
    pub fn from_indexed_triangles(positions: &[Point3], faces: &[[usize; 3]]) -> Result<Self, MeshError> {
        let mut mesh = Self::new();
        for p in positions {
            mesh.add_vertex(*p);
        }
        for f in faces {
            mesh.insert_face(f[0], f[1], f[2])?;
        }
        Ok(mesh)
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_faces(&self) -> usize {
        self.faces.len()
    }

    pub fn num_halfedges(&self) -> usize {
        self.halfedges.len()
    }

    /// Number of undirected edges.
    pub fn num_edges(&self) -> usize {
        self.halfedges.len() / 2
    }

    pub fn num_boundary_edges(&self) -> usize {
        self.boundary.len()
    }

    /// `V - E + F`.
    pub fn euler_characteristic(&self) -> i64 {
        self.num_vertices() as i64 - self.num_edges() as i64 + self.num_faces() as i64
    }

    pub fn position(&self, v: VertexId) -> Point3 {
        self.vertices[v].position
    }

    pub fn positions(&self) -> impl ExactSizeIterator<Item = Point3> + '_ {
        self.vertices.iter().map(|v| v.position)
    }

    pub fn origin(&self, h: HalfedgeId) -> VertexId {
        self.halfedges[h].origin
    }

    pub fn target(&self, h: HalfedgeId) -> VertexId {
        self.halfedges[h].target
    }

    pub fn twin(&self, h: HalfedgeId) -> HalfedgeId {
        self.halfedges[h].twin
    }

    /// Next half-edge inside the same face; `None` on boundary half-edges.
    pub fn next(&self, h: HalfedgeId) -> Option<HalfedgeId> {
        self.halfedges[h].next
    }

    pub fn prev(&self, h: HalfedgeId) -> Option<HalfedgeId> {
        let n = self.next(h)?;
        self.next(n)
    }

    pub fn face(&self, h: HalfedgeId) -> Option<FaceId> {
        self.halfedges[h].face
    }

    pub fn is_boundary(&self, h: HalfedgeId) -> bool {
        h < self.halfedges.len() && self.halfedges[h].face.is_none()
    }

    pub fn find_halfedge(&self, from: VertexId, to: VertexId) -> Option<HalfedgeId> {
        self.edges.get(&(from, to)).copied()
    }

    pub fn face_halfedge(&self, f: FaceId) -> HalfedgeId {
        self.faces[f]
    }

    pub fn face_halfedges(&self, f: FaceId) -> [HalfedgeId; 3] {
        let h0 = self.faces[f];
        let h1 = self.halfedges[h0].next.expect("face half-edge");
        let h2 = self.halfedges[h1].next.expect("face half-edge");
        [h0, h1, h2]
    }

    pub fn face_vertices(&self, f: FaceId) -> [VertexId; 3] {
        self.face_halfedges(f).map(|h| self.halfedges[h].origin)
    }

    pub fn face_positions(&self, f: FaceId) -> [Point3; 3] {
        self.face_vertices(f).map(|v| self.vertices[v].position)
    }

    /// Faces incident to `v`, in order of half-edge creation.
    pub fn vertex_faces(&self, v: VertexId) -> impl Iterator<Item = FaceId> + '_ {
        self.vertices[v].outgoing.iter().filter_map(|&h| self.halfedges[h].face)
    }

    /// Vertices joined to `v` by an edge.
    pub fn vertex_neighbors(&self, v: VertexId) -> impl Iterator<Item = VertexId> + '_ {
        self.vertices[v].outgoing.iter().map(|&h| self.halfedges[h].target)
    }

    /// Boundary half-edges in id order.
    pub fn boundary_edges(&self) -> Vec<HalfedgeId> {
        self.boundary.iter().copied().collect()
    }

    /// The boundary half-edge that continues the front after `h`.
    pub fn boundary_next(&self, h: HalfedgeId) -> Option<HalfedgeId> {
        if !self.is_boundary(h) {
            return None;
        }
        let mut g = self.twin(h);
        // each step rotates one face around target(h); the fan is finite
        for _ in 0..=self.halfedges.len() {
            let t = self.twin(self.prev(g)?);
            if self.is_boundary(t) {
                return Some(t);
            }
            g = t;
        }
        None
    }

    pub fn boundary_loops(&self) -> Vec<BoundaryLoop> {
        let mut seen = HashSet::new();
        let mut loops = Vec::new();
        for &start in &self.boundary {
            if seen.contains(&start) {
                continue;
            }
            let mut halfedges = vec![start];
            seen.insert(start);
            let mut h = start;
            while let Some(n) = self.boundary_next(h) {
                if n == start || !seen.insert(n) {
                    break;
                }
                halfedges.push(n);
                h = n;
            }
            loops.push(BoundaryLoop { halfedges });
        }
        loops
    }

    pub fn add_vertex(&mut self, position: Point3) -> VertexId {
        self.vertices.push(Vertex { position, outgoing: Vec::new() });
        self.vertices.len() - 1
    }

    /// Moves a vertex; connectivity is unchanged.
    pub fn set_position(&mut self, v: VertexId, position: Point3) {
        self.vertices[v].position = position;
    }

    pub fn add_isolated_triangle(&mut self, p0: Point3, p1: Point3, p2: Point3) -> Result<FaceId, MeshError> {
        if !(triangle_area(&p0, &p1, &p2) > MIN_FACE_AREA) {
            return Err(MeshError::Degenerate);
        }
        let a = self.add_vertex(p0);
        let b = self.add_vertex(p1);
        let c = self.add_vertex(p2);
        self.insert_face(a, b, c)
    }

    /// Closes boundary half-edge `h` with a triangle to a new vertex at `p`.
    pub fn insert_face_new_vertex(&mut self, h: HalfedgeId, p: Point3) -> Result<FaceId, MeshError> {
        self.check_boundary(h)?;
        let (a, b) = (self.origin(h), self.target(h));
        if !(triangle_area(&self.position(a), &self.position(b), &p) > MIN_FACE_AREA) {
            return Err(MeshError::Degenerate);
        }
        let v = self.add_vertex(p);
        self.insert_face(a, b, v)
    }

    /// Closes boundary half-edge `h` with a triangle to existing vertex `v`.
    ///
    /// Connecting edges that already exist on the boundary are consumed, so
    /// one call can close one, two or three boundary edges.
    pub fn insert_face_existing_vertex(&mut self, h: HalfedgeId, v: VertexId) -> Result<FaceId, MeshError> {
        self.check_boundary(h)?;
        self.insert_face(self.origin(h), self.target(h), v)
    }

    /// Whether closing `h` with vertex `v` would succeed.
    pub fn can_close_with(&self, h: HalfedgeId, v: VertexId) -> Result<(), MeshError> {
        self.check_boundary(h)?;
        self.check_face(self.origin(h), self.target(h), v)
    }

    fn check_boundary(&self, h: HalfedgeId) -> Result<(), MeshError> {
        if h >= self.halfedges.len() {
            Err(MeshError::UnknownHalfedge(h))
        } else if self.halfedges[h].face.is_some() {
            Err(MeshError::NotBoundary(h))
        } else {
            Ok(())
        }
    }

    fn check_face(&self, a: VertexId, b: VertexId, c: VertexId) -> Result<(), MeshError> {
        for v in [a, b, c] {
            if v >= self.vertices.len() {
                return Err(MeshError::UnknownVertex(v));
            }
        }
        if a == b || a == c {
            return Err(MeshError::RepeatedVertex(a));
        }
        if b == c {
            return Err(MeshError::RepeatedVertex(b));
        }
        for (from, to) in [(a, b), (b, c), (c, a)] {
            if let Some(h) = self.find_halfedge(from, to) {
                if self.halfedges[h].face.is_some() {
                    return Err(MeshError::NonManifold { from, to });
                }
            }
        }
        Ok(())
    }

    /// Adds face `(a, b, c)` (counter-clockwise) between existing vertices.
    pub fn insert_face(&mut self, a: VertexId, b: VertexId, c: VertexId) -> Result<FaceId, MeshError> {
        self.check_face(a, b, c)?;
        let f = self.faces.len();
        let mut ring = [0; 3];
        for (slot, (from, to)) in ring.iter_mut().zip([(a, b), (b, c), (c, a)]) {
            *slot = match self.find_halfedge(from, to) {
                Some(h) => {
                    self.boundary.remove(&h);
                    self.halfedges[h].face = Some(f);
                    h
                }
                None => {
                    let h = self.halfedges.len();
                    let t = h + 1;
                    self.halfedges.push(Halfedge { origin: from, target: to, twin: t, next: None, face: Some(f) });
                    self.halfedges.push(Halfedge { origin: to, target: from, twin: h, next: None, face: None });
                    self.edges.insert((from, to), h);
                    self.edges.insert((to, from), t);
                    self.vertices[from].outgoing.push(h);
                    self.vertices[to].outgoing.push(t);
                    self.boundary.insert(t);
                    h
                }
            };
        }
        for i in 0..3 {
            self.halfedges[ring[i]].next = Some(ring[(i + 1) % 3]);
        }
        self.faces.push(ring[0]);
        Ok(f)
    }

    /// Checks every structural invariant and lists the violations.
    pub fn validate(&self) -> ValidationReport {
        let mut violations = Vec::new();
        let nh = self.halfedges.len();
        for (h, he) in self.halfedges.iter().enumerate() {
            let t = he.twin;
            if t >= nh || t == h || self.halfedges[t].origin != he.target || self.halfedges[t].target != he.origin {
                violations.push(format!("half-edge {h}: twin {t} is not its reverse"));
            }
            match (he.face, he.next) {
                (Some(f), Some(n1)) => {
                    let ok = (|| {
                        let n2 = self.halfedges.get(n1)?.next?;
                        let n3 = self.halfedges.get(n2)?.next?;
                        let chain = [n1, n2];
                        let same_face = chain.iter().all(|&x| self.halfedges[x].face == Some(f));
                        let linked = self.halfedges[n1].origin == he.target
                            && self.halfedges[n2].origin == self.halfedges[n1].target
                            && self.halfedges[n2].target == he.origin;
                        Some(n3 == h && same_face && linked)
                    })();
                    if ok != Some(true) {
                        violations.push(format!("half-edge {h}: face {f} is not a closed triangle"));
                    }
                    if f >= self.faces.len() {
                        violations.push(format!("half-edge {h}: unknown face {f}"));
                    }
                }
                (Some(f), None) => violations.push(format!("half-edge {h}: face {f} without successor")),
                (None, Some(_)) => violations.push(format!("half-edge {h}: boundary half-edge with successor")),
                (None, None) => {}
            }
            if self.edges.get(&(he.origin, he.target)) != Some(&h) {
                violations.push(format!("half-edge {h}: edge map disagrees"));
            }
        }
        if self.edges.len() != nh {
            violations.push(format!("edge map has {} entries for {nh} half-edges", self.edges.len()));
        }
        for (f, &h) in self.faces.iter().enumerate() {
            if h >= nh || self.halfedges[h].face != Some(f) {
                violations.push(format!("face {f}: half-edge {h} does not belong to it"));
            }
        }
        let actual: BTreeSet<HalfedgeId> = (0..nh).filter(|&h| self.halfedges[h].face.is_none()).collect();
        if actual != self.boundary {
            violations.push(format!(
                "boundary set has {} entries, {} half-edges have no face",
                self.boundary.len(),
                actual.len()
            ));
        }
        let mut listed = 0;
        for (v, vert) in self.vertices.iter().enumerate() {
            listed += vert.outgoing.len();
            if let Some(&h) = vert.outgoing.iter().find(|&&h| h >= nh || self.halfedges[h].origin != v) {
                violations.push(format!("vertex {v}: half-edge {h} does not start here"));
            }
        }
        if listed != nh {
            violations.push(format!("vertex lists hold {listed} of {nh} half-edges"));
        }
        ValidationReport { violations }
    }

    /// Compacted copy: only vertices used by faces, renumbered in order.
    pub fn to_indexed_triangles(&self) -> TriMesh {
        let mut remap = vec![u32::MAX; self.vertices.len()];
        let mut positions = Vec::new();
        let mut triangles = Vec::with_capacity(self.faces.len());
        for f in 0..self.faces.len() {
            let tri = self.face_vertices(f).map(|v| {
                if remap[v] == u32::MAX {
                    remap[v] = positions.len() as u32;
                    positions.push(self.vertices[v].position);
                }
                remap[v]
            });
            triangles.push(tri);
        }
        TriMesh::new(positions, triangles)
    }
}
