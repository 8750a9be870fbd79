//! Advancing-front meshing of signed distance fields.
//!
//! Seed triangles are placed on the zero level set of a [`field::ScalarField`]
//! and grown outward along their boundary edges until the surface is covered.
//! Each new vertex comes from a pluggable [`predictor::VertexPredictor`]; a
//! set of local overlap predicates decides whether the proposed triangle is
//! inserted, merged onto an existing vertex or rejected.
//!
//! A marching-cubes extractor and a metrics suite are included so the two
//! meshing strategies can be compared on the same field.

pub mod config;
pub mod field;
pub mod geom;
pub mod halfedge;
pub mod io;
pub mod kdtree;
pub mod marching_cubes;
pub mod mesher;
pub mod metrics;
pub mod mlp;
pub mod overlap;
pub mod predictor;
pub mod scene;
pub mod trimesh;

pub use field::{CountingField, QueryCounter, QueryCounts, ScalarField, Sdf};
pub use geom::{Aabb, Point3, Vec3};
pub use halfedge::HalfedgeMesh;
pub use mesher::{MeshingParams, RunReport};
pub use trimesh::TriMesh;
