//! The advancing-front meshing loop.
//!
//! A run scatters seed triangles over the zero level set and then works
//! through the boundary edges in batches. Within a batch the edges are far
//! enough apart that their new triangles cannot interact, so the
//! field-heavy part (frame, prediction, projection) runs in parallel on an
//! immutable snapshot. The results are then committed one by one: each edge
//! first tries to close onto an existing vertex, otherwise its projected
//! prediction is checked for overlap and inserted. Rejected edges are
//! retried a few times and then frozen as permanent boundary.

use std::collections::{BTreeMap, HashSet, VecDeque};
use std::f64::consts::TAU;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::field::{project_to_surface, CountingField, QueryCounts, ScalarField, EPS_SURFACE, MAX_PROJECTION_ITERS};
use crate::geom::{orthonormal_basis, Aabb, Point3};
use crate::halfedge::{HalfedgeId, HalfedgeMesh, MeshError, VertexId};
use crate::kdtree::KdTree;
use crate::mlp::MlpError;
use crate::overlap::{check_against_mesh, select_existing_vertex, Candidate, OverlapKind, OverlapParams};
use crate::predictor::{apply_prediction, build_frame, BoundaryEdgeFrame, PredictorChoice, VertexPredictor};

#[derive(Debug, Error)]
pub enum MesherError {
    #[error("invalid parameters: {0}")]
    Params(String),
    #[error("no surface found in the bounding box")]
    NoSurface,
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Predictor(#[from] MlpError),
    #[error("thread pool: {0}")]
    Threads(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeshingParams {
    /// Circumradius of the default triangle.
    pub r_d: f64,
    /// Number of seed triangles wanted.
    pub seeds: usize,
    /// Seed candidates drawn per wanted seed.
    pub oversample: usize,
    /// Projection steps applied to seed candidates.
    pub projection_rounds: usize,
    /// Minimum distance between edge midpoints in one batch.
    pub batch_sep: f64,
    /// Minimum distance between seed centers.
    pub d_min: f64,
    pub t_v: f64,
    pub t_near: f64,
    pub max_steps: usize,
    /// How many times a rejected edge is retried before being frozen.
    pub retries: u32,
    pub rng_seed: u64,
    pub predictor: PredictorChoice,
    /// Run the structural validator after every batch (slow).
    pub validate_each_step: bool,
}

impl MeshingParams {
    pub fn new(r_d: f64) -> Self {
        Self {
            r_d,
            seeds: 32,
            oversample: 10,
            projection_rounds: 5,
            batch_sep: 3.0 * r_d,
            d_min: 3.0 * r_d,
            t_v: 0.5 * r_d,
            t_near: 0.5 * r_d,
            max_steps: 1_000_000,
            retries: 2,
            rng_seed: 0,
            predictor: PredictorChoice::Analytic,
            validate_each_step: false,
        }
    }

    /// Keeps the thresholds tied to `r_d` consistent after changing it.
    pub fn with_r_d(mut self, r_d: f64) -> Self {
        let fresh = Self::new(r_d);
        self.r_d = r_d;
        self.batch_sep = fresh.batch_sep;
        self.d_min = fresh.d_min;
        self.t_v = fresh.t_v;
        self.t_near = fresh.t_near;
        self
    }

    pub fn validate(&self) -> Result<(), MesherError> {
        let positive = [
            ("r_d", self.r_d),
            ("batch_sep", self.batch_sep),
            ("d_min", self.d_min),
            ("t_v", self.t_v),
            ("t_near", self.t_near),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(MesherError::Params(format!("{name} must be positive, got {v}")));
            }
        }
        for (name, v) in [("seeds", self.seeds), ("oversample", self.oversample), ("projection_rounds", self.projection_rounds)] {
            if v == 0 {
                return Err(MesherError::Params(format!("{name} must be at least 1")));
            }
        }
        Ok(())
    }

    pub fn overlap(&self) -> OverlapParams {
        OverlapParams { r_d: self.r_d, t_near: self.t_near, t_v: self.t_v }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub seed_faces: usize,
    pub faces_inserted: usize,
    /// Faces closed onto an existing vertex.
    pub merges: usize,
    /// Overlap rejections by kind, plus topological ones as `non_manifold`.
    pub rejections: BTreeMap<String, usize>,
    pub frozen_edges: usize,
    pub remaining_boundary_edges: usize,
    /// New vertices whose post-projection did not reach the surface.
    pub non_projected: usize,
    /// Edges where the predictor fell back to the default prediction.
    pub predictor_fallbacks: usize,
    pub steps: usize,
    pub queries: QueryCounts,
    pub wall_time_s: f64,
}

impl RunReport {
    fn reject(&mut self, what: &str) {
        *self.rejections.entry(what.to_string()).or_default() += 1;
    }
}

/// Apex that closes `h` when its boundary loop is a three-edge hole (not
/// the rim of an isolated triangle); such a hole admits no other filling.
fn triangular_hole(mesh: &HalfedgeMesh, h: HalfedgeId) -> Option<VertexId> {
    let n1 = mesh.boundary_next(h)?;
    let n2 = mesh.boundary_next(n1)?;
    let lone_face = mesh.face(mesh.twin(h)) == mesh.face(mesh.twin(n1)) && mesh.face(mesh.twin(n1)) == mesh.face(mesh.twin(n2));
    (!lone_face && mesh.target(n2) == mesh.origin(h) && mesh.boundary_next(n2) == Some(h))
        .then(|| mesh.target(n1))
        .filter(|&c| mesh.can_close_with(h, c).is_ok())
}

fn kind_name(kind: OverlapKind) -> &'static str {
    match kind {
        OverlapKind::None => "none",
        OverlapKind::VertexInTriangle => "vertex_in_triangle",
        OverlapKind::TriangleContained => "triangle_contained",
        OverlapKind::EdgeIntersection => "edge_intersection",
        OverlapKind::ParallelProximity => "parallel_proximity",
        OverlapKind::VertexProximity => "vertex_proximity",
    }
}

/// Scatters seed triangles over the surface inside `bbox`.
pub fn initialize<F: ScalarField + ?Sized>(
    field: &F,
    bbox: &Aabb,
    params: &MeshingParams,
    rng: &mut ChaCha8Rng,
) -> Result<HalfedgeMesh, MesherError> {
    if !bbox.is_valid() {
        return Err(MesherError::Params("bounding box is empty".into()));
    }
    let n = params.seeds * params.oversample;
    let samples: Vec<Point3> = (0..n)
        .map(|_| {
            Point3::new(
                rng.gen_range(bbox.min.x..bbox.max.x),
                rng.gen_range(bbox.min.y..bbox.max.y),
                rng.gen_range(bbox.min.z..bbox.max.z),
            )
        })
        .collect();
    let projected: Vec<Option<Point3>> = samples
        .par_iter()
        .map(|p| {
            let r = project_to_surface(field, p, params.projection_rounds, EPS_SURFACE);
            (r.converged && bbox.contains(&r.point)).then_some(r.point)
        })
        .collect();
    if projected.iter().all(Option::is_none) {
        return Err(MesherError::NoSurface);
    }
    let mut centers: KdTree = KdTree::new();
    let mut kept = Vec::new();
    for q in projected.into_iter().flatten() {
        if kept.len() >= params.seeds {
            break;
        }
        let crowded = centers.nearest(&q).is_some_and(|(_, d)| d < params.d_min);
        if !crowded {
            centers.insert(q, kept.len());
            kept.push(q);
        }
    }
    let angles: Vec<f64> = kept.iter().map(|_| rng.gen_range(0.0..TAU)).collect();
    let triangles: Vec<Option<[Point3; 3]>> = kept
        .par_iter()
        .zip(&angles)
        .map(|(q, phi)| {
            let g = field.gradient_sample(q);
            if g.degenerate {
                return None;
            }
            let (t1, t2) = orthonormal_basis(&g.normal());
            Some([0.0, 1.0, 2.0].map(|k| {
                let a = phi + k * TAU / 3.0;
                let v = q + (t1 * a.cos() + t2 * a.sin()) * params.r_d;
                project_to_surface(field, &v, 1, 0.0).point
            }))
        })
        .collect();
    let mut mesh = HalfedgeMesh::new();
    for [p0, p1, p2] in triangles.into_iter().flatten() {
        // a seed that collapses under projection is simply skipped
        let _ = mesh.add_isolated_triangle(p0, p1, p2);
    }
    if mesh.num_faces() == 0 {
        return Err(MesherError::NoSurface);
    }
    Ok(mesh)
}

/// Greedy FIFO scan: takes each live edge whose midpoint keeps `batch_sep`
/// from every edge already taken. Stale entries are dropped.
pub fn select_batch(mesh: &HalfedgeMesh, queue: &mut VecDeque<HalfedgeId>, batch_sep: f64) -> Vec<HalfedgeId> {
    let sep2 = batch_sep * batch_sep;
    let mut taken: Vec<(HalfedgeId, Point3)> = Vec::new();
    let mut rest = VecDeque::with_capacity(queue.len());
    for h in queue.drain(..) {
        if !mesh.is_boundary(h) {
            continue;
        }
        let m = Point3::from((mesh.position(mesh.origin(h)).coords + mesh.position(mesh.target(h)).coords) * 0.5);
        if taken.iter().all(|(_, q)| (q - m).norm_squared() >= sep2) {
            taken.push((h, m));
        } else {
            rest.push_back(h);
        }
    }
    *queue = rest;
    taken.into_iter().map(|(h, _)| h).collect()
}

/// Result of the parallel phase for one edge.
enum Proposal {
    Ready { frame: BoundaryEdgeFrame, point: Point3, projected: bool, fallback: bool },
    Failed,
}

struct Front {
    queue: VecDeque<HalfedgeId>,
    queued: HashSet<HalfedgeId>,
    frozen: HashSet<HalfedgeId>,
    attempts: BTreeMap<HalfedgeId, u32>,
}

impl Front {
    fn new(mesh: &HalfedgeMesh) -> Self {
        let queue: VecDeque<HalfedgeId> = mesh.boundary_edges().into();
        let queued = queue.iter().copied().collect();
        Self { queue, queued, frozen: HashSet::new(), attempts: BTreeMap::new() }
    }

    fn push(&mut self, h: HalfedgeId) {
        if !self.frozen.contains(&h) && self.queued.insert(h) {
            self.queue.push_back(h);
        }
    }

    fn push_face_boundary(&mut self, mesh: &HalfedgeMesh, f: usize) {
        for h in mesh.face_halfedges(f) {
            let t = mesh.twin(h);
            if mesh.is_boundary(t) {
                self.push(t);
            }
        }
    }

    /// Re-queues a rejected edge or freezes it once its budget is spent.
    fn retry(&mut self, h: HalfedgeId, budget: u32) -> bool {
        let n = self.attempts.entry(h).or_default();
        *n += 1;
        if *n > budget {
            self.freeze(h);
            false
        } else {
            self.push(h);
            true
        }
    }

    fn freeze(&mut self, h: HalfedgeId) {
        self.frozen.insert(h);
    }
}

/// Runs the mesher on the current rayon pool.
pub fn run<F: ScalarField + ?Sized>(
    field: &F,
    bbox: &Aabb,
    params: &MeshingParams,
) -> Result<(HalfedgeMesh, RunReport), MesherError> {
    params.validate()?;
    let predictor = params.predictor.instantiate()?;
    run_with_predictor(field, bbox, params, predictor.as_ref())
}

/// Runs the mesher on a dedicated pool of `threads` workers.
pub fn run_with_threads<F: ScalarField + ?Sized>(
    field: &F,
    bbox: &Aabb,
    params: &MeshingParams,
    threads: usize,
) -> Result<(HalfedgeMesh, RunReport), MesherError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| MesherError::Threads(e.to_string()))?;
    pool.install(|| run(field, bbox, params))
}

pub fn run_with_predictor<F: ScalarField + ?Sized>(
    field: &F,
    bbox: &Aabb,
    params: &MeshingParams,
    predictor: &dyn VertexPredictor,
) -> Result<(HalfedgeMesh, RunReport), MesherError> {
    params.validate()?;
    let start = Instant::now();
    let counted = CountingField::new(field);
    let mut rng = ChaCha8Rng::seed_from_u64(params.rng_seed);
    let mut mesh = initialize(&counted, bbox, params, &mut rng)?;
    let mut report = RunReport { seed_faces: mesh.num_faces(), ..RunReport::default() };
    let mut index: KdTree = KdTree::build(mesh.positions().enumerate().map(|(i, p)| (p, i)));
    let mut front = Front::new(&mesh);
    let overlap = params.overlap();

    while report.steps < params.max_steps {
        let batch = select_batch(&mesh, &mut front.queue, params.batch_sep);
        if batch.is_empty() {
            break;
        }
        for h in &batch {
            front.queued.remove(h);
        }
        report.steps += 1;

        let proposals: Vec<Proposal> = {
            let snapshot = &mesh;
            let field: &dyn ScalarField = &counted;
            batch
                .par_iter()
                .map(|&h| {
                    let Ok(frame) = build_frame(snapshot, h, params.r_d) else { return Proposal::Failed };
                    let Ok(out) = predictor.predict(field, &frame) else { return Proposal::Failed };
                    let raw = apply_prediction(&frame, &out.prediction);
                    let proj = project_to_surface(field, &raw, MAX_PROJECTION_ITERS, EPS_SURFACE);
                    Proposal::Ready { frame, point: proj.point, projected: proj.converged, fallback: out.fallback.is_some() }
                })
                .collect()
        };

        for (&h, proposal) in batch.iter().zip(proposals) {
            if !mesh.is_boundary(h) {
                continue;
            }
            let Proposal::Ready { frame, point, projected, fallback } = proposal else {
                front.freeze(h);
                continue;
            };
            report.predictor_fallbacks += fallback as usize;

            if let Some(v) = triangular_hole(&mesh, h).or_else(|| select_existing_vertex(&mesh, &index, &frame, &overlap)) {
                let f = mesh.insert_face_existing_vertex(h, v)?;
                report.merges += 1;
                report.faces_inserted += 1;
                front.push_face_boundary(&mesh, f);
                continue;
            }
            if !bbox.contains(&point) {
                front.freeze(h);
                continue;
            }
            let cand = Candidate::on_edge(&mesh, frame.a_id, frame.b_id, point, None);
            let verdict = check_against_mesh(&mesh, &index, &cand, &overlap);
            if verdict.overlapping {
                report.reject(kind_name(verdict.kind));
                front.retry(h, params.retries);
                continue;
            }
            match mesh.insert_face_new_vertex(h, point) {
                Ok(f) => {
                    let v = mesh.num_vertices() - 1;
                    index.insert(point, v);
                    report.faces_inserted += 1;
                    report.non_projected += !projected as usize;
                    front.push_face_boundary(&mesh, f);
                }
                Err(_) => {
                    report.reject("non_manifold");
                    front.retry(h, params.retries);
                }
            }
        }
        if params.validate_each_step {
            let r = mesh.validate();
            assert!(r.is_clean(), "mesh invalid after step {}: {:?}", report.steps, r.violations);
        }
    }

    report.frozen_edges = front.frozen.iter().filter(|&&h| mesh.is_boundary(h)).count();
    report.remaining_boundary_edges = mesh.num_boundary_edges();
    report.queries = counted.counts();
    report.wall_time_s = start.elapsed().as_secs_f64();
    Ok((mesh, report))
}
