//! Local overlap predicates for candidate triangles.
//!
//! Before a triangle is added at a boundary edge it is compared against
//! every committed face near it. Five situations count as overlap: a new
//! vertex sitting on an existing triangle, an existing vertex sitting on
//! the candidate, crossing (or nearly touching) edges, a nearly parallel
//! triangle hovering just above another, and a new vertex crowding an
//! existing one. "Near" is always measured against `t_near`.
//!
//! Faces that share vertices with the candidate legitimately touch it, so
//! the tests involving shared vertices are skipped; faces sharing a whole
//! edge are only checked for folding back onto the candidate.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{centroid, triangle_normal, Point3, Vec3};
use crate::halfedge::{FaceId, HalfedgeMesh, VertexId};
use crate::kdtree::KdTree;
use crate::predictor::BoundaryEdgeFrame;

/// Relative squared-sine below which two segments count as parallel.
pub const PARALLEL_EPS: f64 = 1e-12;
/// Faces sharing an edge with the candidate may not fold closer than this
/// dihedral opening (60 degrees).
pub const MIN_FOLD_COS: f64 = 0.5;
/// Non-adjacent faces closer to parallel than 30 degrees are checked for
/// vertical proximity.
pub const PARALLEL_COS: f64 = 0.866_025_403_784_438_6;
/// Relative area (against the squared longest edge) below which a
/// triangle is treated as degenerate.
pub const DEGENERATE_RATIO: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum OverlapError {
    #[error("triangle is degenerate")]
    DegenerateTriangle,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OverlapParams {
    pub r_d: f64,
    pub t_near: f64,
    pub t_v: f64,
}

impl OverlapParams {
    /// Defaults `t_near = t_v = r_d / 2`.
    pub fn new(r_d: f64) -> Self {
        Self { r_d, t_near: 0.5 * r_d, t_v: 0.5 * r_d }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OverlapKind {
    None,
    VertexInTriangle,
    TriangleContained,
    EdgeIntersection,
    ParallelProximity,
    VertexProximity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OverlapVerdict {
    pub overlapping: bool,
    pub kind: OverlapKind,
}

impl OverlapVerdict {
    pub const NONE: Self = Self { overlapping: false, kind: OverlapKind::None };

    pub fn hit(kind: OverlapKind) -> Self {
        Self { overlapping: kind != OverlapKind::None, kind }
    }
}

/// A proposed triangle `(v0, v1, v2)`; `v2` is the predicted vertex.
///
/// `ids` names vertices that already exist in the mesh and `fixed` marks
/// edges (`v0v1`, `v1v2`, `v2v0`) that are already committed; both only
/// relax the tests.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    pub points: [Point3; 3],
    pub ids: [Option<VertexId>; 3],
    pub fixed: [bool; 3],
}

impl Candidate {
    /// Pure geometry, no relation to any mesh.
    pub fn free(points: [Point3; 3]) -> Self {
        Self { points, ids: [None; 3], fixed: [false; 3] }
    }

    /// A triangle over committed edge `(a, b)` to a new or existing vertex.
    pub fn on_edge(mesh: &HalfedgeMesh, a: VertexId, b: VertexId, apex: Point3, apex_id: Option<VertexId>) -> Self {
        let fixed = match apex_id {
            Some(c) => [true, mesh.find_halfedge(b, c).is_some(), mesh.find_halfedge(c, a).is_some()],
            None => [true, false, false],
        };
        Self { points: [mesh.position(a), mesh.position(b), apex], ids: [Some(a), Some(b), apex_id], fixed }
    }
}

/// A committed face.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FaceRef {
    pub points: [Point3; 3],
    pub ids: [Option<VertexId>; 3],
}

impl FaceRef {
    pub fn free(points: [Point3; 3]) -> Self {
        Self { points, ids: [None; 3] }
    }

    pub fn from_mesh(mesh: &HalfedgeMesh, f: FaceId) -> Self {
        Self { points: mesh.face_positions(f), ids: mesh.face_vertices(f).map(Some) }
    }
}

pub fn is_degenerate(tri: &[Point3; 3]) -> bool {
    let [a, b, c] = tri;
    let longest = [(b - a).norm_squared(), (c - b).norm_squared(), (a - c).norm_squared()]
        .into_iter()
        .fold(0.0, f64::max);
    let twice_area = triangle_normal(a, b, c).norm();
    !(longest > 0.0 && twice_area > 2.0 * DEGENERATE_RATIO * longest)
}

/// Point-in-triangle proximity: `p` is within `t_near` of the triangle's
/// plane and its projection lies inside the triangle grown by `t_near`
/// along each edge's inward normal.
pub fn point_in_triangle_proximity(p: &Point3, tri: &[Point3; 3], t_near: f64) -> Result<bool, OverlapError> {
    proximity_with_margins(p, tri, t_near, [t_near; 3])
}

/// [`point_in_triangle_proximity`] with a separate outward margin per edge
/// (`v0v1`, `v1v2`, `v2v0`).
pub fn proximity_with_margins(p: &Point3, tri: &[Point3; 3], t_near: f64, margins: [f64; 3]) -> Result<bool, OverlapError> {
    if is_degenerate(tri) {
        return Err(OverlapError::DegenerateTriangle);
    }
    let [a, b, c] = tri;
    let n = triangle_normal(a, b, c).normalize();
    let height = (p - a).dot(&n);
    if height.abs() >= t_near {
        return Ok(false);
    }
    let q = p - n * height;
    let inside = [(a, b), (b, c), (c, a)].into_iter().zip(margins).all(|((u, v), margin)| {
        let inward = n.cross(&(v - u)).normalize();
        (q - u).dot(&inward) > -margin
    });
    Ok(inside)
}

/// Closest points between the lines through two segments; true when both
/// closest points fall inside the segments and are at most `t_near` apart.
/// Parallel segments fall back to endpoint-to-segment distances.
pub fn segment_intersection(e1: (&Point3, &Point3), e2: (&Point3, &Point3), t_near: f64) -> bool {
    let (p1, q1) = e1;
    let (p2, q2) = e2;
    let d1 = q1 - p1;
    let d2 = q2 - p2;
    let r = p1 - p2;
    let a = d1.dot(&d1);
    let b = d1.dot(&d2);
    let c = d2.dot(&d2);
    let det = a * c - b * b;
    if det.abs() <= PARALLEL_EPS * a * c {
        let dist = [
            point_segment_distance(p1, p2, q2),
            point_segment_distance(q1, p2, q2),
            point_segment_distance(p2, p1, q1),
            point_segment_distance(q2, p1, q1),
        ]
        .into_iter()
        .fold(f64::INFINITY, f64::min);
        return dist <= t_near;
    }
    let d = d1.dot(&r);
    let e = d2.dot(&r);
    let s = (b * e - c * d) / det;
    let t = (a * e - b * d) / det;
    if !(0.0..=1.0).contains(&s) || !(0.0..=1.0).contains(&t) {
        return false;
    }
    ((p1 + d1 * s) - (p2 + d2 * t)).norm() <= t_near
}

pub fn point_segment_distance(p: &Point3, a: &Point3, b: &Point3) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_squared();
    let t = if len2 > 0.0 { ((p - a).dot(&ab) / len2).clamp(0.0, 1.0) } else { 0.0 };
    (p - (a + ab * t)).norm()
}

fn same(x: Option<VertexId>, y: Option<VertexId>) -> bool {
    matches!((x, y), (Some(i), Some(j)) if i == j)
}

/// Runs the overlap checks in a fixed order; the first hit names the kind.
pub fn triangle_overlap(cand: &Candidate, face: &FaceRef, params: &OverlapParams) -> OverlapVerdict {
    use OverlapKind::*;
    if is_degenerate(&cand.points) {
        return OverlapVerdict::hit(VertexInTriangle);
    }
    let t_near = params.t_near;
    let shared_in_face = |i: usize| (0..3).any(|j| same(cand.ids[i], face.ids[j]));
    let shared_in_cand = |j: usize| (0..3).any(|i| same(cand.ids[i], face.ids[j]));
    let shared = (0..3).filter(|&i| shared_in_face(i)).count();
    let face_ok = !is_degenerate(&face.points);
    let p = cand.points[2];

    if shared == 3 {
        return OverlapVerdict::hit(TriangleContained);
    }
    if shared == 2 {
        if face_ok && folds_over(cand, face) {
            return OverlapVerdict::hit(EdgeIntersection);
        }
    } else {
        // (b) candidate vertices against the face. Committed edge endpoints
        // are exempt; an existing vertex reused as apex must not sit on the
        // face but gets no extra margin.
        if face_ok {
            for i in [2, 0, 1] {
                let exempt = shared_in_face(i) || (i < 2 && cand.ids[i].is_some());
                let margin = if cand.ids[i].is_some() { 0.0 } else { t_near };
                if !exempt && proximity_with_margins(&cand.points[i], &face.points, t_near, [margin; 3]).unwrap_or(false) {
                    return OverlapVerdict::hit(VertexInTriangle);
                }
            }
        }
        // (c) face vertices against the candidate; committed candidate
        // edges get no margin since the mesh already continues behind them
        let margins = cand.fixed.map(|f| if f { 0.0 } else { t_near });
        for j in 0..3 {
            if !shared_in_cand(j) && proximity_with_margins(&face.points[j], &cand.points, t_near, margins).unwrap_or(false)
            {
                return OverlapVerdict::hit(TriangleContained);
            }
        }
        // (d) edges that do not meet at a shared vertex
        for i in 0..3 {
            if cand.fixed[i] {
                continue;
            }
            let (ci, cj) = (i, (i + 1) % 3);
            for j in 0..3 {
                let (fi, fj) = (j, (j + 1) % 3);
                let touching = [ci, cj].iter().any(|&x| same(cand.ids[x], face.ids[fi]) || same(cand.ids[x], face.ids[fj]));
                if !touching
                    && segment_intersection(
                        (&cand.points[ci], &cand.points[cj]),
                        (&face.points[fi], &face.points[fj]),
                        t_near,
                    )
                {
                    return OverlapVerdict::hit(EdgeIntersection);
                }
            }
        }
        // (e) near-parallel triangles hovering over each other
        if shared == 0 && face_ok && parallel_proximity(&cand.points, &face.points, t_near) {
            return OverlapVerdict::hit(ParallelProximity);
        }
    }
    // (f) predicted vertex crowding an unrelated vertex
    if !shared_in_face(2) {
        for j in 0..3 {
            if !shared_in_cand(j) && (face.points[j] - p).norm() < t_near {
                return OverlapVerdict::hit(VertexProximity);
            }
        }
    }
    OverlapVerdict::NONE
}

/// For two triangles sharing an edge: whether the opening angle between
/// them is below 60 degrees.
fn folds_over(cand: &Candidate, face: &FaceRef) -> bool {
    let c_only = (0..3).find(|&i| !(0..3).any(|j| same(cand.ids[i], face.ids[j])));
    let f_only = (0..3).find(|&j| !(0..3).any(|i| same(cand.ids[i], face.ids[j])));
    let (Some(ci), Some(fj)) = (c_only, f_only) else { return true };
    let u = cand.points[(ci + 1) % 3];
    let v = cand.points[(ci + 2) % 3];
    let axis = (v - u).normalize();
    let wing = |x: &Point3| {
        let d = x - u;
        d - axis * d.dot(&axis)
    };
    let w1 = wing(&cand.points[ci]);
    let w2 = wing(&face.points[fj]);
    let denom = w1.norm() * w2.norm();
    denom == 0.0 || w1.dot(&w2) / denom > MIN_FOLD_COS
}

/// Planes within 30 degrees of parallel and either centroid hovering
/// within `t_near` directly above the other triangle.
pub fn parallel_proximity(t1: &[Point3; 3], t2: &[Point3; 3], t_near: f64) -> bool {
    let n1 = triangle_normal(&t1[0], &t1[1], &t1[2]).normalize();
    let n2 = triangle_normal(&t2[0], &t2[1], &t2[2]).normalize();
    if n1.dot(&n2).abs() <= PARALLEL_COS {
        return false;
    }
    let c1 = centroid(&t1[0], &t1[1], &t1[2]);
    let c2 = centroid(&t2[0], &t2[1], &t2[2]);
    proximity_with_margins(&c1, t2, t_near, [0.0; 3]).unwrap_or(false)
        || proximity_with_margins(&c2, t1, t_near, [0.0; 3]).unwrap_or(false)
}

/// Faces with at least one vertex within `radius` of `center`, sorted.
pub fn local_face_set(mesh: &HalfedgeMesh, index: &KdTree, center: &Point3, radius: f64) -> Vec<FaceId> {
    let mut faces = BTreeSet::new();
    index.radius_query_with(center, radius, |_, v| faces.extend(mesh.vertex_faces(v)));
    faces.into_iter().collect()
}

/// Search radius around a candidate's centroid that reaches every face
/// able to touch it: at least `2 r_d`, more for stretched candidates.
pub fn candidate_search_radius(points: &[Point3; 3], r_d: f64) -> (Point3, f64) {
    let c = centroid(&points[0], &points[1], &points[2]);
    let reach = points.iter().map(|p| (p - c).norm()).fold(0.0, f64::max);
    (c, (2.0 * r_d).max(reach + 3f64.sqrt() * r_d))
}

/// Runs [`triangle_overlap`] against every face near the candidate.
pub fn check_against_mesh(
    mesh: &HalfedgeMesh,
    index: &KdTree,
    cand: &Candidate,
    params: &OverlapParams,
) -> OverlapVerdict {
    if is_degenerate(&cand.points) {
        return OverlapVerdict::hit(OverlapKind::VertexInTriangle);
    }
    let (center, radius) = candidate_search_radius(&cand.points, params.r_d);
    for f in local_face_set(mesh, index, &center, radius) {
        let verdict = triangle_overlap(cand, &FaceRef::from_mesh(mesh, f), params);
        if verdict.overlapping {
            return verdict;
        }
    }
    OverlapVerdict::NONE
}

/// Existing vertex to close `frame`'s boundary edge with, if any.
///
/// Candidates lie within `2 r_d` of the edge midpoint, in front of the edge,
/// within `t_v` of the adjacent face's plane, on the mesh boundary, and
/// produce a triangle that is both topologically insertable and free of
/// overlap. The one closest to the midpoint wins (ties by id).
pub fn select_existing_vertex(
    mesh: &HalfedgeMesh,
    index: &KdTree,
    frame: &BoundaryEdgeFrame,
    params: &OverlapParams,
) -> Option<VertexId> {
    let v_hat = frame.v_d.normalize();
    let mut candidates: Vec<(f64, VertexId)> = Vec::new();
    index.radius_query_with(&frame.m, 2.0 * params.r_d, |p, v| {
        if v == frame.a_id || v == frame.b_id {
            return;
        }
        let rel = p - frame.m;
        if rel.dot(&v_hat) <= 0.0 || rel.dot(&frame.n_f).abs() >= params.t_v {
            return;
        }
        candidates.push((rel.norm(), v));
    });
    candidates.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
    candidates.into_iter().map(|(_, v)| v).find(|&v| {
        on_boundary(mesh, v)
            && mesh.can_close_with(frame.halfedge, v).is_ok()
            && !check_against_mesh(mesh, index, &Candidate::on_edge(mesh, frame.a_id, frame.b_id, mesh.position(v), Some(v)), params)
                .overlapping
    })
}

fn on_boundary(mesh: &HalfedgeMesh, v: VertexId) -> bool {
    mesh.vertex_neighbors(v).any(|w| {
        mesh.find_halfedge(v, w).is_some_and(|h| mesh.is_boundary(h))
            || mesh.find_halfedge(w, v).is_some_and(|h| mesh.is_boundary(h))
    })
}

/// Unit normal of a triangle, `None` when degenerate.
pub fn unit_normal(tri: &[Point3; 3]) -> Option<Vec3> {
    (!is_degenerate(tri)).then(|| triangle_normal(&tri[0], &tri[1], &tri[2]).normalize())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(x: f64, y: f64, z: f64) -> Point3 {
        Point3::new(x, y, z)
    }

    fn unit_tri() -> [Point3; 3] {
        [p(0.0, 0.0, 0.0), p(1.0, 0.0, 0.0), p(0.0, 1.0, 0.0)]
    }

    #[test]
    fn pit_basic() {
        let t = unit_tri();
        let c = centroid(&t[0], &t[1], &t[2]);
        assert!(point_in_triangle_proximity(&c, &t, 0.1).unwrap());
        assert!(!point_in_triangle_proximity(&(c + Vec3::z() * 1.0), &t, 0.1).unwrap());
        // just outside an edge but within t_near
        assert!(point_in_triangle_proximity(&p(0.5, -0.05, 0.0), &t, 0.1).unwrap());
        assert!(!point_in_triangle_proximity(&p(0.5, -0.15, 0.0), &t, 0.1).unwrap());
        assert_eq!(
            point_in_triangle_proximity(&c, &[p(0.0, 0.0, 0.0), p(1.0, 0.0, 0.0), p(2.0, 0.0, 0.0)], 0.1),
            Err(OverlapError::DegenerateTriangle)
        );
    }

    #[test]
    fn segments() {
        assert!(segment_intersection((&p(-1.0, 0.0, 0.0), &p(1.0, 0.0, 0.0)), (&p(0.0, -1.0, 0.0), &p(0.0, 1.0, 0.0)), 0.01));
        assert!(!segment_intersection((&p(0.0, 0.0, 0.0), &p(1.0, 0.0, 0.0)), (&p(0.0, 1.0, 0.0), &p(1.0, 1.0, 0.0)), 0.1));
        // collinear overlap through the parallel fallback
        assert!(segment_intersection((&p(0.0, 0.0, 0.0), &p(1.0, 0.0, 0.0)), (&p(0.5, 0.0, 0.0), &p(2.0, 0.0, 0.0)), 0.1));
        // skew, closest points inside, gap 0.05
        assert!(segment_intersection((&p(-1.0, 0.0, 0.0), &p(1.0, 0.0, 0.0)), (&p(0.0, -1.0, 0.05), &p(0.0, 1.0, 0.05)), 0.1));
        // closest points of the lines outside the segments
        assert!(!segment_intersection((&p(-1.0, 0.0, 0.0), &p(1.0, 0.0, 0.0)), (&p(3.0, -1.0, 0.0), &p(3.0, 1.0, 0.0)), 0.1));
    }

    #[test]
    fn adjacent_flat_continuation_is_fine() {
        // existing face (b, a, o) below the edge, candidate above, 179 degrees open
        let (a, b) = (p(0.0, 0.0, 0.0), p(1.0, 0.0, 0.0));
        let o = p(0.5, -0.866, 0.0);
        let angle = 179f64.to_radians();
        let apex = p(0.5, -0.866 * angle.cos(), 0.866 * angle.sin());
        let face = FaceRef { points: [b, a, o], ids: [Some(1), Some(0), Some(2)] };
        let cand = Candidate { points: [a, b, apex], ids: [Some(0), Some(1), None], fixed: [true, false, false] };
        let params = OverlapParams::new(0.5);
        assert_eq!(triangle_overlap(&cand, &face, &params), OverlapVerdict::NONE);
        // folded almost flat onto the face
        let folded = p(0.5, -0.8, 0.1);
        let cand = Candidate { points: [a, b, folded], ..cand };
        assert_eq!(triangle_overlap(&cand, &face, &params).kind, OverlapKind::EdgeIntersection);
    }

    #[test]
    fn vertex_at_centroid() {
        let t = [p(0.0, 0.0, 0.0), p(1.0, 0.0, 0.0), p(0.5, 0.8, 0.0)];
        let c = centroid(&t[0], &t[1], &t[2]);
        let cand = Candidate::free([p(0.5, 3.0, 1.0), p(1.5, 3.0, 1.0), c]);
        let verdict = triangle_overlap(&cand, &FaceRef::free(t), &OverlapParams::new(0.2));
        assert_eq!(verdict.kind, OverlapKind::VertexInTriangle);
        assert!(verdict.overlapping);
    }

    #[test]
    fn offset_congruent_triangle_is_flagged() {
        let t = [p(0.0, 0.0, 0.0), p(1.0, 0.0, 0.0), p(0.5, 0.8, 0.0)];
        let params = OverlapParams::new(0.2);
        let lifted = t.map(|q| q + Vec3::z() * (params.t_near / 2.0));
        assert!(triangle_overlap(&Candidate::free(lifted), &FaceRef::free(t), &params).overlapping);
        assert!(parallel_proximity(&lifted, &t, params.t_near));
        let far = t.map(|q| q + Vec3::z() * (params.t_near * 2.0));
        assert!(!parallel_proximity(&far, &t, params.t_near));
        assert!(!triangle_overlap(&Candidate::free(far), &FaceRef::free(t), &params).overlapping);
    }

    #[test]
    fn degenerate_candidate_is_conservative() {
        let cand = Candidate::free([p(0.0, 0.0, 0.0), p(1.0, 0.0, 0.0), p(2.0, 0.0, 0.0)]);
        let v = triangle_overlap(&cand, &FaceRef::free([p(9.0, 9.0, 9.0), p(10.0, 9.0, 9.0), p(9.0, 10.0, 9.0)]), &OverlapParams::new(0.1));
        assert_eq!(v, OverlapVerdict::hit(OverlapKind::VertexInTriangle));
    }

    #[test]
    fn vertex_proximity_behind_a_short_edge() {
        // every other test is exempt for the face across the edge; only the
        // apex crowding the opposite vertex remains
        let (a, b) = (p(0.0, 0.0, 0.0), p(0.1, 0.0, 0.0));
        let face = FaceRef { points: [b, a, p(0.05, -0.05, 0.0)], ids: [Some(1), Some(0), Some(2)] };
        let cand = Candidate { points: [a, b, p(0.05, 0.05, 0.0)], ids: [Some(0), Some(1), None], fixed: [true, false, false] };
        let v = triangle_overlap(&cand, &face, &OverlapParams::new(0.4));
        assert_eq!(v.kind, OverlapKind::VertexProximity);
    }
}
