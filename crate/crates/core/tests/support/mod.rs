//! Brute-force oracles and shared fixtures for the integration tests.
//!
//! The oracles deliberately avoid the library's own formulas: point-in-
//! triangle uses barycentric coordinates in a 2D chart, segment closest
//! points come from an SVD least-squares solve, and every nearest-neighbour
//! query is a linear scan.
#![allow(dead_code)]

use std::cell::Cell;

use frontmesh::field::Sdf;
use frontmesh::overlap::{OverlapKind, DEGENERATE_RATIO, PARALLEL_COS};
use frontmesh::{Point3, Vec3};
use nalgebra::{Matrix3x2, Vector2};
use rand::Rng;

/// Decision plus its distance from the decision boundary (`slack > 0` means
/// the predicate holds). Callers skip cases with `|slack|` below a margin.
#[derive(Debug, Clone, Copy)]
pub struct Decided {
    pub value: bool,
    pub slack: f64,
}

impl Decided {
    fn from_slack(slack: f64) -> Self {
        Self { value: slack > 0.0, slack }
    }
}

/// Point-in-triangle proximity with one outward margin per edge
/// (`v0v1`, `v1v2`, `v2v0`): height below `t_near` and every edge distance
/// of the in-plane projection above `-margin`.
pub fn pit_oracle(p: &Point3, tri: &[Point3; 3], t_near: f64, margins: [f64; 3]) -> Decided {
    let [a, b, c] = *tri;
    // orthonormal chart of the triangle plane by Gram-Schmidt
    let e1 = (b - a).normalize();
    let w = (c - a) - e1 * (c - a).dot(&e1);
    let e2 = w.normalize();
    let normal = e1.cross(&e2);
    let chart = |x: &Point3| Vector2::new((x - a).dot(&e1), (x - a).dot(&e2));
    let (pa, pb, pc, q) = (Vector2::zeros(), chart(&b), chart(&c), chart(p));
    let height = (p - a).dot(&normal);
    let cross = |u: Vector2<f64>, v: Vector2<f64>| u.x * v.y - u.y * v.x;
    let area2 = cross(pb - pa, pc - pa);
    // barycentric weight of each vertex and the distance to its opposite edge
    let lambda = [cross(pb - q, pc - q) / area2, cross(pc - q, pa - q) / area2, cross(pa - q, pb - q) / area2];
    let opposite_len = [(pc - pb).norm(), (pa - pc).norm(), (pb - pa).norm()];
    // edge v0v1 is opposite vertex 2, v1v2 opposite 0, v2v0 opposite 1
    let edge_of_vertex = [1, 2, 0];
    let mut slack = t_near - height.abs();
    for i in 0..3 {
        let altitude = area2 / opposite_len[i];
        slack = slack.min(lambda[i] * altitude + margins[edge_of_vertex[i]]);
    }
    Decided::from_slack(slack)
}

/// Closest points of the two carrier lines via least squares; the
/// predicate holds when both parameters lie in `[0, 1]` and the points are
/// within `t_near`. Returns `None` for nearly parallel segments.
pub fn segment_oracle(e1: (&Point3, &Point3), e2: (&Point3, &Point3), t_near: f64) -> Option<Decided> {
    let d1 = e1.1 - e1.0;
    let d2 = e2.1 - e2.0;
    let sin2 = d1.cross(&d2).norm_squared() / (d1.norm_squared() * d2.norm_squared());
    if sin2 < 1e-6 {
        return None;
    }
    let m = Matrix3x2::from_columns(&[d1, -d2]);
    let svd = m.svd(true, true);
    let st = svd.solve(&(e2.0 - e1.0), 1e-15).ok()?;
    let (s, t) = (st[0], st[1]);
    let gap = ((e1.0 + d1 * s) - (e2.0 + d2 * t)).norm();
    let slack = (t_near - gap).min(s).min(1.0 - s).min(t).min(1.0 - t);
    // `<= t_near` holds at the boundary, treat zero slack as a hit
    Some(Decided { value: slack >= 0.0, slack })
}

fn unit_normal(t: &[Point3; 3]) -> Vec3 {
    (t[1] - t[0]).cross(&(t[2] - t[0])).normalize()
}

pub fn is_degenerate_oracle(t: &[Point3; 3]) -> bool {
    let longest = [(t[1] - t[0]).norm_squared(), (t[2] - t[1]).norm_squared(), (t[0] - t[2]).norm_squared()]
        .into_iter()
        .fold(0.0, f64::max);
    (t[1] - t[0]).cross(&(t[2] - t[0])).norm() <= 2.0 * DEGENERATE_RATIO * longest
}

/// Overlap verdict for two unrelated triangles (no shared vertices, no
/// committed edges), with the smallest slack seen along the way.
pub fn free_overlap_oracle(cand: &[Point3; 3], face: &[Point3; 3], t_near: f64) -> (OverlapKind, f64) {
    let slack = Cell::new(f64::INFINITY);
    let tighten = |x: f64| slack.set(slack.get().min(x.abs()));
    let note = |d: Decided| {
        tighten(d.slack);
        d.value
    };
    let full = [t_near; 3];
    let vertex_in = [2, 0, 1].iter().any(|&i| note(pit_oracle(&cand[i], face, t_near, full)));
    let contained = (0..3).any(|j| note(pit_oracle(&face[j], cand, t_near, full)));
    let mut crossing = false;
    for i in 0..3 {
        for j in 0..3 {
            match segment_oracle((&cand[i], &cand[(i + 1) % 3]), (&face[j], &face[(j + 1) % 3]), t_near) {
                Some(d) => crossing |= note(d),
                None => tighten(0.0),
            }
        }
    }
    let cos = unit_normal(cand).dot(&unit_normal(face)).abs();
    tighten(cos - PARALLEL_COS);
    let centroid = |t: &[Point3; 3]| Point3::from((t[0].coords + t[1].coords + t[2].coords) / 3.0);
    let parallel = cos > PARALLEL_COS && {
        let a = note(pit_oracle(&centroid(cand), face, t_near, [0.0; 3]));
        let b = note(pit_oracle(&centroid(face), cand, t_near, [0.0; 3]));
        a || b
    };
    let crowded = (0..3).any(|j| {
        let d = (face[j] - cand[2]).norm();
        tighten(d - t_near);
        d < t_near
    });
    let kind = if vertex_in {
        OverlapKind::VertexInTriangle
    } else if contained {
        OverlapKind::TriangleContained
    } else if crossing {
        OverlapKind::EdgeIntersection
    } else if parallel {
        OverlapKind::ParallelProximity
    } else if crowded {
        OverlapKind::VertexProximity
    } else {
        OverlapKind::None
    };
    (kind, slack.get())
}

pub fn point(rng: &mut impl Rng, half: f64) -> Point3 {
    Point3::new(rng.gen_range(-half..half), rng.gen_range(-half..half), rng.gen_range(-half..half))
}

pub fn unit(rng: &mut impl Rng) -> Vec3 {
    loop {
        let v = point(rng, 1.0).coords;
        if v.norm() > 0.1 && v.norm() < 1.0 {
            return v.normalize();
        }
    }
}

pub fn triangle(rng: &mut impl Rng, center: Point3, size: f64) -> [Point3; 3] {
    loop {
        let t = [center + point(rng, size).coords, center + point(rng, size).coords, center + point(rng, size).coords];
        // keep clear of the degeneracy threshold
        let n = (t[1] - t[0]).cross(&(t[2] - t[0])).norm();
        let longest = [(t[1] - t[0]).norm(), (t[2] - t[1]).norm(), (t[0] - t[2]).norm()].into_iter().fold(0.0, f64::max);
        if n > 1e-3 * longest * longest {
            return t;
        }
    }
}

/// Random point around the triangle, mostly within reach of its plane.
pub fn near_plane(rng: &mut impl Rng, tri: &[Point3; 3]) -> Point3 {
    let [a, b, c] = *tri;
    let n = (b - a).cross(&(c - a)).normalize();
    let (u, v) = (rng.gen_range(-0.4..1.2), rng.gen_range(-0.4..1.2));
    a + (b - a) * u + (c - a) * v + n * rng.gen_range(-0.2..0.2)
}

/// Index of the nearest point (smallest index on ties) and its distance.
pub fn nearest_linear(points: &[Point3], q: &Point3) -> (usize, f64) {
    let mut best = (usize::MAX, f64::INFINITY);
    for (i, p) in points.iter().enumerate() {
        let d = (p - q).norm();
        if d < best.1 {
            best = (i, d);
        }
    }
    best
}

pub fn radius_linear(points: &[Point3], q: &Point3, r: f64) -> Vec<usize> {
    (0..points.len()).filter(|&i| (points[i] - q).norm() <= r).collect()
}

pub fn chamfer_linear(from: &[Point3], to: &[Point3]) -> f64 {
    let mut sum = 0.0;
    for p in from {
        sum += nearest_linear(to, p).1;
    }
    sum / from.len() as f64
}

/// (accuracy, completeness) at `t` by double loop.
pub fn inlier_fractions_linear(pred: &[Point3], reference: &[Point3], t: f64) -> (f64, f64) {
    let frac = |a: &[Point3], b: &[Point3]| a.iter().filter(|p| nearest_linear(b, p).1 <= t).count() as f64 / a.len() as f64;
    (frac(pred, reference), frac(reference, pred))
}

pub fn sphere() -> Sdf {
    Sdf::sphere(Point3::origin(), 0.3)
}

pub fn torus() -> Sdf {
    Sdf::torus(Point3::origin(), 0.4, 0.15)
}

/// Two spheres of radius 0.3 at x = +-0.2, blended over 0.1.
pub fn blend() -> Sdf {
    Sdf::SmoothUnion { children: vec![Sdf::sphere(Point3::new(-0.2, 0.0, 0.0), 0.3), Sdf::sphere(Point3::new(0.2, 0.0, 0.0), 0.3)], blend: 0.1 }
}
