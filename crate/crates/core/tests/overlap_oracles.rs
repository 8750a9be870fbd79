mod support;

use frontmesh::overlap::{
    point_in_triangle_proximity, proximity_with_margins, segment_intersection, triangle_overlap, Candidate, FaceRef, OverlapKind,
    OverlapParams,
};
use frontmesh::Point3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use support::{free_overlap_oracle, is_degenerate_oracle, near_plane, pit_oracle, point, segment_oracle, triangle, unit, Decided};

const CASES: usize = 10_000;
const MARGIN: f64 = 1e-9;

/// Runs `case` until `CASES` cases have landed clear of the decision
/// boundary; returns (agreements, positives).
fn run_filtered(mut case: impl FnMut(&mut ChaCha8Rng) -> Option<(bool, Decided)>, seed: u64) -> (usize, usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut agree, mut positives, mut kept) = (0, 0, 0);
    while kept < CASES {
        let Some((got, oracle)) = case(&mut rng) else { continue };
        if oracle.slack.abs() < MARGIN {
            continue;
        }
        kept += 1;
        agree += (got == oracle.value) as usize;
        positives += oracle.value as usize;
    }
    (agree, positives)
}

#[test]
fn point_in_triangle_matches_barycentric_oracle() {
    let t_near = 0.1;
    let (agree, positives) = run_filtered(
        |rng| {
            let tri = triangle(rng, Point3::origin(), 0.5);
            let p = near_plane(rng, &tri);
            Some((point_in_triangle_proximity(&p, &tri, t_near).unwrap(), pit_oracle(&p, &tri, t_near, [t_near; 3])))
        },
        1,
    );
    assert_eq!(agree, CASES);
    assert!(positives > CASES / 20, "too few positive cases: {positives}");
}

#[test]
fn per_edge_margins_match_oracle() {
    let t_near = 0.1;
    let (agree, _) = run_filtered(
        |rng| {
            let tri = triangle(rng, Point3::origin(), 0.5);
            let p = near_plane(rng, &tri);
            let margins = [0.0, t_near, rng.gen_range(0.0..t_near)];
            Some((proximity_with_margins(&p, &tri, t_near, margins).unwrap(), pit_oracle(&p, &tri, t_near, margins)))
        },
        2,
    );
    assert_eq!(agree, CASES);
}

#[test]
fn segment_intersection_matches_least_squares_oracle() {
    let t_near = 0.05;
    let (agree, positives) = run_filtered(
        |rng| {
            let (a, b, c, d) = (point(rng, 0.5), point(rng, 0.5), point(rng, 0.5), point(rng, 0.5));
            let oracle = segment_oracle((&a, &b), (&c, &d), t_near)?;
            Some((segment_intersection((&a, &b), (&c, &d), t_near), oracle))
        },
        3,
    );
    assert_eq!(agree, CASES);
    assert!(positives > 0);
}

#[test]
fn segment_intersection_matches_constructed_closest_points() {
    // Lines built so that their closest points and gap are known exactly.
    let t_near = 0.05;
    let (agree, positives) = run_filtered(
        |rng| {
            let d1 = unit(rng);
            let d2 = unit(rng);
            let n = d1.cross(&d2);
            if n.norm() < 0.05 {
                return None;
            }
            let n = n.normalize();
            let x = point(rng, 1.0);
            let (s, t) = (rng.gen_range(-0.5..1.5), rng.gen_range(-0.5..1.5));
            let gap = rng.gen_range(0.0..2.0 * t_near);
            let (l1, l2) = (rng.gen_range(0.1..1.0), rng.gen_range(0.1..1.0));
            let p1 = x - d1 * (s * l1);
            let p2 = x + n * gap - d2 * (t * l2);
            let (q1, q2) = (p1 + d1 * l1, p2 + d2 * l2);
            let slack = (t_near - gap).min(s).min(1.0 - s).min(t).min(1.0 - t);
            // construction round-off is far below the margin
            if slack.abs() < 1e-6 {
                return None;
            }
            Some((segment_intersection((&p1, &q1), (&p2, &q2), t_near), Decided { value: slack >= 0.0, slack }))
        },
        4,
    );
    assert_eq!(agree, CASES);
    assert!(positives > CASES / 10);
}

#[test]
fn parallel_segments_use_endpoint_distances() {
    let a = Point3::new(0.0, 0.0, 0.0);
    let b = Point3::new(1.0, 0.0, 0.0);
    for (offset, shift, expected) in [(0.04, 0.5, true), (0.06, 0.5, false), (0.0, 1.03, true), (0.0, 1.2, false)] {
        let c = Point3::new(shift, offset, 0.0);
        let d = Point3::new(shift + 1.0, offset, 0.0);
        assert_eq!(segment_intersection((&a, &b), (&c, &d), 0.05), expected, "offset {offset} shift {shift}");
    }
}

#[test]
fn triangle_overlap_matches_composed_oracle() {
    let params = OverlapParams { r_d: 0.2, t_near: 0.1, t_v: 0.1 };
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut kept = 0;
    let mut kinds = std::collections::BTreeMap::new();
    while kept < CASES {
        let cand = triangle(&mut rng, Point3::origin(), 0.3);
        // near-parallel offset copies exercise the hovering test
        let roll: f64 = rng.gen();
        let face = if roll < 0.15 {
            // a face starting just beyond the predicted vertex
            let centre = Point3::from((cand[0].coords + cand[1].coords + cand[2].coords) / 3.0);
            let away = (cand[2] - centre).normalize();
            let f0 = cand[2] + unit(&mut rng) * rng.gen_range(0.0..0.15);
            let f1 = f0 + away * 0.3 + point(&mut rng, 0.15).coords;
            let f2 = f0 + away * 0.3 + point(&mut rng, 0.15).coords;
            [f0, f1, f2]
        } else if roll < 0.35 {
            let lift = unit(&mut rng) * rng.gen_range(0.0..0.2);
            let jitter = 0.02;
            cand.map(|p| p + lift + point(&mut rng, jitter).coords)
        } else {
            let center = point(&mut rng, 0.3);
            triangle(&mut rng, center, 0.3)
        };
        if is_degenerate_oracle(&face) {
            continue;
        }
        let (expected, slack) = free_overlap_oracle(&cand, &face, params.t_near);
        if slack < MARGIN {
            continue;
        }
        kept += 1;
        let got = triangle_overlap(&Candidate::free(cand), &FaceRef::free(face), &params);
        assert_eq!(got.kind, expected, "case {kept}: {cand:?} vs {face:?}");
        assert_eq!(got.overlapping, expected != OverlapKind::None);
        *kinds.entry(expected).or_insert(0) += 1;
    }
    // For free triangles a predicted vertex within t_near of a face vertex
    // always sits inside the grown face first, so vertex proximity only
    // surfaces once shared vertices exempt that test (see the fixtures).
    assert!(!kinds.contains_key(&OverlapKind::VertexProximity));
    for kind in [OverlapKind::None, OverlapKind::VertexInTriangle, OverlapKind::TriangleContained, OverlapKind::EdgeIntersection] {
        assert!(kinds.contains_key(&kind), "{kind:?} never produced: {kinds:?}");
    }
}

#[test]
fn verdict_is_symmetric_for_free_triangles_without_vertex_rule() {
    // Swapping roles exchanges (b) and (c); only (f) is one-sided.
    let params = OverlapParams { r_d: 0.2, t_near: 0.1, t_v: 0.1 };
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..2000 {
        let t1 = triangle(&mut rng, Point3::origin(), 0.3);
        let center = point(&mut rng, 0.3);
        let t2 = triangle(&mut rng, center, 0.3);
        let (k12, s12) = free_overlap_oracle(&t1, &t2, params.t_near);
        let (k21, s21) = free_overlap_oracle(&t2, &t1, params.t_near);
        if s12 < MARGIN || s21 < MARGIN || k12 == OverlapKind::VertexProximity || k21 == OverlapKind::VertexProximity {
            continue;
        }
        let a = triangle_overlap(&Candidate::free(t1), &FaceRef::free(t2), &params).overlapping;
        let b = triangle_overlap(&Candidate::free(t2), &FaceRef::free(t1), &params).overlapping;
        assert_eq!(a, b);
    }
}
