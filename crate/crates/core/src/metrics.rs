//! Evaluation suite: surface sampling, Chamfer-L1, accuracy/completeness/F1,
//! normal consistency, mesh statistics, hole statistics and SDF deviation.
//!
//! Every nearest-neighbour quantity goes through the exact [`KdTree`], so
//! the results match a brute-force double loop bit for bit.

use std::f64::consts::PI;
use std::fmt::Write as _;

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::field::{project_to_surface, QueryCounts, ScalarField, EPS_SURFACE, MAX_PROJECTION_ITERS};
use crate::geom::{triangle_angles, triangle_normal, Point3, Vec3};
use crate::halfedge::{HalfedgeMesh, MeshError};
use crate::kdtree::KdTree;
use crate::trimesh::TriMesh;

/// Inlier thresholds used for accuracy, completeness and F1.
pub const DEFAULT_THRESHOLDS: [f64; 3] = [0.001, 0.005, 0.01];
pub const DEFAULT_SAMPLES: usize = 20_000;
pub const ANGLE_BINS: usize = 36;
pub const AREA_BINS: usize = 50;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("mesh has no face with positive area")]
    EmptyMesh,
    #[error("point set is empty")]
    EmptyPoints,
    #[error("mesh is not manifold: {0}")]
    Mesh(#[from] MeshError),
}

/// Points on a surface with their unit normals.
#[derive(Debug, Clone, Default)]
pub struct SurfaceSamples {
    pub points: Vec<Point3>,
    pub normals: Vec<Vec3>,
}

/// Area-weighted face choice, uniform barycentric position, normal from the
/// face winding. Zero-area faces are never chosen.
pub fn sample_surface(mesh: &TriMesh, n: usize, rng: &mut impl Rng) -> Result<SurfaceSamples, MetricsError> {
    let areas: Vec<f64> = (0..mesh.num_faces()).map(|f| mesh.area(f)).collect();
    let pick = WeightedIndex::new(&areas).map_err(|_| MetricsError::EmptyMesh)?;
    let mut out = SurfaceSamples { points: Vec::with_capacity(n), normals: Vec::with_capacity(n) };
    for _ in 0..n {
        let f = pick.sample(rng);
        let [a, b, c] = mesh.triangle(f);
        let (r1, r2): (f64, f64) = (rng.gen(), rng.gen());
        let s = r1.sqrt();
        let (u, v) = (1.0 - s, s * (1.0 - r2));
        let w = 1.0 - u - v;
        out.points.push(Point3::from(a.coords * u + b.coords * v + c.coords * w));
        out.normals.push(triangle_normal(&a, &b, &c).normalize());
    }
    Ok(out)
}

/// Projects samples onto the zero level set and takes normals from the
/// field gradient.
pub fn project_samples(field: &(impl ScalarField + ?Sized), samples: &SurfaceSamples) -> SurfaceSamples {
    let (points, normals) = samples
        .points
        .par_iter()
        .map(|p| {
            let q = project_to_surface(field, p, MAX_PROJECTION_ITERS, EPS_SURFACE).point;
            let g = field.gradient_sample(&q).vector;
            (q, g.try_normalize(0.0).unwrap_or(Vec3::zeros()))
        })
        .unzip();
    SurfaceSamples { points, normals }
}

/// Distance from every point of `from` to its nearest neighbour in `to`.
fn nearest_distances(from: &[Point3], to: &[Point3]) -> Result<(Vec<f64>, Vec<usize>), MetricsError> {
    if from.is_empty() || to.is_empty() {
        return Err(MetricsError::EmptyPoints);
    }
    let tree = KdTree::build(to.iter().copied().enumerate().map(|(i, p)| (p, i)));
    Ok(from
        .par_iter()
        .map(|p| {
            let (i, d) = tree.nearest(p).expect("tree is not empty");
            (d, i)
        })
        .unzip())
}

/// Mean nearest-neighbour distance from `from` into `to`.
pub fn chamfer_one_sided(from: &[Point3], to: &[Point3]) -> Result<f64, MetricsError> {
    let (d, _) = nearest_distances(from, to)?;
    Ok(d.iter().sum::<f64>() / d.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Chamfer {
    /// Mean distance from the evaluated mesh to the reference.
    pub pred_to_ref: f64,
    pub ref_to_pred: f64,
    /// Mean of both directions.
    pub bidirectional: f64,
}

pub fn chamfer(pred: &[Point3], reference: &[Point3]) -> Result<Chamfer, MetricsError> {
    let pred_to_ref = chamfer_one_sided(pred, reference)?;
    let ref_to_pred = chamfer_one_sided(reference, pred)?;
    Ok(Chamfer { pred_to_ref, ref_to_pred, bidirectional: 0.5 * (pred_to_ref + ref_to_pred) })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FScore {
    pub threshold: f64,
    pub accuracy: f64,
    pub completeness: f64,
    pub f1: f64,
}

pub fn f1(accuracy: f64, completeness: f64) -> f64 {
    if accuracy + completeness > 0.0 {
        2.0 * accuracy * completeness / (accuracy + completeness)
    } else {
        0.0
    }
}

/// Accuracy is the fraction of `pred` within the threshold of `reference`,
/// completeness the converse; distances equal to the threshold count.
pub fn f_scores(pred: &[Point3], reference: &[Point3], thresholds: &[f64]) -> Result<Vec<FScore>, MetricsError> {
    let (to_ref, _) = nearest_distances(pred, reference)?;
    let (to_pred, _) = nearest_distances(reference, pred)?;
    let fraction = |d: &[f64], t: f64| d.iter().filter(|&&x| x <= t).count() as f64 / d.len() as f64;
    Ok(thresholds
        .iter()
        .map(|&t| {
            let accuracy = fraction(&to_ref, t);
            let completeness = fraction(&to_pred, t);
            FScore { threshold: t, accuracy, completeness, f1: f1(accuracy, completeness) }
        })
        .collect())
}

/// Mean `|n_a . n_b|` over nearest-point pairs, averaged over both
/// directions; insensitive to orientation.
pub fn normal_consistency(pred: &SurfaceSamples, reference: &SurfaceSamples) -> Result<f64, MetricsError> {
    let one_way = |a: &SurfaceSamples, b: &SurfaceSamples| -> Result<f64, MetricsError> {
        let (_, nearest) = nearest_distances(&a.points, &b.points)?;
        let sum: f64 = nearest.iter().zip(&a.normals).map(|(&j, n)| n.dot(&b.normals[j]).abs()).sum();
        Ok(sum / nearest.len() as f64)
    };
    Ok(0.5 * (one_way(pred, reference)? + one_way(reference, pred)?))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    /// `bins + 1` increasing bin edges.
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

impl Histogram {
    fn with_edges(edges: Vec<f64>) -> Self {
        let counts = vec![0; edges.len() - 1];
        Self { edges, counts }
    }

    /// Adds `x`, clamping values outside the range into the end bins.
    fn add(&mut self, x: f64) {
        let bins = self.counts.len();
        let i = self.edges[1..bins].partition_point(|&e| e <= x);
        self.counts[i] += 1;
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("bin_low,bin_high,count\n");
        for (i, c) in self.counts.iter().enumerate() {
            let _ = writeln!(out, "{},{},{}", self.edges[i], self.edges[i + 1], c);
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeshStats {
    pub faces: usize,
    pub vertices: usize,
    pub average_area: f64,
    /// Interior angles, 36 uniform bins over `[0, pi]`.
    pub angles: Histogram,
    /// Face areas, 50 log-spaced bins between the smallest positive and the
    /// largest area.
    pub areas: Histogram,
}

pub fn mesh_stats(mesh: &TriMesh) -> MeshStats {
    let mut angles = Histogram::with_edges((0..=ANGLE_BINS).map(|i| PI * i as f64 / ANGLE_BINS as f64).collect());
    let areas: Vec<f64> = (0..mesh.num_faces()).map(|f| mesh.area(f)).collect();
    for f in 0..mesh.num_faces() {
        let [a, b, c] = mesh.triangle(f);
        for angle in triangle_angles(&a, &b, &c) {
            angles.add(angle);
        }
    }
    let positive = areas.iter().copied().filter(|&a| a > 0.0);
    let lo = positive.clone().fold(f64::INFINITY, f64::min);
    let hi = positive.fold(0.0, f64::max);
    let (lo, hi) = if lo.is_finite() && hi > lo { (lo, hi) } else if lo.is_finite() { (lo, 2.0 * lo) } else { (1.0, 2.0) };
    let ratio = (hi / lo).ln();
    let mut area_hist =
        Histogram::with_edges((0..=AREA_BINS).map(|i| if i == AREA_BINS { hi } else { lo * (ratio * i as f64 / AREA_BINS as f64).exp() }).collect());
    for &a in &areas {
        area_hist.add(a);
    }
    let average_area = if areas.is_empty() { 0.0 } else { areas.iter().sum::<f64>() / areas.len() as f64 };
    MeshStats { faces: mesh.num_faces(), vertices: mesh.num_vertices(), average_area, angles, areas: area_hist }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HoleStats {
    /// Boundary edges over all undirected edges.
    pub boundary_edge_ratio: f64,
    pub holes: usize,
    /// Mean enclosing radius, approximated as half the largest pairwise
    /// vertex distance of each loop.
    pub average_radius: Option<f64>,
    pub average_edges: Option<f64>,
    pub max_edges: usize,
}

pub fn hole_metrics(mesh: &HalfedgeMesh) -> HoleStats {
    let loops = mesh.boundary_loops();
    let ratio = if mesh.num_edges() == 0 { 0.0 } else { mesh.num_boundary_edges() as f64 / mesh.num_edges() as f64 };
    let radii: Vec<f64> = loops
        .iter()
        .map(|l| {
            let pts: Vec<Point3> = l.halfedges.iter().map(|&h| mesh.position(mesh.origin(h))).collect();
            let mut d: f64 = 0.0;
            for i in 0..pts.len() {
                for j in i + 1..pts.len() {
                    d = d.max((pts[i] - pts[j]).norm());
                }
            }
            0.5 * d
        })
        .collect();
    let mean = |xs: &[f64]| (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64);
    let lengths: Vec<f64> = loops.iter().map(|l| l.len() as f64).collect();
    HoleStats {
        boundary_edge_ratio: ratio,
        holes: loops.len(),
        average_radius: mean(&radii),
        average_edges: mean(&lengths),
        max_edges: loops.iter().map(|l| l.len()).max().unwrap_or(0),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SdfDeviation {
    pub mean_abs: f64,
    pub max_abs: f64,
}

/// `|field|` at area-weighted surface samples.
pub fn sdf_deviation(mesh: &TriMesh, field: &(impl ScalarField + ?Sized), n: usize, rng: &mut impl Rng) -> Result<SdfDeviation, MetricsError> {
    let samples = sample_surface(mesh, n, rng)?;
    sdf_deviation_at(&samples.points, field)
}

pub fn sdf_deviation_at(points: &[Point3], field: &(impl ScalarField + ?Sized)) -> Result<SdfDeviation, MetricsError> {
    if points.is_empty() {
        return Err(MetricsError::EmptyPoints);
    }
    let values: Vec<f64> = points.par_iter().map(|p| field.eval(p).abs()).collect();
    Ok(SdfDeviation {
        mean_abs: values.iter().sum::<f64>() / values.len() as f64,
        max_abs: values.iter().copied().fold(0.0, f64::max),
    })
}

pub fn mean_abs_sdf(mesh: &TriMesh, field: &(impl ScalarField + ?Sized), n: usize, rng: &mut impl Rng) -> Result<f64, MetricsError> {
    Ok(sdf_deviation(mesh, field, n, rng)?.mean_abs)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub chamfer: Chamfer,
    pub f_scores: Vec<FScore>,
    pub normal_consistency: f64,
    pub stats: MeshStats,
    pub holes: HoleStats,
    pub sdf: SdfDeviation,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub queries: Option<QueryCounts>,
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report is serializable")
    }
}

/// Full evaluation of `mesh` against reference samples of the true
/// surface; `field` supplies the SDF deviation.
pub fn evaluate(
    mesh: &TriMesh,
    field: &(impl ScalarField + ?Sized),
    reference: &SurfaceSamples,
    samples: usize,
    rng: &mut impl Rng,
) -> Result<EvalReport, MetricsError> {
    let pred = sample_surface(mesh, samples, rng)?;
    let holes = hole_metrics(&mesh.to_halfedge()?);
    Ok(EvalReport {
        chamfer: chamfer(&pred.points, &reference.points)?,
        f_scores: f_scores(&pred.points, &reference.points, &DEFAULT_THRESHOLDS)?,
        normal_consistency: normal_consistency(&pred, reference)?,
        stats: mesh_stats(mesh),
        holes,
        sdf: sdf_deviation_at(&pred.points, field)?,
        queries: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn p(x: f64, y: f64, z: f64) -> Point3 {
        Point3::new(x, y, z)
    }

    #[test]
    fn samples_stay_inside_a_single_triangle() {
        let m = TriMesh::new(vec![p(0.0, 0.0, 0.0), p(1.0, 0.0, 0.0), p(0.0, 1.0, 0.0)], vec![[0, 1, 2]]);
        let s = sample_surface(&m, 2000, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        assert!(s.points.iter().all(|q| q.x >= 0.0 && q.y >= 0.0 && q.x + q.y <= 1.0 + 1e-15 && q.z == 0.0));
        assert!(s.normals.iter().all(|n| *n == Vec3::z()));
    }

    #[test]
    fn zero_area_faces_are_skipped() {
        let m = TriMesh::new(
            vec![p(0.0, 0.0, 0.0), p(1.0, 0.0, 0.0), p(0.0, 1.0, 0.0), p(2.0, 0.0, 0.0)],
            vec![[0, 1, 3], [0, 1, 2]],
        );
        let s = sample_surface(&m, 500, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        assert!(s.points.iter().all(|q| q.y >= 0.0 && q.x <= 1.0 + 1e-15));
        let flat = TriMesh::new(m.positions.clone(), vec![[0, 1, 3]]);
        assert!(matches!(sample_surface(&flat, 1, &mut ChaCha8Rng::seed_from_u64(4)), Err(MetricsError::EmptyMesh)));
    }

    #[test]
    fn chamfer_basics() {
        assert_eq!(chamfer_one_sided(&[p(0.0, 0.0, 0.0)], &[p(0.25, 0.0, 0.0)]).unwrap(), 0.25);
        let a = [p(0.0, 0.0, 0.0), p(1.0, 2.0, 3.0)];
        assert_eq!(chamfer(&a, &a).unwrap().bidirectional, 0.0);
        assert!(matches!(chamfer_one_sided(&[], &a), Err(MetricsError::EmptyPoints)));
    }

    #[test]
    fn f1_of_uniform_offset() {
        let a: Vec<Point3> = (0..50).map(|i| p(i as f64, 0.0, 0.0)).collect();
        let b: Vec<Point3> = a.iter().map(|q| q + Vec3::new(0.0, 0.007, 0.0)).collect();
        let s = f_scores(&b, &a, &DEFAULT_THRESHOLDS).unwrap();
        assert_eq!(s[1].f1, 0.0);
        assert_eq!(s[2].f1, 1.0);
        assert!(f_scores(&a, &a, &DEFAULT_THRESHOLDS).unwrap().iter().all(|f| f.accuracy == 1.0 && f.completeness == 1.0 && f.f1 == 1.0));
        assert_eq!(f1(0.0, 0.0), 0.0);
    }

    #[test]
    fn angle_histogram_of_simple_triangles() {
        let h = 3f64.sqrt() / 2.0;
        let eq = TriMesh::new(vec![p(0.0, 0.0, 0.0), p(1.0, 0.0, 0.0), p(0.5, h, 0.0)], vec![[0, 1, 2]]);
        let s = mesh_stats(&eq);
        let bin = (PI / 3.0 / (PI / 36.0)).floor() as usize;
        // pi/3 is a bin edge; floating point may put it on either side
        assert_eq!(s.angles.counts[bin - 1] + s.angles.counts[bin], 3);
        let right = TriMesh::new(vec![p(0.0, 0.0, 0.0), p(1.0, 0.0, 0.0), p(0.0, 1.0, 0.0)], vec![[0, 1, 2]]);
        let s = mesh_stats(&right);
        assert_eq!(s.angles.counts[18], 1);
        assert_eq!(s.angles.counts[9] + s.angles.counts[8], 2);
        assert_eq!(s.areas.total(), 1);
        assert!(s.angles.to_csv().starts_with("bin_low,bin_high,count\n0,"));
    }

    #[test]
    fn holes_of_a_triangle_and_a_tetrahedron() {
        let tri = HalfedgeMesh::from_indexed_triangles(&[p(0.0, 0.0, 0.0), p(1.0, 0.0, 0.0), p(0.0, 1.0, 0.0)], &[[0, 1, 2]]).unwrap();
        let h = hole_metrics(&tri);
        assert_eq!((h.boundary_edge_ratio, h.holes, h.average_edges), (1.0, 1, Some(3.0)));
        assert_eq!(h.average_radius, Some(0.5 * 2f64.sqrt()));
        let pos = [p(0.0, 0.0, 0.0), p(1.0, 0.0, 0.0), p(0.0, 1.0, 0.0), p(0.0, 0.0, 1.0)];
        let tet = HalfedgeMesh::from_indexed_triangles(&pos, &[[0, 2, 1], [0, 1, 3], [1, 2, 3], [0, 3, 2]]).unwrap();
        let h = hole_metrics(&tet);
        assert_eq!((h.boundary_edge_ratio, h.holes, h.average_radius, h.average_edges), (0.0, 0, None, None));
    }
}
