//! Marching-cubes baseline over a regular grid.
//!
//! The 256-entry case table is generated at first use rather than typed in:
//! for every sign configuration the iso-contour on each cube face is traced
//! (separating the negative corners on ambiguous faces), the face segments
//! are chained into closed polygons and each polygon is fan-triangulated.
//! Because neighbouring cubes resolve a shared face identically, the output
//! is watertight wherever the zero set stays inside the grid. Vertices are
//! welded exactly by grid-edge key.

use std::collections::HashMap;
use std::sync::OnceLock;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::field::ScalarField;
use crate::geom::{Aabb, Point3, Vec3};
use crate::trimesh::TriMesh;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub bbox: Aabb,
    /// Cells per axis.
    pub resolution: usize,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GridError {
    #[error("grid resolution must be at least 2, got {0}")]
    Resolution(usize),
    #[error("grid bounding box is degenerate")]
    DegenerateBox,
}

impl GridSpec {
    pub fn new(bbox: Aabb, resolution: usize) -> Result<Self, GridError> {
        let g = Self { bbox, resolution };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<(), GridError> {
        if self.resolution < 2 {
            return Err(GridError::Resolution(self.resolution));
        }
        if !self.bbox.is_valid() {
            return Err(GridError::DegenerateBox);
        }
        Ok(())
    }

    pub fn cell_size(&self) -> Vec3 {
        self.bbox.extent() / self.resolution as f64
    }

    /// Number of field samples taken by [`extract`].
    pub fn num_samples(&self) -> usize {
        (self.resolution + 1).pow(3)
    }

    fn point(&self, i: usize, j: usize, k: usize) -> Point3 {
        let h = self.cell_size();
        Point3::new(
            self.bbox.min.x + i as f64 * h.x,
            self.bbox.min.y + j as f64 * h.y,
            self.bbox.min.z + k as f64 * h.z,
        )
    }
}

/// Cube corner `c` sits at offset `(c & 1, (c >> 1) & 1, (c >> 2) & 1)`.
fn corner_offset(c: usize) -> [usize; 3] {
    [c & 1, (c >> 1) & 1, (c >> 2) & 1]
}

/// The twelve cube edges as (corner, corner, axis), lower corner first.
const EDGES: [(usize, usize, usize); 12] = [
    (0, 1, 0),
    (2, 3, 0),
    (4, 5, 0),
    (6, 7, 0),
    (0, 2, 1),
    (1, 3, 1),
    (4, 6, 1),
    (5, 7, 1),
    (0, 4, 2),
    (1, 5, 2),
    (2, 6, 2),
    (3, 7, 2),
];

fn edge_between(a: usize, b: usize) -> usize {
    let (lo, hi) = (a.min(b), a.max(b));
    EDGES.iter().position(|&(p, q, _)| p == lo && q == hi).expect("corners are adjacent")
}

fn corner_vec(c: usize) -> Vec3 {
    let o = corner_offset(c);
    Vec3::new(o[0] as f64, o[1] as f64, o[2] as f64)
}

fn edge_mid(e: usize) -> Vec3 {
    let (a, b, _) = EDGES[e];
    (corner_vec(a) + corner_vec(b)) * 0.5
}

/// Triangles (as cube-edge triples) for every corner sign mask; bit `c` set
/// means corner `c` is negative.
fn case_table() -> &'static [Vec<[u8; 3]>; 256] {
    static TABLE: OnceLock<[Vec<[u8; 3]>; 256]> = OnceLock::new();
    TABLE.get_or_init(|| std::array::from_fn(build_case))
}

fn build_case(mask: usize) -> Vec<[u8; 3]> {
    let negative = |c: usize| mask >> c & 1 == 1;
    // Each face: (axis, side), corners listed around the face.
    let mut next_of: [Option<usize>; 12] = [None; 12];
    for axis in 0..3 {
        for side in 0..2 {
            let (u, v) = ((axis + 1) % 3, (axis + 2) % 3);
            let corner = |du: usize, dv: usize| (side << axis) | (du << u) | (dv << v);
            let ring = [corner(0, 0), corner(1, 0), corner(1, 1), corner(0, 1)];
            let outward = {
                let mut n = Vec3::zeros();
                n[axis] = if side == 1 { 1.0 } else { -1.0 };
                n
            };
            for (p, q, cut_corner) in face_segments(&ring, &negative) {
                // Orient so the polygon winds counter-clockwise about the
                // normal pointing towards positive values: (d x n_face) must
                // point into the negative side.
                let (ep, eq) = (edge_mid(p), edge_mid(q));
                let d = eq - ep;
                let towards = corner_vec(cut_corner) - ep;
                let sign = if negative(cut_corner) { 1.0 } else { -1.0 };
                let (from, to) = if d.cross(&outward).dot(&towards) * sign > 0.0 { (p, q) } else { (q, p) };
                debug_assert!(next_of[from].is_none());
                next_of[from] = Some(to);
            }
        }
    }
    let mut tris = Vec::new();
    let mut seen = [false; 12];
    for start in 0..12 {
        if seen[start] || next_of[start].is_none() {
            continue;
        }
        let mut polygon = vec![start];
        seen[start] = true;
        let mut e = next_of[start].expect("cut edge has a successor");
        while e != start {
            seen[e] = true;
            polygon.push(e);
            e = next_of[e].expect("iso-contour is closed");
        }
        for w in 1..polygon.len() - 1 {
            tris.push([polygon[0] as u8, polygon[w] as u8, polygon[w + 1] as u8]);
        }
    }
    tris
}

/// Iso-contour segments on one face, each as (edge, edge, corner it cuts
/// off). Ambiguous faces keep their two negative corners apart.
fn face_segments(ring: &[usize; 4], negative: &impl Fn(usize) -> bool) -> Vec<(usize, usize, usize)> {
    let signs: Vec<bool> = ring.iter().map(|&c| negative(c)).collect();
    let count = signs.iter().filter(|&&s| s).count();
    let mut out = Vec::new();
    let cut_around = |i: usize| {
        let prev = ring[(i + 3) % 4];
        let next = ring[(i + 1) % 4];
        (edge_between(prev, ring[i]), edge_between(ring[i], next), ring[i])
    };
    match count {
        0 | 4 => {}
        1 => out.push(cut_around(signs.iter().position(|&s| s).unwrap())),
        3 => out.push(cut_around(signs.iter().position(|&s| !s).unwrap())),
        _ => {
            if signs[0] == signs[2] {
                // diagonal pair: cut off each negative corner separately
                for i in 0..4 {
                    if signs[i] {
                        out.push(cut_around(i));
                    }
                }
            } else {
                let crossings: Vec<usize> =
                    (0..4).filter(|&i| signs[i] != signs[(i + 1) % 4]).map(|i| edge_between(ring[i], ring[(i + 1) % 4])).collect();
                let neg = ring[signs.iter().position(|&s| s).unwrap()];
                out.push((crossings[0], crossings[1], neg));
            }
        }
    }
    out
}

/// Extracts the zero level set of `field` on `grid`. Samples the field at
/// exactly `(resolution + 1)^3` grid points.
pub fn extract(field: &(impl ScalarField + ?Sized), grid: &GridSpec) -> TriMesh {
    let n = grid.resolution + 1;
    let idx = |i: usize, j: usize, k: usize| (k * n + j) * n + i;
    let values: Vec<f64> = (0..n)
        .into_par_iter()
        .flat_map_iter(|k| {
            let mut slab = Vec::with_capacity(n * n);
            for j in 0..n {
                for i in 0..n {
                    slab.push(field.eval(&grid.point(i, j, k)));
                }
            }
            slab
        })
        .collect();

    let table = case_table();
    let mut positions = Vec::new();
    let mut triangles = Vec::new();
    let mut welded: HashMap<(usize, usize), u32> = HashMap::new();
    for k in 0..grid.resolution {
        for j in 0..grid.resolution {
            for i in 0..grid.resolution {
                let corner = |c: usize| {
                    let o = corner_offset(c);
                    (i + o[0], j + o[1], k + o[2])
                };
                let value = |c: usize| {
                    let (x, y, z) = corner(c);
                    values[idx(x, y, z)]
                };
                let mask = (0..8).fold(0, |m, c| m | ((value(c) < 0.0) as usize) << c);
                for tri in &table[mask] {
                    let ids = tri.map(|e| {
                        let (a, b, axis) = EDGES[e as usize];
                        let (x, y, z) = corner(a);
                        *welded.entry((idx(x, y, z), axis)).or_insert_with(|| {
                            let (va, vb) = (value(a), value(b));
                            let t = va / (va - vb);
                            let pa = grid.point(x, y, z);
                            let (x1, y1, z1) = corner(b);
                            let pb = grid.point(x1, y1, z1);
                            positions.push(pa + (pb - pa) * t);
                            (positions.len() - 1) as u32
                        })
                    });
                    triangles.push(ids);
                }
            }
        }
    }
    TriMesh::new(positions, triangles)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{CountingField, Sdf};
    use crate::geom::triangle_normal;

    fn cube_grid(res: usize) -> GridSpec {
        GridSpec::new(Aabb::cube(1.0), res).unwrap()
    }

    #[test]
    fn every_case_closes_its_contours() {
        // Each cut edge appears in exactly two triangle-edge slots per
        // polygon boundary; just make sure all 256 cases build and that the
        // edge count matches the number of sign changes.
        for mask in 0..256usize {
            let tris = build_case(mask);
            let cut = EDGES.iter().filter(|&&(a, b, _)| (mask >> a & 1) != (mask >> b & 1)).count();
            let used: std::collections::BTreeSet<u8> = tris.iter().flatten().copied().collect();
            assert_eq!(used.len(), cut, "mask {mask}");
        }
        assert!(build_case(0).is_empty() && build_case(255).is_empty());
    }

    #[test]
    fn complementary_cases_flip_winding() {
        for mask in 0..256usize {
            let a = build_case(mask);
            let b = build_case(255 - mask);
            if a.is_empty() {
                continue;
            }
            // Unambiguous cases share the polygon with reversed orientation.
            let area = |tris: &[[u8; 3]]| {
                tris.iter().fold(Vec3::zeros(), |acc, t| {
                    let [p, q, r] = t.map(|e| Point3::from(edge_mid(e as usize)));
                    acc + triangle_normal(&p, &q, &r)
                })
            };
            let (sa, sb) = (area(&a), area(&b));
            if a.len() == b.len() && a.len() <= 2 {
                assert!((sa + sb).norm() < 1e-12, "mask {mask}");
            }
        }
    }

    #[test]
    fn constant_field_is_empty() {
        struct One;
        impl ScalarField for One {
            fn eval(&self, _: &Point3) -> f64 {
                1.0
            }
        }
        assert!(extract(&One, &cube_grid(4)).is_empty());
    }

    #[test]
    fn plane_vertices_are_exact() {
        let plane = Sdf::plane(Point3::origin(), Vec3::z());
        let m = extract(&plane, &cube_grid(8));
        assert!(!m.is_empty());
        assert!(m.positions.iter().all(|p| p.z.abs() < 1e-9));
        // outward (gradient-aligned) normals point to +z
        assert!((0..m.num_faces()).all(|f| {
            let [a, b, c] = m.triangle(f);
            triangle_normal(&a, &b, &c).z > 0.0
        }));
    }

    #[test]
    fn sample_count_is_exact() {
        let counted = CountingField::new(Sdf::sphere(Point3::origin(), 0.3));
        let grid = cube_grid(16);
        extract(&counted, &grid);
        assert_eq!(counted.counts().sdf_evals as usize, grid.num_samples());
    }

    #[test]
    fn rejects_bad_grids() {
        assert_eq!(GridSpec::new(Aabb::cube(1.0), 1), Err(GridError::Resolution(1)));
        assert_eq!(GridSpec::new(Aabb::new(Point3::origin(), Point3::origin()), 4), Err(GridError::DegenerateBox));
    }
}
