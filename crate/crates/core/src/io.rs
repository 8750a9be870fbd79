//! Mesh files: ASCII OBJ (read and write), binary little-endian PLY, and
//! the center-and-scale normalization applied to input meshes.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use thiserror::Error;

use crate::geom::{Aabb, Point3};
use crate::trimesh::TriMesh;

#[derive(Debug, Error)]
pub enum IoError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: face has {count} vertices, only triangles are supported")]
    NonTriangle { line: usize, count: usize },
    #[error("mesh has no spatial extent")]
    Degenerate,
}

/// OBJ text with 17 significant digits per coordinate (exact round trip)
/// and 1-based face indices.
pub fn obj_string(mesh: &TriMesh) -> String {
    let mut out = String::with_capacity(mesh.num_vertices() * 72 + mesh.num_faces() * 24);
    for p in &mesh.positions {
        out.push_str(&format!("v {:.16e} {:.16e} {:.16e}\n", p.x, p.y, p.z));
    }
    for t in &mesh.triangles {
        out.push_str(&format!("f {} {} {}\n", t[0] + 1, t[1] + 1, t[2] + 1));
    }
    out
}

pub fn write_obj(mesh: &TriMesh, path: impl AsRef<Path>) -> Result<(), IoError> {
    fs::write(path, obj_string(mesh))?;
    Ok(())
}

pub fn read_obj(path: impl AsRef<Path>) -> Result<TriMesh, IoError> {
    parse_obj(&fs::read_to_string(path)?)
}

/// Reads `v` and `f` records; other record types are ignored. Face entries
/// may carry texture/normal indices (`i/j/k`) and may be negative
/// (relative to the end of the vertex list).
pub fn parse_obj(text: &str) -> Result<TriMesh, IoError> {
    let mut mesh = TriMesh::default();
    for (n, raw) in text.lines().enumerate() {
        let line = n + 1;
        let err = |message: String| IoError::Parse { line, message };
        let mut tokens = raw.split_whitespace();
        match tokens.next() {
            Some("v") => {
                let coords: Vec<f64> = tokens
                    .take(3)
                    .map(|t| t.parse::<f64>().map_err(|e| err(format!("bad coordinate {t:?}: {e}"))))
                    .collect::<Result<_, _>>()?;
                if coords.len() != 3 {
                    return Err(err("vertex needs three coordinates".into()));
                }
                mesh.positions.push(Point3::new(coords[0], coords[1], coords[2]));
            }
            Some("f") => {
                let refs: Vec<&str> = tokens.collect();
                if refs.len() != 3 {
                    return Err(IoError::NonTriangle { line, count: refs.len() });
                }
                let mut tri = [0u32; 3];
                for (slot, r) in tri.iter_mut().zip(&refs) {
                    let first = r.split('/').next().unwrap_or("");
                    let i: i64 = first.parse().map_err(|e| err(format!("bad index {first:?}: {e}")))?;
                    let n = mesh.positions.len() as i64;
                    let resolved = if i > 0 { i - 1 } else { n + i };
                    if i == 0 || resolved < 0 || resolved >= n {
                        return Err(err(format!("vertex index {i} out of range")));
                    }
                    *slot = resolved as u32;
                }
                mesh.triangles.push(tri);
            }
            _ => {}
        }
    }
    Ok(mesh)
}

/// Binary little-endian PLY with double-precision positions and `uint`
/// face indices.
pub fn write_ply(mesh: &TriMesh, path: impl AsRef<Path>) -> Result<(), IoError> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    write!(
        w,
        "ply\nformat binary_little_endian 1.0\nelement vertex {}\nproperty double x\nproperty double y\nproperty double z\n\
         element face {}\nproperty list uchar uint vertex_indices\nend_header\n",
        mesh.num_vertices(),
        mesh.num_faces()
    )?;
    for p in &mesh.positions {
        for c in [p.x, p.y, p.z] {
            w.write_all(&c.to_le_bytes())?;
        }
    }
    for t in &mesh.triangles {
        w.write_all(&[3u8])?;
        for i in t {
            w.write_all(&i.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads the PLY layout produced by [`write_ply`].
pub fn read_ply(path: impl AsRef<Path>) -> Result<TriMesh, IoError> {
    let bytes = fs::read(path)?;
    let marker = b"end_header\n";
    let header_end = bytes
        .windows(marker.len())
        .position(|w| w == marker)
        .ok_or(IoError::Parse { line: 1, message: "missing end_header".into() })?
        + marker.len();
    let header = std::str::from_utf8(&bytes[..header_end]).map_err(|e| IoError::Parse { line: 1, message: e.to_string() })?;
    let count = |element: &str| {
        header
            .lines()
            .find_map(|l| l.strip_prefix(&format!("element {element} ")))
            .and_then(|n| n.trim().parse::<usize>().ok())
            .ok_or(IoError::Parse { line: 1, message: format!("missing element {element}") })
    };
    if !header.contains("format binary_little_endian 1.0") || !header.contains("property double x") {
        return Err(IoError::Parse { line: 2, message: "only little-endian double PLY is supported".into() });
    }
    let (nv, nf) = (count("vertex")?, count("face")?);
    let mut body = &bytes[header_end..];
    let truncated = || IoError::Parse { line: 0, message: "PLY body is truncated".into() };
    let mut take = |n: usize| -> Result<&[u8], IoError> {
        if body.len() < n {
            return Err(truncated());
        }
        let (head, rest) = body.split_at(n);
        body = rest;
        Ok(head)
    };
    let mut mesh = TriMesh::default();
    for _ in 0..nv {
        let mut c = [0.0; 3];
        for x in &mut c {
            *x = f64::from_le_bytes(take(8)?.try_into().expect("eight bytes"));
        }
        mesh.positions.push(Point3::new(c[0], c[1], c[2]));
    }
    for line in 0..nf {
        let k = take(1)?[0] as usize;
        if k != 3 {
            return Err(IoError::NonTriangle { line, count: k });
        }
        let mut t = [0u32; 3];
        for i in &mut t {
            *i = u32::from_le_bytes(take(4)?.try_into().expect("four bytes"));
        }
        mesh.triangles.push(t);
    }
    Ok(mesh)
}

/// Loads `.obj` or `.ply` by extension.
pub fn read_mesh(path: impl AsRef<Path>) -> Result<TriMesh, IoError> {
    let path = path.as_ref();
    match path.extension().and_then(|e| e.to_str()) {
        Some(e) if e.eq_ignore_ascii_case("ply") => read_ply(path),
        _ => read_obj(path),
    }
}

/// Writes `.obj` or `.ply` by extension.
pub fn write_mesh(mesh: &TriMesh, path: impl AsRef<Path>) -> Result<(), IoError> {
    let path = path.as_ref();
    match path.extension().and_then(|e| e.to_str()) {
        Some(e) if e.eq_ignore_ascii_case("ply") => write_ply(mesh, path),
        _ => write_obj(mesh, path),
    }
}

/// Centers the vertices on their mean and scales the largest bounding-box
/// side to 1.
pub fn normalize_mesh(mesh: &TriMesh) -> Result<TriMesh, IoError> {
    let bbox = Aabb::from_points(&mesh.positions).ok_or(IoError::Degenerate)?;
    let size = bbox.extent().max();
    if !(size > 0.0 && size.is_finite()) {
        return Err(IoError::Degenerate);
    }
    let mean = mesh.positions.iter().fold(nalgebra::Vector3::zeros(), |acc, p| acc + p.coords) / mesh.num_vertices() as f64;
    let positions = mesh.positions.iter().map(|p| Point3::from((p.coords - mean) / size)).collect();
    Ok(TriMesh::new(positions, mesh.triangles.clone()))
}
