//! Analytic primitives and CSG combinations.

use super::{FieldError, GradientSample, NeuralField, ScalarField};
use crate::geom::{Point3, Vec3};

/// Signed distance tree built from primitives, CSG nodes and networks.
#[derive(Debug, Clone)]
pub enum Sdf {
    Sphere { center: Point3, radius: f64 },
    Box { center: Point3, half_extents: Vec3 },
    /// Torus around the z axis through `center`.
    Torus { center: Point3, major: f64, minor: f64 },
    /// Half-space; `normal` must be unit length (see [`Sdf::plane`]).
    Plane { point: Point3, normal: Vec3 },
    Union(Vec<Sdf>),
    Intersection(Vec<Sdf>),
    /// Polynomial smooth minimum with blend radius `blend`.
    SmoothUnion { children: Vec<Sdf>, blend: f64 },
    /// `scale * child((p - offset) / scale)`.
    TranslatedScaled { child: Box<Sdf>, offset: Vec3, scale: f64 },
    Neural(NeuralField),
}

impl Sdf {
    pub fn sphere(center: Point3, radius: f64) -> Self {
        Self::Sphere { center, radius }
    }

    pub fn plane(point: Point3, normal: Vec3) -> Self {
        Self::Plane { point, normal: normal.normalize() }
    }

    pub fn torus(center: Point3, major: f64, minor: f64) -> Self {
        Self::Torus { center, major, minor }
    }

    /// Value and gradient in one pass.
    pub fn value_and_gradient(&self, p: &Point3) -> (f64, GradientSample) {
        match self {
            Sdf::Sphere { center, radius } => {
                let d = p - center;
                let n = d.norm();
                let g = if n > 0.0 { GradientSample::from_vector(d / n) } else { GradientSample::degenerate() };
                (n - radius, g)
            }
            Sdf::Box { center, half_extents } => box_value_and_gradient(&(p - center), half_extents),
            Sdf::Torus { center, major, minor } => {
                let d = p - center;
                let rho = (d.x * d.x + d.y * d.y).sqrt();
                let qx = rho - major;
                let qn = (qx * qx + d.z * d.z).sqrt();
                let g = if rho > 0.0 && qn > 0.0 {
                    GradientSample::from_vector(Vec3::new(qx * d.x / rho, qx * d.y / rho, d.z) / qn)
                } else {
                    GradientSample::degenerate()
                };
                (qn - minor, g)
            }
            Sdf::Plane { point, normal } => ((p - point).dot(normal), GradientSample::from_vector(*normal)),
            Sdf::Union(children) => pick(children, p, |a, b| a < b),
            Sdf::Intersection(children) => pick(children, p, |a, b| a > b),
            Sdf::SmoothUnion { children, blend } => {
                let mut iter = children.iter();
                let Some(first) = iter.next() else {
                    return (f64::INFINITY, GradientSample::degenerate());
                };
                let (mut a, ga) = first.value_and_gradient(p);
                let mut degenerate = ga.degenerate;
                let mut grad = ga.vector;
                for child in iter {
                    let (b, gb) = child.value_and_gradient(p);
                    degenerate |= gb.degenerate;
                    let (v, h) = smooth_min(a, b, *blend);
                    // d/da = h, d/db = 1 - h
                    grad = grad * h + gb.vector * (1.0 - h);
                    a = v;
                }
                let g = if degenerate { GradientSample::degenerate() } else { GradientSample::from_vector(grad) };
                (a, g)
            }
            Sdf::TranslatedScaled { child, offset, scale } => {
                let local = Point3::from((p - offset).coords / *scale);
                let (v, g) = child.value_and_gradient(&local);
                (v * scale, g)
            }
            Sdf::Neural(net) => (net.eval(p), net.gradient_sample(p)),
        }
    }
}

fn pick(children: &[Sdf], p: &Point3, better: impl Fn(f64, f64) -> bool) -> (f64, GradientSample) {
    let mut best: Option<(f64, GradientSample)> = None;
    for child in children {
        let (v, g) = child.value_and_gradient(p);
        match best {
            Some((bv, _)) if !better(v, bv) => {}
            _ => best = Some((v, g)),
        }
    }
    best.unwrap_or((f64::INFINITY, GradientSample::degenerate()))
}

/// Returns the blended value and the weight `h` of the first argument.
fn smooth_min(a: f64, b: f64, k: f64) -> (f64, f64) {
    if k <= 0.0 {
        return if a <= b { (a, 1.0) } else { (b, 0.0) };
    }
    let h = (0.5 + 0.5 * (b - a) / k).clamp(0.0, 1.0);
    (b * (1.0 - h) + a * h - k * h * (1.0 - h), h)
}

fn box_value_and_gradient(d: &Vec3, half: &Vec3) -> (f64, GradientSample) {
    let q = d.abs() - half;
    let outside = q.map(|c| c.max(0.0));
    let out_norm = outside.norm();
    let sign = d.map(|c| if c < 0.0 { -1.0 } else { 1.0 });
    if out_norm > 0.0 {
        let g = sign.component_mul(&outside) / out_norm;
        (out_norm, GradientSample::from_vector(g))
    } else {
        let axis = q.imax();
        let mut g = Vec3::zeros();
        g[axis] = sign[axis];
        (q[axis], GradientSample::from_vector(g))
    }
}

impl ScalarField for Sdf {
    fn eval(&self, p: &Point3) -> f64 {
        match self {
            Sdf::Sphere { center, radius } => (p - center).norm() - radius,
            Sdf::Box { center, half_extents } => {
                let q = (p - center).abs() - half_extents;
                q.map(|c| c.max(0.0)).norm() + q.max().min(0.0)
            }
            Sdf::Torus { center, major, minor } => {
                let d = p - center;
                let qx = (d.x * d.x + d.y * d.y).sqrt() - major;
                (qx * qx + d.z * d.z).sqrt() - minor
            }
            Sdf::Plane { point, normal } => (p - point).dot(normal),
            Sdf::Union(children) => children.iter().map(|c| c.eval(p)).fold(f64::INFINITY, f64::min),
            Sdf::Intersection(children) => children.iter().map(|c| c.eval(p)).fold(f64::NEG_INFINITY, f64::max),
            Sdf::SmoothUnion { children, blend } => {
                let mut iter = children.iter();
                let Some(first) = iter.next() else { return f64::INFINITY };
                iter.fold(first.eval(p), |a, c| smooth_min(a, c.eval(p), *blend).0)
            }
            Sdf::TranslatedScaled { child, offset, scale } => {
                scale * child.eval(&Point3::from((p - offset).coords / *scale))
            }
            Sdf::Neural(net) => net.eval(p),
        }
    }

    fn gradient_sample(&self, p: &Point3) -> GradientSample {
        self.value_and_gradient(p).1
    }

    fn directional_curvature(&self, q: &Point3, dir: &Vec3, length: f64) -> Result<f64, FieldError> {
        match self {
            Sdf::Neural(net) => net.directional_curvature(q, dir, length),
            _ => super::turning_angle(self, q, dir, length, super::WALK_SUBSTEPS),
        }
    }
}
