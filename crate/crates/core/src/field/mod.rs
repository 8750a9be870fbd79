//! Signed distance oracles.
//!
//! Every field answers three kinds of queries: the signed distance itself,
//! its gradient, and a directional turning-angle curvature. Fields without
//! an analytic gradient fall back to central differences; fields without a
//! curvature head walk a discrete geodesic over their own zero level set.

mod analytic;
mod counter;
mod neural;

pub use analytic::Sdf;
pub use counter::{CountingField, QueryCounter, QueryCounts};
pub use neural::NeuralField;

use std::f64::consts::FRAC_PI_2;
use std::sync::Arc;

use thiserror::Error;

use crate::geom::{Point3, Vec3};

/// Central-difference step used when a field has no analytic gradient.
pub const FD_STEP: f64 = 1e-5;
/// Default tolerance for "on the surface".
pub const EPS_SURFACE: f64 = 1e-5;
/// Default projection budget.
pub const MAX_PROJECTION_ITERS: usize = 20;
/// Geodesic length for curvature queries.
pub const CURVATURE_LENGTH: f64 = 0.005;
/// Sub-steps of the discrete geodesic walk.
pub const WALK_SUBSTEPS: usize = 8;

/// Returned in place of a gradient that vanishes or is undefined.
pub const FALLBACK_NORMAL: Vec3 = Vec3::new(1.0, 0.0, 0.0);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FieldError {
    #[error("surface projection failed after walking {walked:.3e} of {length:.3e}")]
    WalkFailed { walked: f64, length: f64 },
    #[error("curvature direction is parallel to the surface normal")]
    DegenerateDirection,
    #[error("network evaluation failed: {0}")]
    Network(String),
}

/// A gradient together with a flag telling whether it was a fallback.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradientSample {
    pub vector: Vec3,
    pub degenerate: bool,
}

impl GradientSample {
    pub fn from_vector(v: Vec3) -> Self {
        let n = v.norm();
        if n.is_finite() && n > 0.0 {
            Self { vector: v, degenerate: false }
        } else {
            Self::degenerate()
        }
    }

    pub fn degenerate() -> Self {
        Self { vector: FALLBACK_NORMAL, degenerate: true }
    }

    /// Unit normal (the fallback is already unit length).
    pub fn normal(&self) -> Vec3 {
        self.vector.normalize()
    }
}

/// Signed distance oracle. Negative inside, positive outside.
pub trait ScalarField: Send + Sync {
    fn eval(&self, p: &Point3) -> f64;

    fn gradient_sample(&self, p: &Point3) -> GradientSample {
        GradientSample::from_vector(central_difference(|q| self.eval(q), p, FD_STEP))
    }

    /// Gradient, not normalized.
    fn gradient(&self, p: &Point3) -> Vec3 {
        self.gradient_sample(p).vector
    }

    /// Turning angle after a geodesic of `length` starting at `q` along `dir`.
    ///
    /// `q` is projected onto the surface first, so points slightly off the
    /// zero level set are accepted.
    fn directional_curvature(&self, q: &Point3, dir: &Vec3, length: f64) -> Result<f64, FieldError> {
        turning_angle(self, q, dir, length, WALK_SUBSTEPS)
    }
}

impl<F: ScalarField + ?Sized> ScalarField for &F {
    fn eval(&self, p: &Point3) -> f64 {
        (**self).eval(p)
    }
    fn gradient_sample(&self, p: &Point3) -> GradientSample {
        (**self).gradient_sample(p)
    }
    fn directional_curvature(&self, q: &Point3, dir: &Vec3, length: f64) -> Result<f64, FieldError> {
        (**self).directional_curvature(q, dir, length)
    }
}

impl<F: ScalarField + ?Sized> ScalarField for Box<F> {
    fn eval(&self, p: &Point3) -> f64 {
        (**self).eval(p)
    }
    fn gradient_sample(&self, p: &Point3) -> GradientSample {
        (**self).gradient_sample(p)
    }
    fn directional_curvature(&self, q: &Point3, dir: &Vec3, length: f64) -> Result<f64, FieldError> {
        (**self).directional_curvature(q, dir, length)
    }
}

impl<F: ScalarField + ?Sized> ScalarField for Arc<F> {
    fn eval(&self, p: &Point3) -> f64 {
        (**self).eval(p)
    }
    fn gradient_sample(&self, p: &Point3) -> GradientSample {
        (**self).gradient_sample(p)
    }
    fn directional_curvature(&self, q: &Point3, dir: &Vec3, length: f64) -> Result<f64, FieldError> {
        (**self).directional_curvature(q, dir, length)
    }
}

pub fn central_difference(f: impl Fn(&Point3) -> f64, p: &Point3, h: f64) -> Vec3 {
    let mut g = Vec3::zeros();
    for i in 0..3 {
        let mut hi = *p;
        let mut lo = *p;
        hi[i] += h;
        lo[i] -= h;
        g[i] = (f(&hi) - f(&lo)) / (2.0 * h);
    }
    g
}

/// Result of [`project_to_surface`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    pub point: Point3,
    pub converged: bool,
}

/// Newton-style projection `p <- p - s(p) * g/|g|` until `|s(p)| < eps`.
pub fn project_to_surface<F: ScalarField + ?Sized>(field: &F, p: &Point3, max_iters: usize, eps: f64) -> Projection {
    let mut point = *p;
    for _ in 0..max_iters.max(1) {
        let d = field.eval(&point);
        if d.abs() < eps {
            return Projection { point, converged: true };
        }
        let g = field.gradient_sample(&point);
        if g.degenerate {
            return Projection { point, converged: false };
        }
        point -= g.normal() * d;
    }
    let converged = field.eval(&point).abs() < eps;
    Projection { point, converged }
}

/// Projection with the default budget and tolerance.
pub fn project<F: ScalarField + ?Sized>(field: &F, p: &Point3) -> Projection {
    project_to_surface(field, p, MAX_PROJECTION_ITERS, EPS_SURFACE)
}

const WALK_EPS: f64 = 1e-10;
const WALK_ITERS: usize = 30;

/// Discrete geodesic walk returning `acos(d_end . n_start) - pi/2`.
///
/// The walk stays in the plane spanned by the start normal and the initial
/// direction; positive values mean the surface bends away from the normal.
pub fn turning_angle<F: ScalarField + ?Sized>(
    field: &F,
    q: &Point3,
    dir: &Vec3,
    length: f64,
    substeps: usize,
) -> Result<f64, FieldError> {
    let start = project_to_surface(field, q, WALK_ITERS, WALK_EPS);
    if !start.converged {
        return Err(FieldError::WalkFailed { walked: 0.0, length });
    }
    let n1 = field.gradient_sample(&start.point).normal();
    let tangent = dir - n1 * dir.dot(&n1);
    if tangent.norm() < 1e-12 {
        return Err(FieldError::DegenerateDirection);
    }
    let mut walk_dir = tangent.normalize();
    let plane_normal = walk_dir.cross(&n1).normalize();
    let substeps = substeps.max(1);
    let step = length / substeps as f64;
    let mut x = start.point;
    for k in 0..substeps {
        let moved = x + walk_dir * step;
        let proj = project_to_surface(field, &moved, WALK_ITERS, WALK_EPS);
        if !proj.converged {
            return Err(FieldError::WalkFailed { walked: k as f64 * step, length });
        }
        x = proj.point;
        let n = field.gradient_sample(&x).normal();
        let next = n.cross(&plane_normal);
        if next.norm() < 1e-12 {
            return Err(FieldError::WalkFailed { walked: (k + 1) as f64 * step, length });
        }
        walk_dir = next.normalize();
    }
    Ok(walk_dir.dot(&n1).clamp(-1.0, 1.0).acos() - FRAC_PI_2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn sphere(r: f64) -> Sdf {
        Sdf::Sphere { center: Point3::origin(), radius: r }
    }

    fn plane() -> Sdf {
        Sdf::plane(Point3::origin(), Vec3::z())
    }

    #[test]
    fn projection_onto_sphere_is_one_step() {
        let s = sphere(0.5);
        let p = project_to_surface(&s, &Point3::new(0.8, 0.0, 0.0), 20, 1e-5);
        assert!(p.converged);
        assert_relative_eq!(p.point, Point3::new(0.5, 0.0, 0.0), epsilon = 1e-15);
    }

    #[test]
    fn projection_onto_plane() {
        let p = project_to_surface(&plane(), &Point3::new(1.0, 1.0, 1.0), 20, 1e-5);
        assert!(p.converged);
        assert_relative_eq!(p.point, Point3::new(1.0, 1.0, 0.0), epsilon = 1e-15);
    }

    #[test]
    fn projection_aborts_on_degenerate_gradient() {
        let p = project_to_surface(&sphere(0.5), &Point3::origin(), 20, 1e-5);
        assert!(!p.converged);
    }

    #[test]
    fn flat_surface_has_zero_turning() {
        let k = plane()
            .directional_curvature(&Point3::new(0.3, -0.1, 0.0), &Vec3::new(1.0, 1.0, 0.0), CURVATURE_LENGTH)
            .unwrap();
        assert!(k.abs() < 1e-6, "{k}");
    }

    #[test]
    fn sphere_turning_matches_length_over_radius() {
        let q = Point3::new(0.0, 0.0, 0.5);
        let k = sphere(0.5).directional_curvature(&q, &Vec3::x(), CURVATURE_LENGTH).unwrap();
        assert!((k - 0.01).abs() < 1e-4, "{k}");
    }

    #[test]
    fn walk_reports_partial_distance() {
        // A direction that runs off a tiny sphere's far side still projects;
        // a field with no zero crossing cannot.
        struct Constant;
        impl ScalarField for Constant {
            fn eval(&self, _p: &Point3) -> f64 {
                1.0
            }
        }
        let err = Constant.directional_curvature(&Point3::origin(), &Vec3::x(), 0.01).unwrap_err();
        assert!(matches!(err, FieldError::WalkFailed { walked, .. } if walked == 0.0));
    }

    #[test]
    fn direction_along_normal_is_rejected() {
        let err = sphere(0.5)
            .directional_curvature(&Point3::new(0.0, 0.0, 0.5), &Vec3::z(), CURVATURE_LENGTH)
            .unwrap_err();
        assert_eq!(err, FieldError::DegenerateDirection);
    }
}
