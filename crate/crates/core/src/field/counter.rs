//! Query accounting.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{FieldError, GradientSample, ScalarField};
use crate::geom::{Point3, Vec3};

/// Monotone, thread-safe counters, one per query kind.
#[derive(Debug, Default)]
pub struct QueryCounter {
    sdf: AtomicU64,
    gradient: AtomicU64,
    curvature: AtomicU64,
}

#[derive(Debug, Default, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryCounts {
    pub sdf_evals: u64,
    pub gradient_evals: u64,
    pub curvature_evals: u64,
}

impl QueryCounts {
    pub fn total(&self) -> u64 {
        self.sdf_evals + self.gradient_evals + self.curvature_evals
    }

    /// Component-wise difference against an earlier snapshot.
    pub fn since(&self, earlier: &QueryCounts) -> QueryCounts {
        QueryCounts {
            sdf_evals: self.sdf_evals - earlier.sdf_evals,
            gradient_evals: self.gradient_evals - earlier.gradient_evals,
            curvature_evals: self.curvature_evals - earlier.curvature_evals,
        }
    }
}

impl QueryCounter {
    pub fn snapshot(&self) -> QueryCounts {
        QueryCounts {
            sdf_evals: self.sdf.load(Ordering::Relaxed),
            gradient_evals: self.gradient.load(Ordering::Relaxed),
            curvature_evals: self.curvature.load(Ordering::Relaxed),
        }
    }
}

/// Wraps a field and counts every call made through the query interface.
///
/// One call is one query: a curvature query counts once regardless of how
/// the wrapped field answers it internally.
pub struct CountingField<F> {
    inner: F,
    counter: Arc<QueryCounter>,
}

impl<F: ScalarField> CountingField<F> {
    pub fn new(inner: F) -> Self {
        Self { inner, counter: Arc::new(QueryCounter::default()) }
    }

    pub fn with_counter(inner: F, counter: Arc<QueryCounter>) -> Self {
        Self { inner, counter }
    }

    pub fn counter(&self) -> &Arc<QueryCounter> {
        &self.counter
    }

    pub fn counts(&self) -> QueryCounts {
        self.counter.snapshot()
    }

    pub fn inner(&self) -> &F {
        &self.inner
    }
}

impl<F: ScalarField> ScalarField for CountingField<F> {
    fn eval(&self, p: &Point3) -> f64 {
        self.counter.sdf.fetch_add(1, Ordering::Relaxed);
        self.inner.eval(p)
    }

    fn gradient_sample(&self, p: &Point3) -> GradientSample {
        self.counter.gradient.fetch_add(1, Ordering::Relaxed);
        self.inner.gradient_sample(p)
    }

    fn directional_curvature(&self, q: &Point3, dir: &Vec3, length: f64) -> Result<f64, FieldError> {
        self.counter.curvature.fetch_add(1, Ordering::Relaxed);
        self.inner.directional_curvature(q, dir, length)
    }
}
