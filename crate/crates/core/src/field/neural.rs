//! Fields backed by a feed-forward network.

use std::path::Path;
use std::sync::Arc;

use super::{turning_angle, FieldError, ScalarField, WALK_SUBSTEPS};
use crate::geom::{Point3, Vec3};
use crate::mlp::{MlpError, MlpWeights};

/// A network mapping a point (and, for 6-input networks, a direction) to
/// its signed distance and optionally a turning-angle curvature.
#[derive(Debug, Clone)]
pub struct NeuralField {
    weights: Arc<MlpWeights>,
}

impl NeuralField {
    pub fn new(weights: MlpWeights) -> Result<Self, MlpError> {
        weights.validate()?;
        if weights.input_dim != 3 && weights.input_dim != 6 {
            return Err(MlpError::Dimension(format!(
                "field networks take 3 or 6 inputs, got {}",
                weights.input_dim
            )));
        }
        if weights.outputs.curvature.is_some() && weights.input_dim != 6 {
            return Err(MlpError::Dimension("a curvature head needs a direction input".into()));
        }
        Ok(Self { weights: Arc::new(weights) })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, MlpError> {
        Self::new(MlpWeights::load(path)?)
    }

    pub fn weights(&self) -> &MlpWeights {
        &self.weights
    }

    pub fn has_curvature_head(&self) -> bool {
        self.weights.outputs.curvature.is_some()
    }

    fn forward(&self, p: &Point3, dir: &Vec3) -> Vec<f64> {
        let input = [p.x, p.y, p.z, dir.x, dir.y, dir.z];
        self.weights
            .forward(&input[..self.weights.input_dim])
            .expect("input width checked at construction")
    }
}

impl ScalarField for NeuralField {
    fn eval(&self, p: &Point3) -> f64 {
        self.forward(p, &Vec3::zeros())[self.weights.outputs.sdf]
    }

    /// With a curvature head the network answers directly; `length` is
    /// baked into its training and therefore ignored.
    fn directional_curvature(&self, q: &Point3, dir: &Vec3, length: f64) -> Result<f64, FieldError> {
        match self.weights.outputs.curvature {
            Some(index) => {
                let k = self.forward(q, dir)[index];
                if k.is_finite() {
                    Ok(k)
                } else {
                    Err(FieldError::Network(format!("non-finite curvature {k}")))
                }
            }
            None => turning_angle(self, q, dir, length, WALK_SUBSTEPS),
        }
    }
}
