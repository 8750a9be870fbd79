//! Feed-forward networks loaded from a versioned JSON weights file.
//!
//! File layout (version 1):
//!
//! ```json
//! {"version":1, "input_dim":3,
//!  "layers":[{"rows":64,"cols":3,"weights":[...row-major...],"bias":[...],
//!             "activation":"relu","concat_input":false}, ...],
//!  "outputs":{"sdf":0,"curvature":null}}
//! ```
//!
//! A layer with `concat_input` set receives `[previous output, network input]`,
//! which is how skip connections are expressed.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum MlpError {
    #[error("malformed weights file: {0}")]
    Malformed(String),
    #[error("unsupported weights file version {0}")]
    Version(u32),
    #[error("unknown activation `{0}`")]
    UnknownActivation(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Tanh,
    Softplus,
    None,
}

impl Activation {
    fn parse(tag: &str) -> Result<Self, MlpError> {
        match tag {
            "relu" => Ok(Self::Relu),
            "tanh" => Ok(Self::Tanh),
            "softplus" => Ok(Self::Softplus),
            "none" => Ok(Self::None),
            other => Err(MlpError::UnknownActivation(other.to_string())),
        }
    }

    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Self::Relu => x.max(0.0),
            Self::Tanh => x.tanh(),
            Self::Softplus => x.max(0.0) + (-x.abs()).exp().ln_1p(),
            Self::None => x,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub rows: usize,
    pub cols: usize,
    /// Row-major `rows x cols`.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub activation: Activation,
    #[serde(default)]
    pub concat_input: bool,
}

/// Which network outputs carry the signed distance and the curvature.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[derive(Default)]
pub struct OutputMap {
    pub sdf: usize,
    pub curvature: Option<usize>,
}


#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MlpWeights {
    pub version: u32,
    pub input_dim: usize,
    pub layers: Vec<Layer>,
    pub outputs: OutputMap,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawWeights {
    version: u32,
    input_dim: usize,
    layers: Vec<RawLayer>,
    #[serde(default)]
    outputs: Option<OutputMap>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLayer {
    rows: usize,
    cols: usize,
    weights: Vec<f64>,
    bias: Vec<f64>,
    activation: String,
    #[serde(default)]
    concat_input: bool,
}

impl MlpWeights {
    /// Builds and validates a network.
    pub fn new(input_dim: usize, layers: Vec<Layer>, outputs: OutputMap) -> Result<Self, MlpError> {
        let weights = Self { version: FORMAT_VERSION, input_dim, layers, outputs };
        weights.validate()?;
        Ok(weights)
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(self.input_dim, |l| l.rows)
    }

    pub fn validate(&self) -> Result<(), MlpError> {
        if self.version != FORMAT_VERSION {
            return Err(MlpError::Version(self.version));
        }
        if self.input_dim == 0 {
            return Err(MlpError::Dimension("input_dim must be positive".into()));
        }
        let mut width = self.input_dim;
        for (i, layer) in self.layers.iter().enumerate() {
            let expected = width + if layer.concat_input { self.input_dim } else { 0 };
            if layer.cols != expected {
                return Err(MlpError::Dimension(format!(
                    "layer {i} has {} columns, expected {expected}",
                    layer.cols
                )));
            }
            if layer.weights.len() != layer.rows * layer.cols {
                return Err(MlpError::Dimension(format!(
                    "layer {i} has {} weights, expected {}",
                    layer.weights.len(),
                    layer.rows * layer.cols
                )));
            }
            if layer.bias.len() != layer.rows {
                return Err(MlpError::Dimension(format!(
                    "layer {i} has {} biases, expected {}",
                    layer.bias.len(),
                    layer.rows
                )));
            }
            width = layer.rows;
        }
        let out = self.output_dim();
        if self.outputs.sdf >= out || self.outputs.curvature.is_some_and(|c| c >= out) {
            return Err(MlpError::Dimension(format!("output map points past {out} outputs")));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self, MlpError> {
        let raw: RawWeights = serde_json::from_str(text).map_err(|e| MlpError::Malformed(e.to_string()))?;
        let layers = raw
            .layers
            .into_iter()
            .map(|l| {
                Ok(Layer {
                    rows: l.rows,
                    cols: l.cols,
                    weights: l.weights,
                    bias: l.bias,
                    activation: Activation::parse(&l.activation)?,
                    concat_input: l.concat_input,
                })
            })
            .collect::<Result<Vec<_>, MlpError>>()?;
        let weights = Self {
            version: raw.version,
            input_dim: raw.input_dim,
            layers,
            outputs: raw.outputs.unwrap_or_default(),
        };
        weights.validate()?;
        Ok(weights)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("weights serialize")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, MlpError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), MlpError> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    /// Deterministic forward pass.
    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>, MlpError> {
        if input.len() != self.input_dim {
            return Err(MlpError::Dimension(format!(
                "input has {} values, network expects {}",
                input.len(),
                self.input_dim
            )));
        }
        let mut current = input.to_vec();
        let mut scratch = Vec::new();
        for layer in &self.layers {
            let x: &[f64] = if layer.concat_input {
                scratch.clear();
                scratch.extend_from_slice(&current);
                scratch.extend_from_slice(input);
                &scratch
            } else {
                &current
            };
            let mut out = Vec::with_capacity(layer.rows);
            for (row, b) in layer.weights.chunks_exact(layer.cols).zip(&layer.bias) {
                let mut acc = *b;
                for (w, v) in row.iter().zip(x) {
                    acc += w * v;
                }
                out.push(layer.activation.apply(acc));
            }
            current = out;
        }
        Ok(current)
    }
}
