//! Vertex prediction at boundary edges.
//!
//! Every boundary edge has a *default vector*: in the plane of its face,
//! perpendicular to the edge, pointing away from the face, with the height
//! of the default equilateral triangle. A predictor returns two numbers,
//! a length scaling `r_ls` and a rotation about the edge `r_er`, which bend
//! and stretch that vector to place the new vertex.

use std::f64::consts::{FRAC_PI_2, PI};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::field::{FieldError, ScalarField, CURVATURE_LENGTH};
use crate::geom::{rotate_about_axis, triangle_normal, Point3, Vec3};
use crate::halfedge::{HalfedgeId, HalfedgeMesh, VertexId};
use crate::mlp::{MlpError, MlpWeights};

/// Default vector length relative to `r_d`: the height of an equilateral
/// triangle with circumradius `r_d`.
pub const HEIGHT_FACTOR: f64 = 1.5;
pub const EMBEDDING_DIM: usize = 22;

#[derive(Debug, Error)]
pub enum PredictorError {
    #[error("half-edge {0} is not a boundary half-edge with an adjacent face")]
    NotBoundary(HalfedgeId),
    #[error("adjacent face of half-edge {0} is degenerate")]
    DegenerateFace(HalfedgeId),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Network(#[from] MlpError),
}

/// Local geometry of one boundary edge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryEdgeFrame {
    /// The boundary half-edge `a -> b`; its twin belongs to the adjacent face.
    pub halfedge: HalfedgeId,
    pub a_id: VertexId,
    pub b_id: VertexId,
    pub a: Point3,
    pub b: Point3,
    pub m: Point3,
    pub e_u: Vec3,
    pub n_f: Vec3,
    pub v_d: Vec3,
    pub h_d: f64,
    pub e_length: f64,
    /// Vertex of the adjacent face opposite the edge.
    pub apex: Point3,
}

impl BoundaryEdgeFrame {
    pub fn v_hat(&self) -> Vec3 {
        self.v_d / self.h_d
    }
}

pub fn build_frame(mesh: &HalfedgeMesh, h: HalfedgeId, r_d: f64) -> Result<BoundaryEdgeFrame, PredictorError> {
    if h >= mesh.num_halfedges() || !mesh.is_boundary(h) {
        return Err(PredictorError::NotBoundary(h));
    }
    let inner = mesh.twin(h);
    let Some(f) = mesh.face(inner) else { return Err(PredictorError::NotBoundary(h)) };
    let [v0, v1, v2] = mesh.face_positions(f);
    let (a_id, b_id) = (mesh.origin(h), mesh.target(h));
    let apex_id = mesh.target(mesh.next(inner).expect("face half-edge"));
    let (a, b, apex) = (mesh.position(a_id), mesh.position(b_id), mesh.position(apex_id));
    let normal = triangle_normal(&v0, &v1, &v2);
    let edge = b - a;
    let e_length = edge.norm();
    if !(normal.norm() > 0.0 && e_length > 0.0) {
        return Err(PredictorError::DegenerateFace(h));
    }
    let n_f = normal.normalize();
    let e_u = edge / e_length;
    let m = Point3::from((a.coords + b.coords) * 0.5);
    let h_d = HEIGHT_FACTOR * r_d;
    let mut v_hat = n_f.cross(&e_u).normalize();
    if v_hat.dot(&(m - apex)) < 0.0 {
        v_hat = -v_hat;
    }
    Ok(BoundaryEdgeFrame { halfedge: h, a_id, b_id, a, b, m, e_u, n_f, v_d: v_hat * h_d, h_d, e_length, apex })
}

/// The pair `[r_ls, r_er]`, always inside `[-1, 1] x [-pi/2, pi/2]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Prediction {
    pub r_ls: f64,
    pub r_er: f64,
}

impl Prediction {
    /// Clamps into range; NaN becomes zero.
    pub fn new(r_ls: f64, r_er: f64) -> Self {
        let clean = |x: f64, lim: f64| if x.is_nan() { 0.0 } else { x.clamp(-lim, lim) };
        Self { r_ls: clean(r_ls, 1.0), r_er: clean(r_er, FRAC_PI_2) }
    }
}

/// `m + (1 + r_ls) * R(e_u, r_er) v_d`; positive `r_er` tilts toward `-n_f`.
pub fn apply_prediction(frame: &BoundaryEdgeFrame, pred: &Prediction) -> Point3 {
    let v_hat = frame.v_hat();
    let dir = v_hat * pred.r_er.cos() - frame.n_f * pred.r_er.sin();
    frame.m + dir * ((1.0 + pred.r_ls) * frame.h_d)
}

/// Per point (default vertex, `a`, `b`): sdf, normal in the local frame
/// `(e_u, v_hat, n_f)`, three directional curvatures; then the edge length.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureEmbedding(pub [f64; EMBEDDING_DIM]);

pub fn build_embedding<F: ScalarField + ?Sized>(
    field: &F,
    frame: &BoundaryEdgeFrame,
) -> Result<FeatureEmbedding, FieldError> {
    let v_hat = frame.v_hat();
    let mut out = [0.0; EMBEDDING_DIM];
    let default_vertex = frame.m + frame.v_d;
    for (slot, point) in [default_vertex, frame.a, frame.b].iter().enumerate() {
        let base = slot * 7;
        out[base] = field.eval(point);
        let n = field.gradient_sample(point).normal();
        out[base + 1] = n.dot(&frame.e_u);
        out[base + 2] = n.dot(&v_hat);
        out[base + 3] = n.dot(&frame.n_f);
        let mut t = v_hat - n * v_hat.dot(&n);
        if t.norm() < 1e-9 {
            t = frame.e_u - n * frame.e_u.dot(&n);
        }
        let t = t.normalize();
        for (k, angle) in [0.0, 2.0 * PI / 3.0, -2.0 * PI / 3.0].into_iter().enumerate() {
            let dir = rotate_about_axis(&t, &n, angle);
            out[base + 4 + k] = field.directional_curvature(point, &dir, CURVATURE_LENGTH)?;
        }
    }
    out[EMBEDDING_DIM - 1] = frame.e_length;
    Ok(FeatureEmbedding(out))
}

/// A prediction plus the error that forced a fallback, if any.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictorOutput {
    pub prediction: Prediction,
    pub fallback: Option<FieldError>,
}

pub trait VertexPredictor: Send + Sync {
    fn predict(&self, field: &dyn ScalarField, frame: &BoundaryEdgeFrame) -> Result<PredictorOutput, PredictorError>;
}

/// Turning angle of the surface along the default vector, measured from
/// the projected edge midpoint over one default height.
pub fn predict_analytic(field: &dyn ScalarField, frame: &BoundaryEdgeFrame) -> PredictorOutput {
    match field.directional_curvature(&frame.m, &frame.v_hat(), frame.h_d) {
        Ok(k) => PredictorOutput { prediction: Prediction::new(0.0, k), fallback: None },
        Err(e) => PredictorOutput { prediction: Prediction::default(), fallback: Some(e) },
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct AnalyticPredictor;

impl VertexPredictor for AnalyticPredictor {
    fn predict(&self, field: &dyn ScalarField, frame: &BoundaryEdgeFrame) -> Result<PredictorOutput, PredictorError> {
        Ok(predict_analytic(field, frame))
    }
}

/// Always returns the same prediction and never queries the field.
#[derive(Debug, Clone, Copy, Default)]
pub struct ConstantPredictor(pub Prediction);

impl VertexPredictor for ConstantPredictor {
    fn predict(&self, _field: &dyn ScalarField, _frame: &BoundaryEdgeFrame) -> Result<PredictorOutput, PredictorError> {
        Ok(PredictorOutput { prediction: self.0, fallback: None })
    }
}

/// A 22-in, 2-out network over [`FeatureEmbedding`]s.
#[derive(Debug, Clone)]
pub struct MlpPredictor {
    weights: MlpWeights,
}

impl MlpPredictor {
    pub fn new(weights: MlpWeights) -> Result<Self, MlpError> {
        weights.validate()?;
        if weights.input_dim != EMBEDDING_DIM || weights.output_dim() != 2 {
            return Err(MlpError::Dimension(format!(
                "vertex network must map {EMBEDDING_DIM} inputs to 2 outputs, got {} -> {}",
                weights.input_dim,
                weights.output_dim()
            )));
        }
        Ok(Self { weights })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, MlpError> {
        Self::new(MlpWeights::load(path)?)
    }

    pub fn predict_embedding(&self, emb: &FeatureEmbedding) -> Result<Prediction, MlpError> {
        let out = self.weights.forward(&emb.0)?;
        Ok(Prediction::new(out[0], out[1] * FRAC_PI_2))
    }
}

impl VertexPredictor for MlpPredictor {
    fn predict(&self, field: &dyn ScalarField, frame: &BoundaryEdgeFrame) -> Result<PredictorOutput, PredictorError> {
        let emb = build_embedding(field, frame)?;
        Ok(PredictorOutput { prediction: self.predict_embedding(&emb)?, fallback: None })
    }
}

/// Which predictor a run uses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
#[derive(Default)]
pub enum PredictorChoice {
    #[default]
    Analytic,
    Constant(Prediction),
    Mlp(std::path::PathBuf),
}


impl PredictorChoice {
    pub fn instantiate(&self) -> Result<Box<dyn VertexPredictor>, MlpError> {
        Ok(match self {
            Self::Analytic => Box::new(AnalyticPredictor),
            Self::Constant(p) => Box::new(ConstantPredictor(*p)),
            Self::Mlp(path) => Box::new(MlpPredictor::load(path)?),
        })
    }
}

impl std::str::FromStr for PredictorChoice {
    type Err = String;

    /// `analytic`, `mlp:PATH` or `constant:R_LS,R_ER`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "analytic" {
            return Ok(Self::Analytic);
        }
        if let Some(path) = s.strip_prefix("mlp:").filter(|p| !p.is_empty()) {
            return Ok(Self::Mlp(path.into()));
        }
        if let Some(rest) = s.strip_prefix("constant:") {
            let parts: Vec<f64> = rest.split(',').map(|x| x.trim().parse::<f64>()).collect::<Result<_, _>>().map_err(|e| e.to_string())?;
            if let [r_ls, r_er] = parts[..] {
                return Ok(Self::Constant(Prediction::new(r_ls, r_er)));
            }
        }
        Err(format!("unknown predictor {s:?} (expected analytic, mlp:PATH or constant:R_LS,R_ER)"))
    }
}

/// Loss weights used when reporting [`Losses::total`].
pub const LAMBDA_SD: f64 = 1.0;
pub const LAMBDA_ER: f64 = 1.0;
pub const LAMBDA_LR: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Losses {
    pub sd: f64,
    pub er: f64,
    pub lr: f64,
    pub total: f64,
}

/// Distance of the predicted vertex from the surface, rotation error
/// against the reference turning angle, and length regularization.
pub fn loss_eval<F: ScalarField + ?Sized>(field: &F, frame: &BoundaryEdgeFrame, pred: &Prediction, phi_gt: f64) -> Losses {
    let sd = field.eval(&apply_prediction(frame, pred)).abs();
    let er = (pred.r_er - phi_gt).abs();
    let lr = pred.r_ls.abs();
    Losses { sd, er, lr, total: LAMBDA_SD * sd + LAMBDA_ER * er + LAMBDA_LR * lr }
}
