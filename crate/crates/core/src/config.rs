//! Run configuration: flat `key = value` text grouped in `[sections]`.
//!
//! ```text
//! # sphere run
//! [scene]
//! path = sphere.scene
//! bbox = -1 -1 -1 1 1 1
//!
//! [mesh]
//! r_d = 0.02
//! seeds = 8
//! ```
//!
//! Unknown sections and keys are errors, and everything is validated before
//! any computation starts.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use thiserror::Error;

use crate::geom::{Aabb, Point3};
use crate::marching_cubes::GridSpec;
use crate::mesher::MeshingParams;
use crate::metrics::DEFAULT_SAMPLES;
use crate::predictor::PredictorChoice;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: unknown key `{key}` in section [{section}]")]
    UnknownKey { line: usize, section: String, key: String },
    #[error("line {line}: invalid value for `{key}`: {message}")]
    Value { line: usize, key: String, message: String },
    #[error("{0}")]
    Invalid(String),
    #[error("cannot read {path}: {message}")]
    Read { path: PathBuf, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Mesh,
    Mc,
    Eval,
    Stats,
    Compare,
}

impl FromStr for Command {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "mesh" => Self::Mesh,
            "mc" => Self::Mc,
            "eval" => Self::Eval,
            "stats" => Self::Stats,
            "compare" => Self::Compare,
            _ => return Err(format!("unknown command {s:?}")),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Option<Command>,
    /// Scene description or network weights.
    pub scene: Option<PathBuf>,
    pub bbox: Aabb,
    pub meshing: MeshingParams,
    /// Marching-cubes cells per axis; `None` derives it from `r_d`.
    pub resolution: Option<usize>,
    /// Surface samples per point cloud during evaluation.
    pub samples: usize,
    /// Grid resolution of the reference surface used by `eval`.
    pub reference_resolution: usize,
    /// Mesh to evaluate (`eval`, `stats`).
    pub input: Option<PathBuf>,
    /// Output mesh (`.obj` or `.ply`).
    pub out: Option<PathBuf>,
    pub report: Option<PathBuf>,
    /// Prefix for histogram CSV files.
    pub histograms: Option<PathBuf>,
    pub threads: Option<usize>,
    /// Seed of the evaluation sampler.
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            command: None,
            scene: None,
            bbox: Aabb::cube(1.0),
            meshing: MeshingParams::new(0.02),
            resolution: None,
            samples: DEFAULT_SAMPLES,
            reference_resolution: 256,
            input: None,
            out: None,
            report: None,
            histograms: None,
            threads: None,
            seed: 0,
        }
    }
}

const KEYS: &[(&str, &[&str])] = &[
    ("run", &["command", "seed", "threads"]),
    ("scene", &["path", "bbox"]),
    (
        "mesh",
        &[
            "r_d", "seeds", "oversample", "projection_rounds", "batch_sep", "d_min", "t_v", "t_near", "max_steps", "retries",
            "predictor", "validate_each_step",
        ],
    ),
    ("grid", &["resolution"]),
    ("eval", &["samples", "reference_resolution", "input"]),
    ("output", &["mesh", "report", "histograms"]),
];

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Read { path: path.into(), message: e.to_string() })?;
        let base = path.parent().unwrap_or(Path::new(""));
        Self::parse(&text, base)
    }

    /// Parses config text; relative paths are resolved against `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self, ConfigError> {
        let mut entries = Vec::new();
        let mut section = String::new();
        for (n, raw) in text.lines().enumerate() {
            let line = n + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            if let Some(name) = content.strip_prefix('[') {
                let name = name.strip_suffix(']').ok_or(ConfigError::Syntax { line, message: "unterminated section header".into() })?;
                let name = name.trim();
                if !KEYS.iter().any(|(s, _)| *s == name) {
                    return Err(ConfigError::Syntax { line, message: format!("unknown section [{name}]") });
                }
                section = name.to_string();
                continue;
            }
            let (key, value) = content.split_once('=').ok_or(ConfigError::Syntax { line, message: "expected `key = value`".into() })?;
            let (key, value) = (key.trim(), value.trim());
            let known = KEYS.iter().find(|(s, _)| *s == section).is_some_and(|(_, keys)| keys.contains(&key));
            if !known {
                return Err(ConfigError::UnknownKey { line, section: section.clone(), key: key.into() });
            }
            entries.push((line, section.clone(), key.to_string(), value.to_string()));
        }

        let mut cfg = Self::default();
        // r_d first so explicit thresholds override the derived ones
        if let Some((line, _, key, value)) = entries.iter().find(|e| e.1 == "mesh" && e.2 == "r_d") {
            cfg.meshing = cfg.meshing.with_r_d(parse_value(*line, key, value)?);
        }
        let path = |v: &str| base.join(v);
        for (line, section, key, value) in &entries {
            let line = *line;
            macro_rules! set {
                ($target:expr) => {
                    $target = parse_value(line, key, value)?
                };
            }
            match (section.as_str(), key.as_str()) {
                ("run", "command") => cfg.command = Some(parse_value(line, key, value)?),
                ("run", "seed") => set!(cfg.seed),
                ("run", "threads") => cfg.threads = Some(parse_value(line, key, value)?),
                ("scene", "path") => cfg.scene = Some(path(value)),
                ("scene", "bbox") => cfg.bbox = parse_bbox(value).map_err(|m| value_error(line, key, m))?,
                ("mesh", "r_d") => {}
                ("mesh", "seeds") => set!(cfg.meshing.seeds),
                ("mesh", "oversample") => set!(cfg.meshing.oversample),
                ("mesh", "projection_rounds") => set!(cfg.meshing.projection_rounds),
                ("mesh", "batch_sep") => set!(cfg.meshing.batch_sep),
                ("mesh", "d_min") => set!(cfg.meshing.d_min),
                ("mesh", "t_v") => set!(cfg.meshing.t_v),
                ("mesh", "t_near") => set!(cfg.meshing.t_near),
                ("mesh", "max_steps") => set!(cfg.meshing.max_steps),
                ("mesh", "retries") => set!(cfg.meshing.retries),
                ("mesh", "validate_each_step") => set!(cfg.meshing.validate_each_step),
                ("mesh", "predictor") => {
                    let choice: PredictorChoice = parse_value(line, key, value)?;
                    cfg.meshing.predictor = match choice {
                        PredictorChoice::Mlp(p) => PredictorChoice::Mlp(path(&p.to_string_lossy())),
                        other => other,
                    };
                }
                ("grid", "resolution") => cfg.resolution = Some(parse_value(line, key, value)?),
                ("eval", "samples") => set!(cfg.samples),
                ("eval", "reference_resolution") => set!(cfg.reference_resolution),
                ("eval", "input") => cfg.input = Some(path(value)),
                ("output", "mesh") => cfg.out = Some(path(value)),
                ("output", "report") => cfg.report = Some(path(value)),
                ("output", "histograms") => cfg.histograms = Some(path(value)),
                _ => unreachable!("keys are checked against the table"),
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.meshing.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if !self.bbox.is_valid() {
            return Err(ConfigError::Invalid("bounding box must have positive extent on every axis".into()));
        }
        if let Some(res) = self.resolution {
            GridSpec::new(self.bbox, res).map_err(|e| ConfigError::Invalid(e.to_string()))?;
        }
        if self.samples == 0 {
            return Err(ConfigError::Invalid("samples must be at least 1".into()));
        }
        if self.reference_resolution < 2 {
            return Err(ConfigError::Invalid("reference_resolution must be at least 2".into()));
        }
        if self.threads == Some(0) {
            return Err(ConfigError::Invalid("threads must be at least 1".into()));
        }
        Ok(())
    }

    /// Grid used for marching cubes: the explicit resolution, or the one
    /// matching the mesher's detail.
    pub fn grid(&self) -> Result<GridSpec, ConfigError> {
        let res = self.resolution.unwrap_or_else(|| matched_resolution(&self.bbox, self.meshing.r_d));
        GridSpec::new(self.bbox, res).map_err(|e| ConfigError::Invalid(e.to_string()))
    }
}

/// Cells per axis whose size matches the default triangle side `r_d * sqrt(3)`.
pub fn matched_resolution(bbox: &Aabb, r_d: f64) -> usize {
    (bbox.extent().max() / (r_d * 3f64.sqrt())).ceil() as usize
}

fn value_error(line: usize, key: &str, message: impl ToString) -> ConfigError {
    ConfigError::Value { line, key: key.into(), message: message.to_string() }
}

fn parse_value<T: FromStr>(line: usize, key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    value.parse().map_err(|e: T::Err| value_error(line, key, e))
}

/// Six numbers: min corner then max corner.
pub fn parse_bbox(s: &str) -> Result<Aabb, String> {
    let v: Vec<f64> = s.split([' ', ',', '\t']).filter(|t| !t.is_empty()).map(f64::from_str).collect::<Result<_, _>>().map_err(|e| e.to_string())?;
    match v[..] {
        [a, b, c, d, e, f] => Ok(Aabb::new(Point3::new(a, b, c), Point3::new(d, e, f))),
        _ => Err(format!("expected 6 numbers, got {}", v.len())),
    }
}
