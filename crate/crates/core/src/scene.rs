//! Text descriptions of analytic fields.
//!
//! A scene is a tree of nodes. Each node is a keyword followed by
//! `key=value` parameters and, for combinators, a braced list of children:
//!
//! ```text
//! # two blended spheres
//! smooth_union blend=0.1 {
//!   sphere center=-0.2,0,0 radius=0.3
//!   sphere center=0.2,0,0 radius=0.3
//! }
//! ```
//!
//! Primitives: `sphere center= radius=`, `box center= half_extents=`,
//! `torus center= major= minor=` (axis z), `plane point= normal=`.
//! Combinators: `union`, `intersection`, `smooth_union blend=`,
//! `transform offset= scale=`. Networks: `neural path=` (relative paths are
//! resolved against the scene file). Several top-level nodes form a union.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::field::{NeuralField, Sdf};
use crate::geom::{Point3, Vec3};
use crate::mlp::MlpError;

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("scene is empty")]
    Empty,
    #[error("cannot read {path}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("cannot load network {path}")]
    Network { path: PathBuf, source: MlpError },
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Word(String),
    Open,
    Close,
}

fn tokenize(text: &str) -> Vec<(Token, usize)> {
    let mut tokens = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("");
        let spaced = line.replace('{', " { ").replace('}', " } ");
        for word in spaced.split_whitespace() {
            let token = match word {
                "{" => Token::Open,
                "}" => Token::Close,
                w => Token::Word(w.to_string()),
            };
            tokens.push((token, i + 1));
        }
    }
    tokens
}

struct Parser<'a> {
    tokens: Vec<(Token, usize)>,
    pos: usize,
    base: &'a Path,
}

impl Parser<'_> {
    fn syntax(line: usize, message: impl Into<String>) -> SceneError {
        SceneError::Syntax { line, message: message.into() }
    }

    fn nodes_until_close(&mut self, opened_at: Option<usize>) -> Result<Vec<Sdf>, SceneError> {
        let mut nodes = Vec::new();
        loop {
            match self.tokens.get(self.pos) {
                None => {
                    return match opened_at {
                        Some(line) => Err(Self::syntax(line, "unclosed `{`")),
                        None => Ok(nodes),
                    }
                }
                Some((Token::Close, line)) => {
                    if opened_at.is_none() {
                        return Err(Self::syntax(*line, "unexpected `}`"));
                    }
                    self.pos += 1;
                    return Ok(nodes);
                }
                Some((Token::Open, line)) => return Err(Self::syntax(*line, "unexpected `{`")),
                Some((Token::Word(_), _)) => nodes.push(self.node()?),
            }
        }
    }

    fn node(&mut self) -> Result<Sdf, SceneError> {
        let (Token::Word(keyword), line) = self.tokens[self.pos].clone() else { unreachable!() };
        self.pos += 1;
        let mut params = BTreeMap::new();
        while let Some((Token::Word(w), l)) = self.tokens.get(self.pos) {
            let Some((k, v)) = w.split_once('=') else { break };
            if params.insert(k.to_string(), v.to_string()).is_some() {
                return Err(Self::syntax(*l, format!("duplicate parameter `{k}`")));
            }
            self.pos += 1;
        }
        let children = if let Some((Token::Open, l)) = self.tokens.get(self.pos) {
            let l = *l;
            self.pos += 1;
            Some(self.nodes_until_close(Some(l))?)
        } else {
            None
        };
        let mut p = Params { map: params, line };
        let combinator = matches!(keyword.as_str(), "union" | "intersection" | "smooth_union" | "transform");
        let children = match (combinator, children) {
            (true, Some(c)) if !c.is_empty() => c,
            (true, _) => return Err(Self::syntax(line, format!("`{keyword}` needs a non-empty child list"))),
            (false, Some(_)) => return Err(Self::syntax(line, format!("`{keyword}` takes no children"))),
            (false, None) => Vec::new(),
        };
        let sdf = match keyword.as_str() {
            "sphere" => Sdf::sphere(p.point("center")?, p.positive("radius")?),
            "box" => {
                let half_extents = p.vec("half_extents")?;
                if half_extents.iter().any(|c| *c <= 0.0) {
                    return Err(Self::syntax(line, "half_extents must be positive"));
                }
                Sdf::Box { center: p.point("center")?, half_extents }
            }
            "torus" => Sdf::torus(p.point("center")?, p.positive("major")?, p.positive("minor")?),
            "plane" => {
                let normal = p.vec("normal")?;
                if normal.norm() == 0.0 {
                    return Err(Self::syntax(line, "plane normal must be non-zero"));
                }
                Sdf::plane(p.point("point")?, normal)
            }
            "union" => Sdf::Union(children),
            "intersection" => Sdf::Intersection(children),
            "smooth_union" => Sdf::SmoothUnion { children, blend: p.positive("blend")? },
            "transform" => {
                let offset = if p.has("offset") { p.vec("offset")? } else { Vec3::zeros() };
                let scale = if p.has("scale") { p.positive("scale")? } else { 1.0 };
                let child = if children.len() == 1 { children.into_iter().next().unwrap() } else { Sdf::Union(children) };
                Sdf::TranslatedScaled { child: Box::new(child), offset, scale }
            }
            "neural" => {
                let path = self.base.join(p.take("path")?);
                let net = NeuralField::load(&path).map_err(|source| SceneError::Network { path, source })?;
                Sdf::Neural(net)
            }
            other => return Err(Self::syntax(line, format!("unknown node `{other}`"))),
        };
        p.finish()?;
        Ok(sdf)
    }
}

struct Params {
    map: BTreeMap<String, String>,
    line: usize,
}

impl Params {
    fn has(&self, key: &str) -> bool {
        self.map.contains_key(key)
    }

    fn take(&mut self, key: &str) -> Result<String, SceneError> {
        self.map
            .remove(key)
            .ok_or_else(|| SceneError::Syntax { line: self.line, message: format!("missing parameter `{key}`") })
    }

    fn scalar(&mut self, key: &str) -> Result<f64, SceneError> {
        let raw = self.take(key)?;
        parse_f64(&raw).ok_or_else(|| SceneError::Syntax { line: self.line, message: format!("`{key}`: bad number `{raw}`") })
    }

    fn positive(&mut self, key: &str) -> Result<f64, SceneError> {
        let v = self.scalar(key)?;
        if v > 0.0 {
            Ok(v)
        } else {
            Err(SceneError::Syntax { line: self.line, message: format!("`{key}` must be positive") })
        }
    }

    fn vec(&mut self, key: &str) -> Result<Vec3, SceneError> {
        let raw = self.take(key)?;
        let parts: Vec<Option<f64>> = raw.split(',').map(parse_f64).collect();
        match parts.as_slice() {
            [Some(x), Some(y), Some(z)] => Ok(Vec3::new(*x, *y, *z)),
            _ => Err(SceneError::Syntax { line: self.line, message: format!("`{key}`: expected x,y,z, got `{raw}`") }),
        }
    }

    fn point(&mut self, key: &str) -> Result<Point3, SceneError> {
        self.vec(key).map(Point3::from)
    }

    fn finish(self) -> Result<(), SceneError> {
        match self.map.keys().next() {
            Some(k) => Err(SceneError::Syntax { line: self.line, message: format!("unknown parameter `{k}`") }),
            None => Ok(()),
        }
    }
}

fn parse_f64(s: &str) -> Option<f64> {
    s.trim().parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Parses a scene; relative `neural` paths resolve against `base`.
pub fn parse_scene(text: &str, base: &Path) -> Result<Sdf, SceneError> {
    let mut parser = Parser { tokens: tokenize(text), pos: 0, base };
    let mut nodes = parser.nodes_until_close(None)?;
    match nodes.len() {
        0 => Err(SceneError::Empty),
        1 => Ok(nodes.pop().unwrap()),
        _ => Ok(Sdf::Union(nodes)),
    }
}

/// Loads a field from either a scene file or a network weights file
/// (recognised by the `.json` extension).
pub fn load_field(path: &Path) -> Result<Sdf, SceneError> {
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
        let net = NeuralField::load(path).map_err(|source| SceneError::Network { path: path.to_path_buf(), source })?;
        return Ok(Sdf::Neural(net));
    }
    let text = std::fs::read_to_string(path).map_err(|source| SceneError::Io { path: path.to_path_buf(), source })?;
    parse_scene(&text, path.parent().unwrap_or(Path::new(".")))
}
