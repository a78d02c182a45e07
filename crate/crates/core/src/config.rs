//! JSON run configuration.
//!
//! ```json
//! {
//!   "A": [[0, 1], [0, 0]], "B": [[0], [1]], "Sigma": [[0.25, 0], [0, 0.25]],
//!   "x0": [0, 0], "T": 1,
//!   "event": {"w": [1, 0], "a": 0},
//!   "p0": 0.7, "p1": 0.9, "dt": 0.01,
//!   "mc": {"n_paths": 1000000, "seed": 42}
//! }
//! ```
//!
//! `p1` may also be a grid string `"lo:hi:step"`. Unknown keys are rejected.

use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::linalg::{Matrix, Vector};
use crate::model::ModelSpec;
use crate::translator::EventSpec;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(rename = "A")]
    a: Vec<Vec<f64>>,
    #[serde(rename = "B")]
    b: Vec<Vec<f64>>,
    #[serde(rename = "Sigma")]
    sigma: Vec<Vec<f64>>,
    x0: Vec<f64>,
    #[serde(rename = "T")]
    horizon: f64,
    #[serde(default)]
    penalty: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    event: Option<RawEvent>,
    #[serde(default)]
    p0: Option<f64>,
    #[serde(default)]
    p1: Option<RawP1>,
    #[serde(default)]
    dt: Option<f64>,
    #[serde(default)]
    mc: Option<McSettings>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEvent {
    w: Vec<f64>,
    a: f64,
    #[serde(default)]
    b: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum RawP1 {
    Value(f64),
    Grid(String),
}

#[derive(Debug, Clone, Copy, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McSettings {
    #[serde(default)]
    pub n_paths: Option<usize>,
    #[serde(default)]
    pub seed: Option<u64>,
}

/// Target probability: a single value or a grid.
#[derive(Debug, Clone, PartialEq)]
pub enum P1Spec {
    Value(f64),
    Grid(Vec<f64>),
}

impl P1Spec {
    /// Parses `0.9` or `lo:hi:step`.
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.contains(':') {
            return parse_grid(s).map(P1Spec::Grid);
        }
        s.parse::<f64>()
            .map(P1Spec::Value)
            .map_err(|_| Error::Config(format!("cannot parse probability '{s}'")))
    }

    pub fn values(&self) -> Vec<f64> {
        match self {
            P1Spec::Value(v) => vec![*v],
            P1Spec::Grid(g) => g.clone(),
        }
    }

    pub fn single(&self) -> Result<f64> {
        match self {
            P1Spec::Value(v) => Ok(*v),
            P1Spec::Grid(_) => Err(Error::Config("expected a single p1, got a grid".into())),
        }
    }
}

/// `lo:hi:step`, inclusive of `hi` up to rounding.
pub fn parse_grid(s: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        return Err(Error::Config(format!("grid must be lo:hi:step, got '{s}'")));
    }
    let num = |t: &str| {
        t.trim()
            .parse::<f64>()
            .map_err(|_| Error::Config(format!("cannot parse '{t}' in grid '{s}'")))
    };
    let (lo, hi, step) = (num(parts[0])?, num(parts[1])?, num(parts[2])?);
    if !(step > 0.0) || !(hi >= lo) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::Config(format!("grid '{s}' needs lo <= hi and step > 0")));
    }
    let count = ((hi - lo) / step + 1e-9).floor() as usize + 1;
    if count > 1_000_000 {
        return Err(Error::Config(format!("grid '{s}' has too many points")));
    }
    Ok((0..count).map(|i| lo + step * i as f64).collect())
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub model: ModelSpec,
    pub event: Option<EventSpec>,
    pub p0: Option<f64>,
    pub p1: Option<P1Spec>,
    pub dt: Option<f64>,
    pub mc: McSettings,
}

fn matrix(rows: &[Vec<f64>], what: &str) -> Result<Matrix> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    if nrows == 0 || ncols == 0 {
        return Err(Error::Config(format!("{what} must be a non-empty array of rows")));
    }
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::Config(format!("{what} has rows of unequal length")));
    }
    Ok(Matrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let raw: RawConfig = serde_json::from_str(text)?;
        let model = ModelSpec::new(
            matrix(&raw.a, "A")?,
            matrix(&raw.b, "B")?,
            matrix(&raw.sigma, "Sigma")?,
            Vector::from_vec(raw.x0),
            raw.horizon,
            raw.penalty.as_deref().map(|p| matrix(p, "penalty")).transpose()?,
        )?;
        let event = match raw.event {
            Some(e) => {
                if e.w.len() != model.state_dim() {
                    return Err(Error::Dimension(format!(
                        "event.w has length {}, state has {}",
                        e.w.len(),
                        model.state_dim()
                    )));
                }
                Some(EventSpec::new(Vector::from_vec(e.w), e.a, e.b)?)
            }
            None => None,
        };
        let p1 = match raw.p1 {
            Some(RawP1::Value(v)) => Some(P1Spec::Value(v)),
            Some(RawP1::Grid(s)) => Some(P1Spec::parse(&s)?),
            None => None,
        };
        if let Some(dt) = raw.dt {
            if !(dt > 0.0 && dt.is_finite()) {
                return Err(Error::Config(format!("dt must be positive, got {dt}")));
            }
        }
        if raw.mc.and_then(|m| m.n_paths) == Some(0) {
            return Err(Error::Config("mc.n_paths must be >= 1".into()));
        }
        Ok(RunConfig {
            model,
            event,
            p0: raw.p0,
            p1,
            dt: raw.dt,
            mc: raw.mc.unwrap_or_default(),
        })
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn event(&self) -> Result<&EventSpec> {
        self.event
            .as_ref()
            .ok_or_else(|| Error::Config("config has no 'event' section".into()))
    }
}
