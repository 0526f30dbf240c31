//! JSON verification problems.
//!
//! ```json
//! {
//!   "input": {"box": {"lower": [0, 0], "upper": [1, 1]}},
//!   "unsafe": [{"mat": [[-1, 0]], "rhs": [-2]}],
//!   "method": "exact",
//!   "normalize": false,
//!   "timeout": 60
//! }
//! ```
//!
//! `input` may also be `{"poly": {"mat": ..., "rhs": ...}}` or an array of
//! such sets. Without `unsafe` the problem is reach-only.

use ndarray::{Array1, Array2};
use serde::de::DeserializeOwned;
use serde::Deserialize;
use thiserror::Error;

use super::nnet::{normalize_input_box, NnetError, NnetMetadata};
use crate::lp::Polyhedron;
use crate::network::Network;
use crate::reach::Method;
use crate::star::Star;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProblemError {
    #[error("at `{path}`: {message}")]
    Schema { path: String, message: String },
    #[error("{0}")]
    Mismatch(String),
    #[error(transparent)]
    Normalize(#[from] NnetError),
}

#[derive(Debug, Clone, PartialEq)]
pub enum InputSet {
    Box { lower: Vec<f64>, upper: Vec<f64> },
    Poly(Polyhedron),
}

impl InputSet {
    pub fn dim(&self) -> usize {
        match self {
            InputSet::Box { lower, .. } => lower.len(),
            InputSet::Poly(p) => p.num_vars(),
        }
    }

    /// The set as a star, optionally mapped into normalized coordinates.
    ///
    /// Polytopes are normalized by the affine change of variables only; the
    /// clamp to `[min, max]` applies to boxes.
    pub fn to_star(&self, normalize: Option<&NnetMetadata>) -> Result<Star, ProblemError> {
        let schema = |e: String| ProblemError::Mismatch(e);
        match (self, normalize) {
            (InputSet::Box { lower, upper }, None) => Star::from_box(lower, upper).map_err(|e| schema(e.to_string())),
            (InputSet::Box { lower, upper }, Some(meta)) => {
                let (lo, hi) = normalize_input_box(meta, lower, upper)?;
                Star::from_box(&lo, &hi).map_err(|e| schema(e.to_string()))
            }
            (InputSet::Poly(p), None) => Ok(Star::from_polyhedron(p.clone())),
            (InputSet::Poly(p), Some(meta)) => {
                if meta.input_ranges.len() != p.num_vars() {
                    return Err(schema(format!(
                        "polytope has {} variables, metadata {} inputs",
                        p.num_vars(),
                        meta.input_ranges.len()
                    )));
                }
                if let Some(i) = meta.input_ranges.iter().position(|&r| r.is_nan() || r <= 0.0) {
                    return Err(NnetError::Normalize(format!("input {i} has a non-positive range")).into());
                }
                // x = mean + range * x'
                let range = Array1::from(meta.input_ranges.clone());
                let mean = Array1::from(meta.input_means.clone());
                let a = p.matrix() * &range;
                let b = p.rhs() - &p.matrix().dot(&mean);
                let poly = Polyhedron::new(a, b).map_err(|e| schema(e.to_string()))?;
                Ok(Star::from_polyhedron(poly))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    pub input_sets: Vec<InputSet>,
    pub unsafe_regions: Vec<Polyhedron>,
    pub method: Option<Method>,
    pub normalize_inputs: bool,
    pub timeout_seconds: Option<f64>,
}

impl ProblemSpec {
    /// Whether the problem asks only for the reachable set.
    pub fn is_reach_only(&self) -> bool {
        self.unsafe_regions.is_empty()
    }

    /// Checks dimensions against `net`.
    pub fn validate(&self, net: &Network) -> Result<(), ProblemError> {
        for (i, set) in self.input_sets.iter().enumerate() {
            if set.dim() != net.input_dim() {
                return Err(ProblemError::Mismatch(format!(
                    "input set {i} has dimension {}, network has {} inputs",
                    set.dim(),
                    net.input_dim()
                )));
            }
        }
        for (i, region) in self.unsafe_regions.iter().enumerate() {
            if region.num_vars() != net.output_dim() {
                return Err(ProblemError::Mismatch(format!(
                    "unsafe region {i} has dimension {}, network has {} outputs",
                    region.num_vars(),
                    net.output_dim()
                )));
            }
        }
        Ok(())
    }

    pub fn input_stars(&self, meta: Option<&NnetMetadata>) -> Result<Vec<Star>, ProblemError> {
        let meta = if self.normalize_inputs { meta } else { None };
        if self.normalize_inputs && meta.is_none() {
            return Err(ProblemError::Mismatch("normalization requested without network metadata".into()));
        }
        self.input_sets.iter().map(|s| s.to_star(meta)).collect()
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProblem {
    input: serde_json::Value,
    #[serde(rename = "unsafe", default)]
    unsafe_regions: Vec<RawPoly>,
    #[serde(default)]
    method: Option<Method>,
    #[serde(default)]
    normalize: bool,
    #[serde(default)]
    timeout: Option<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPoly {
    mat: Vec<Vec<f64>>,
    rhs: Vec<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBox {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields, rename_all = "lowercase")]
enum RawSet {
    Box(RawBox),
    Poly(RawPoly),
}

fn schema(path: impl Into<String>, message: impl Into<String>) -> ProblemError {
    ProblemError::Schema {
        path: path.into(),
        message: message.into(),
    }
}

fn join_path(prefix: &str, inner: &str) -> String {
    match inner {
        "" | "." if prefix.is_empty() => ".".to_string(),
        "" | "." => prefix.to_string(),
        _ if prefix.is_empty() => inner.to_string(),
        _ if inner.starts_with('[') => format!("{prefix}{inner}"),
        _ => format!("{prefix}.{inner}"),
    }
}

fn decode<T: DeserializeOwned>(value: &serde_json::Value, prefix: &str) -> Result<T, ProblemError> {
    serde_path_to_error::deserialize(value).map_err(|e| {
        let inner = e.path().to_string();
        schema(join_path(prefix, &inner), e.into_inner().to_string())
    })
}

fn polyhedron(raw: RawPoly, path: &str) -> Result<Polyhedron, ProblemError> {
    let rows = raw.mat.len();
    if raw.rhs.len() != rows {
        return Err(schema(
            format!("{path}.rhs"),
            format!("{} entries for {rows} rows of `mat`", raw.rhs.len()),
        ));
    }
    let cols = raw.mat.first().map_or(0, Vec::len);
    if let Some(i) = raw.mat.iter().position(|r| r.len() != cols) {
        return Err(schema(
            format!("{path}.mat[{i}]"),
            format!("row has {} entries, expected {cols}", raw.mat[i].len()),
        ));
    }
    if rows == 0 {
        return Err(schema(format!("{path}.mat"), "needs at least one row"));
    }
    let a = Array2::from_shape_vec((rows, cols), raw.mat.into_iter().flatten().collect())
        .map_err(|e| schema(path, e.to_string()))?;
    Polyhedron::new(a, Array1::from(raw.rhs)).map_err(|e| schema(path, e.to_string()))
}

fn input_set(value: &serde_json::Value, path: &str) -> Result<InputSet, ProblemError> {
    match decode::<RawSet>(value, path)? {
        RawSet::Box(RawBox { lower, upper }) => {
            if lower.len() != upper.len() {
                return Err(schema(
                    format!("{path}.box.upper"),
                    format!("{} entries, `lower` has {}", upper.len(), lower.len()),
                ));
            }
            if let Some(i) = (0..lower.len()).find(|&i| lower[i] > upper[i]) {
                return Err(schema(
                    format!("{path}.box"),
                    format!("lower[{i}] = {} exceeds upper[{i}] = {}", lower[i], upper[i]),
                ));
            }
            Ok(InputSet::Box { lower, upper })
        }
        RawSet::Poly(raw) => Ok(InputSet::Poly(polyhedron(raw, &format!("{path}.poly"))?)),
    }
}

pub fn parse_problem(text: &str) -> Result<ProblemSpec, ProblemError> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| {
        schema(
            ".",
            format!("invalid JSON at line {} column {}: {e}", e.line(), e.column()),
        )
    })?;
    let raw: RawProblem = decode(&value, "")?;
    let input_sets = match &raw.input {
        serde_json::Value::Array(items) => {
            if items.is_empty() {
                return Err(schema("input", "needs at least one set"));
            }
            items
                .iter()
                .enumerate()
                .map(|(i, v)| input_set(v, &format!("input[{i}]")))
                .collect::<Result<Vec<_>, _>>()?
        }
        single => vec![input_set(single, "input")?],
    };
    if let Some(d) = input_sets.first().map(InputSet::dim) {
        if let Some(i) = input_sets.iter().position(|s| s.dim() != d) {
            return Err(schema(format!("input[{i}]"), format!("dimension differs from input[0] ({d})")));
        }
    }
    let unsafe_regions = raw
        .unsafe_regions
        .into_iter()
        .enumerate()
        .map(|(i, p)| polyhedron(p, &format!("unsafe[{i}]")))
        .collect::<Result<Vec<_>, _>>()?;
    if let Some(t) = raw.timeout {
        if !(t >= 0.0) || !t.is_finite() {
            return Err(schema("timeout", format!("{t} is not a nonnegative number of seconds")));
        }
    }
    Ok(ProblemSpec {
        input_sets,
        unsafe_regions,
        method: raw.method,
        normalize_inputs: raw.normalize,
        timeout_seconds: raw.timeout,
    })
}
