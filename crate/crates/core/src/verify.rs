//! Safety verdicts, counter-input sets and local robustness.

use ndarray::{Array1, ArrayView1};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lp::{Lp, LpError, Polyhedron, Sense};
use crate::network::Network;
use crate::reach::{reach, Method, ReachError, ReachOptions, ReachResult, ReachStats};
use crate::star::{Anchor, DimBounds, Star, StarError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VerifyError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("star has no input anchor; counter inputs need an exact analysis")]
    MissingAnchor,
    #[error("star was over-approximated; its anchor no longer describes inputs exactly")]
    RelaxedAnchor,
    #[error("star does not meet the unsafe region")]
    NoViolation,
    #[error("delta must be a nonnegative number, got {0}")]
    Delta(f64),
    #[error("label {label} out of range for {outputs} outputs")]
    Label { label: usize, outputs: usize },
    #[error(transparent)]
    Star(#[from] StarError),
    #[error(transparent)]
    Reach(#[from] ReachError),
}

impl From<LpError> for VerifyError {
    fn from(e: LpError) -> Self {
        VerifyError::Star(e.into())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SafetyStatus {
    Safe,
    Unsafe,
    Unknown,
}

/// Inputs driving output star `output_star` into unsafe region `region`.
#[derive(Debug, Clone, PartialEq)]
pub struct CounterInput {
    pub output_star: usize,
    pub region: usize,
    pub star: Star,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Verdict {
    pub status: SafetyStatus,
    pub counter_input_stars: Vec<CounterInput>,
    /// Regions met by some output star, ascending.
    pub violated_regions: Vec<usize>,
}

pub fn check_safety(lp: &Lp, result: &ReachResult, regions: &[Polyhedron]) -> Result<Verdict, VerifyError> {
    for (i, region) in regions.iter().enumerate() {
        if let Some(s) = result.output_stars.first() {
            if region.num_vars() != s.dim() {
                return Err(VerifyError::Dimension(format!(
                    "unsafe region {i} has {} variables, outputs have {}",
                    region.num_vars(),
                    s.dim()
                )));
            }
        }
    }
    let mut hit = vec![false; regions.len()];
    let mut counter_input_stars = Vec::new();
    for (k, s) in result.output_stars.iter().enumerate() {
        for (i, region) in regions.iter().enumerate() {
            let cut = s.intersect_polyhedron(region)?;
            if cut.is_empty(lp)? {
                continue;
            }
            hit[i] = true;
            if result.method == Method::Exact {
                counter_input_stars.push(CounterInput {
                    output_star: k,
                    region: i,
                    star: counter_input_set(lp, s, region)?,
                });
            }
        }
    }
    let violated_regions: Vec<usize> = (0..regions.len()).filter(|&i| hit[i]).collect();
    let status = match (violated_regions.is_empty(), result.method) {
        (true, _) => SafetyStatus::Safe,
        (false, Method::Exact) => SafetyStatus::Unsafe,
        (false, Method::Overapprox) => SafetyStatus::Unknown,
    };
    Ok(Verdict {
        status,
        counter_input_stars,
        violated_regions,
    })
}

/// Star over the network inputs whose every point is mapped into `region`
/// through the output star `violating`.
pub fn counter_input_set(lp: &Lp, violating: &Star, region: &Polyhedron) -> Result<Star, VerifyError> {
    let anchor = violating.anchor().ok_or(VerifyError::MissingAnchor)?;
    if anchor.relaxed {
        return Err(VerifyError::RelaxedAnchor);
    }
    if region.num_vars() != violating.dim() {
        return Err(VerifyError::Dimension(format!(
            "region has {} variables, star has dimension {}",
            region.num_vars(),
            violating.dim()
        )));
    }
    let cut = violating.intersect_polyhedron(region)?;
    if cut.is_empty(lp)? {
        return Err(VerifyError::NoViolation);
    }
    let inputs = Star::new(anchor.center.clone(), anchor.basis.clone(), cut.predicate().clone())?;
    Ok(inputs.with_anchor(Some(Anchor {
        center: anchor.center.clone(),
        basis: anchor.basis.clone(),
        relaxed: false,
    }))?)
}

/// How a label is read off a multi-output network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LabelConvention {
    /// The label is the index of the largest output.
    #[default]
    Max,
    /// The label is the index of the smallest output (ACAS Xu advisories).
    Min,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RobustnessOptions {
    pub method: Method,
    /// Decision threshold for single-output networks.
    pub threshold: f64,
    pub convention: LabelConvention,
    pub reach: ReachOptions,
}

impl Default for RobustnessOptions {
    fn default() -> Self {
        Self {
            method: Method::Exact,
            threshold: 0.5,
            convention: LabelConvention::Max,
            reach: ReachOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RobustStatus {
    True,
    False,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StarLabel {
    /// Label carried by every point of the star, if one is provable.
    pub label: Option<usize>,
    pub bounds: Vec<DimBounds>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RobustnessResult {
    pub status: RobustStatus,
    pub stars: Vec<StarLabel>,
    pub stats: ReachStats,
}

/// Whether output `label` dominates every other output over all of `s`.
fn dominates(lp: &Lp, s: &Star, label: usize, convention: LabelConvention) -> Result<bool, VerifyError> {
    let c = s.center();
    let v = s.basis();
    for e in (0..s.dim()).filter(|&e| e != label) {
        // maximize y_e - y_label (or the reverse under the min convention)
        let (hi, lo) = match convention {
            LabelConvention::Max => (e, label),
            LabelConvention::Min => (label, e),
        };
        let obj: Array1<f64> = &v.row(hi) - &v.row(lo);
        let offset = c[hi] - c[lo];
        let worst = match lp.solve(obj.view(), Sense::Maximize, s.predicate())? {
            crate::lp::LpOutcome::Optimal { value, .. } => value + offset,
            crate::lp::LpOutcome::Unbounded { .. } => f64::INFINITY,
            crate::lp::LpOutcome::Infeasible => return Err(StarError::Empty.into()),
        };
        if worst > 1e-9 * (1.0 + offset.abs()) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// The label shared by all points of `s`, or `None` if the star mixes labels
/// (or the rule cannot separate them).
pub fn star_label(
    lp: &Lp,
    s: &Star,
    preferred: usize,
    threshold: f64,
    convention: LabelConvention,
) -> Result<StarLabel, VerifyError> {
    let bounds = s.bounding_box(lp)?;
    if s.dim() == 1 {
        let b = bounds[0];
        let label = if b.lower >= threshold {
            Some(1)
        } else if b.upper < threshold {
            Some(0)
        } else {
            None
        };
        return Ok(StarLabel { label, bounds });
    }
    let best_lower = match convention {
        LabelConvention::Max => bounds.iter().map(|b| b.lower).fold(f64::NEG_INFINITY, f64::max),
        LabelConvention::Min => bounds.iter().map(|b| b.upper).fold(f64::INFINITY, f64::min),
    };
    let viable = |k: usize| match convention {
        LabelConvention::Max => bounds[k].upper >= best_lower,
        LabelConvention::Min => bounds[k].lower <= best_lower,
    };
    let order = std::iter::once(preferred).chain((0..s.dim()).filter(|&k| k != preferred));
    for k in order {
        if k < s.dim() && viable(k) && dominates(lp, s, k, convention)? {
            return Ok(StarLabel {
                label: Some(k),
                bounds,
            });
        }
    }
    Ok(StarLabel { label: None, bounds })
}

/// Checks that every input within L-infinity distance `delta` of `x` gets
/// `expected_label`.
pub fn check_local_robustness(
    net: &Network,
    x: ArrayView1<f64>,
    delta: f64,
    expected_label: usize,
    opts: &RobustnessOptions,
) -> Result<RobustnessResult, VerifyError> {
    if !(delta >= 0.0) || !delta.is_finite() {
        return Err(VerifyError::Delta(delta));
    }
    if x.len() != net.input_dim() {
        return Err(VerifyError::Dimension(format!(
            "input has {} entries, network expects {}",
            x.len(),
            net.input_dim()
        )));
    }
    let labels = if net.output_dim() == 1 { 2 } else { net.output_dim() };
    if expected_label >= labels {
        return Err(VerifyError::Label {
            label: expected_label,
            outputs: labels,
        });
    }
    let lower: Vec<f64> = x.iter().map(|v| v - delta).collect();
    let upper: Vec<f64> = x.iter().map(|v| v + delta).collect();
    let input = Star::from_box(&lower, &upper)?;
    let result = reach(net, std::slice::from_ref(&input), opts.method, &opts.reach)?;
    let lp = Lp::new(opts.reach.lp);
    let stars = result
        .output_stars
        .iter()
        .map(|s| star_label(&lp, s, expected_label, opts.threshold, opts.convention))
        .collect::<Result<Vec<_>, _>>()?;
    let all_expected = stars.iter().all(|s| s.label == Some(expected_label));
    let status = match (all_expected, opts.method) {
        (true, _) => RobustStatus::True,
        (false, Method::Exact) => RobustStatus::False,
        (false, Method::Overapprox) => RobustStatus::Inconclusive,
    };
    let mut stats = result.stats;
    stats.lp_calls += lp.calls();
    Ok(RobustnessResult { status, stars, stats })
}
