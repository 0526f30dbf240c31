//! Layer-by-layer star propagation through a network.

use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lp::{Lp, LpConfig};
use crate::network::Network;
use crate::relax::{star_step_approx, star_step_exact};
use crate::star::{Star, StarError};

/// Default wall-clock budget for one analysis.
pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(48 * 3600);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Exact,
    Overapprox,
}

impl std::str::FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "exact" => Ok(Method::Exact),
            "overapprox" | "approx" => Ok(Method::Overapprox),
            other => Err(format!("unknown method `{other}` (expected exact or overapprox)")),
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::Exact => "exact",
            Method::Overapprox => "overapprox",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReachOptions {
    /// Worker threads for the per-layer fan-out; 0 uses available parallelism.
    pub threads: usize,
    pub timeout: Option<Duration>,
    pub lp: LpConfig,
}

impl Default for ReachOptions {
    fn default() -> Self {
        Self {
            threads: 1,
            timeout: Some(DEFAULT_TIMEOUT),
            lp: LpConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ReachStats {
    /// Live stars after each completed layer.
    pub stars_per_layer: Vec<usize>,
    pub lp_calls: u64,
    pub layer_seconds: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct ReachResult {
    pub output_stars: Vec<Star>,
    pub method: Method,
    pub stats: ReachStats,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReachError {
    #[error("input star has dimension {got}, network expects {expected}")]
    InputDim { expected: usize, got: usize },
    #[error("input set is empty")]
    EmptyInput,
    #[error("timed out after {completed_layers} completed layers")]
    Timeout { completed_layers: usize, stats: ReachStats },
    #[error("could not build worker pool: {0}")]
    ThreadPool(String),
    #[error(transparent)]
    Star(#[from] StarError),
}

enum StepError {
    Timeout,
    Star(StarError),
}

impl From<StarError> for StepError {
    fn from(e: StarError) -> Self {
        StepError::Star(e)
    }
}

pub fn reach_exact(net: &Network, input: &Star, opts: &ReachOptions) -> Result<ReachResult, ReachError> {
    reach(net, std::slice::from_ref(input), Method::Exact, opts)
}

pub fn reach_approx(net: &Network, input: &Star, opts: &ReachOptions) -> Result<ReachResult, ReachError> {
    reach(net, std::slice::from_ref(input), Method::Overapprox, opts)
}

/// Propagates every input star and concatenates the results in input order.
pub fn reach(net: &Network, inputs: &[Star], method: Method, opts: &ReachOptions) -> Result<ReachResult, ReachError> {
    let lp = Lp::new(opts.lp);
    for s in inputs {
        if s.dim() != net.input_dim() {
            return Err(ReachError::InputDim {
                expected: net.input_dim(),
                got: s.dim(),
            });
        }
        if s.is_empty(&lp).map_err(StarError::from)? {
            return Err(ReachError::EmptyInput);
        }
    }
    let deadline = opts.timeout.and_then(|t| Instant::now().checked_add(t));
    let expired = || deadline.is_some_and(|d| Instant::now() >= d);
    let threads = match opts.threads {
        0 => std::thread::available_parallelism().map_or(1, |n| n.get()),
        n => n,
    };
    let pool = if threads > 1 {
        Some(
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .map_err(|e| ReachError::ThreadPool(e.to_string()))?,
        )
    } else {
        None
    };

    let mut stats = ReachStats::default();
    let mut stars: Vec<Star> = inputs.to_vec();
    for (index, layer) in net.layers().iter().enumerate() {
        let timeout = |stats: &ReachStats| ReachError::Timeout {
            completed_layers: index,
            stats: ReachStats {
                lp_calls: lp.calls(),
                ..stats.clone()
            },
        };
        if expired() {
            return Err(timeout(&stats));
        }
        let started = Instant::now();
        let step = |s: &Star| -> Result<Vec<Star>, StepError> {
            let mapped = s.affine_map(layer.weights.view(), layer.bias.view())?;
            let mut tick = || if expired() { Err(StepError::Timeout) } else { Ok(()) };
            match method {
                Method::Exact => star_step_exact(&lp, mapped, &layer.activation, &mut tick),
                Method::Overapprox => star_step_approx(&lp, mapped, &layer.activation, &mut tick).map(|s| vec![s]),
            }
        };
        let results: Result<Vec<Vec<Star>>, StepError> = match &pool {
            Some(pool) => pool.install(|| stars.par_iter().map(step).collect()),
            None => stars.iter().map(step).collect(),
        };
        stars = match results {
            Ok(r) => r.into_iter().flatten().collect(),
            Err(StepError::Timeout) => return Err(timeout(&stats)),
            Err(StepError::Star(e)) => return Err(e.into()),
        };
        stats.stars_per_layer.push(stars.len());
        stats.layer_seconds.push(started.elapsed().as_secs_f64());
    }
    stats.lp_calls = lp.calls();
    Ok(ReachResult {
        output_stars: stars,
        method,
        stats,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::activation::ActivationKind;
    use crate::network::Layer;
    use ndarray::{arr1, arr2, Array1, Array2};

    fn relu_identity(k: usize) -> Network {
        Network::new(vec![Layer::new(Array2::eye(k), Array1::zeros(k), ActivationKind::Relu)]).unwrap()
    }

    #[test]
    fn identity_network_returns_input() {
        let net = Network::new(vec![Layer::new(Array2::eye(2), Array1::zeros(2), ActivationKind::Identity)]).unwrap();
        let input = Star::from_box(&[-1.0, 0.0], &[1.0, 2.0]).unwrap();
        let out = reach_exact(&net, &input, &ReachOptions::default()).unwrap();
        assert_eq!(out.output_stars, vec![input]);
        assert_eq!(out.stats.stars_per_layer, vec![1]);
    }

    #[test]
    fn orthant_split() {
        let input = Star::from_box(&[-1.0, -1.0], &[1.0, 1.0]).unwrap();
        let out = reach_exact(&relu_identity(2), &input, &ReachOptions::default()).unwrap();
        assert_eq!(out.output_stars.len(), 4);
        for s in &out.output_stars {
            assert_eq!(s.anchor(), input.anchor());
        }
    }

    #[test]
    fn relu_difference_union_is_interval() {
        let lp = Lp::default();
        let net = Network::new(vec![
            Layer::new(arr2(&[[1.0], [-1.0]]), arr1(&[0.0, 0.0]), ActivationKind::Relu),
            Layer::new(arr2(&[[1.0, -1.0]]), arr1(&[0.0]), ActivationKind::Identity),
        ])
        .unwrap();
        let input = Star::from_box(&[-1.0], &[1.0]).unwrap();
        let out = reach_exact(&net, &input, &ReachOptions::default()).unwrap();
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for s in &out.output_stars {
            let b = s.dim_bounds(&lp, 0).unwrap();
            lo = lo.min(b.lower);
            hi = hi.max(b.upper);
        }
        assert!((lo + 1.0).abs() < 1e-9 && (hi - 1.0).abs() < 1e-9);
        for k in 0..=20 {
            let x = -1.0 + 0.1 * k as f64;
            let hit = out
                .output_stars
                .iter()
                .any(|s| s.contains_point(&lp, arr1(&[x]).view(), 1e-9).unwrap());
            assert!(hit, "{x} missing from union");
        }
    }

    #[test]
    fn approx_single_relu() {
        let lp = Lp::default();
        let net = Network::new(vec![Layer::new(arr2(&[[1.0]]), arr1(&[0.0]), ActivationKind::Relu)]).unwrap();
        let input = Star::from_box(&[-1.0], &[1.0]).unwrap();
        let out = reach_approx(&net, &input, &ReachOptions::default()).unwrap();
        assert_eq!(out.output_stars.len(), 1);
        let s = &out.output_stars[0];
        assert_eq!(s.num_vars(), 2);
        let fresh = Star::new(s.center().clone(), s.basis().clone(), s.predicate().clone()).unwrap();
        let b = fresh.dim_bounds(&lp, 0).unwrap();
        assert!(b.lower.abs() < 1e-12 && (b.upper - 1.0).abs() < 1e-12);
    }

    #[test]
    fn positive_domain_methods_agree() {
        let input = Star::from_box(&[1.0, 1.0], &[2.0, 3.0]).unwrap();
        let net = relu_identity(2);
        let exact = reach_exact(&net, &input, &ReachOptions::default()).unwrap();
        let approx = reach_approx(&net, &input, &ReachOptions::default()).unwrap();
        assert_eq!(exact.output_stars, approx.output_stars);
    }

    #[test]
    fn zero_timeout_reports_partial_progress() {
        let input = Star::from_box(&[-1.0, -1.0], &[1.0, 1.0]).unwrap();
        let opts = ReachOptions {
            timeout: Some(Duration::ZERO),
            ..Default::default()
        };
        match reach_exact(&relu_identity(2), &input, &opts) {
            Err(ReachError::Timeout { completed_layers, .. }) => assert_eq!(completed_layers, 0),
            other => panic!("expected timeout, got {other:?}"),
        }
    }

    #[test]
    fn input_errors() {
        let net = relu_identity(2);
        let wrong = Star::from_box(&[0.0], &[1.0]).unwrap();
        assert!(matches!(
            reach_exact(&net, &wrong, &ReachOptions::default()),
            Err(ReachError::InputDim { expected: 2, got: 1 })
        ));
        let empty = Star::from_box(&[1.0, 0.0], &[0.0, 1.0]).unwrap();
        assert_eq!(
            reach_exact(&net, &empty, &ReachOptions::default()).unwrap_err(),
            ReachError::EmptyInput
        );
    }

    #[test]
    fn threads_do_not_change_results() {
        let net = Network::new(vec![
            Layer::new(
                arr2(&[[1.0, -0.5], [0.3, 1.0], [-1.0, 0.2]]),
                arr1(&[0.1, -0.2, 0.05]),
                ActivationKind::Relu,
            ),
            Layer::new(
                arr2(&[[0.5, -1.0, 1.0], [1.0, 1.0, -0.3]]),
                arr1(&[0.0, 0.1]),
                ActivationKind::hard_tanh_default(),
            ),
        ])
        .unwrap();
        let input = Star::from_box(&[-1.0, -1.0], &[1.0, 1.0]).unwrap();
        let one = reach_exact(&net, &input, &ReachOptions::default()).unwrap();
        let many = reach_exact(
            &net,
            &input,
            &ReachOptions {
                threads: 4,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(one.output_stars, many.output_stars);
        assert_eq!(one.stats.stars_per_layer, many.stats.stars_per_layer);
    }
}
