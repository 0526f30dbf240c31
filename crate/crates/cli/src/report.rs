use serde::Serialize;
use sha2::{Digest, Sha256};

use starreach::{DimBounds, ReachStats};

/// Machine-readable outcome of one run. Field order is the key order of the
/// emitted JSON.
#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub command: &'static str,
    pub verdict: String,
    pub method: String,
    pub reach_time_seconds: f64,
    pub check_time_seconds: f64,
    pub output_star_count: Option<usize>,
    pub stars_per_layer: Vec<usize>,
    pub lp_call_count: u64,
    pub violated_regions: Vec<usize>,
    pub counter_inputs: Vec<CounterInputBox>,
    pub output_boxes: Vec<Vec<Interval>>,
    pub star_labels: Vec<Option<usize>>,
    pub tool_version: &'static str,
    pub inputs: Vec<InputDigest>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CounterInputBox {
    pub output_star: usize,
    pub region: usize,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

/// A closed interval; infinite ends are written as `null`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Interval {
    pub lower: Option<f64>,
    pub upper: Option<f64>,
}

impl From<DimBounds> for Interval {
    fn from(b: DimBounds) -> Self {
        let finite = |v: f64| v.is_finite().then_some(v);
        Self {
            lower: finite(b.lower),
            upper: finite(b.upper),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct InputDigest {
    pub role: &'static str,
    pub path: String,
    pub sha256: String,
}

impl InputDigest {
    pub fn new(role: &'static str, path: &str, bytes: &[u8]) -> Self {
        Self {
            role,
            path: path.to_string(),
            sha256: hex::encode(Sha256::digest(bytes)),
        }
    }
}

impl Report {
    pub fn new(command: &'static str, method: starreach::Method, inputs: Vec<InputDigest>) -> Self {
        Self {
            command,
            verdict: String::new(),
            method: method.to_string(),
            reach_time_seconds: 0.0,
            check_time_seconds: 0.0,
            output_star_count: None,
            stars_per_layer: Vec::new(),
            lp_call_count: 0,
            violated_regions: Vec::new(),
            counter_inputs: Vec::new(),
            output_boxes: Vec::new(),
            star_labels: Vec::new(),
            tool_version: env!("CARGO_PKG_VERSION"),
            inputs,
        }
    }

    pub fn with_stats(mut self, stats: &ReachStats) -> Self {
        self.stars_per_layer = stats.stars_per_layer.clone();
        self.lp_call_count = stats.lp_calls;
        self
    }

    pub fn summary(&self) -> String {
        let stars = self
            .output_star_count
            .map_or_else(|| "no".to_string(), |n| n.to_string());
        format!(
            "{}: {} ({} method, {stars} output stars, reach {:.3}s, check {:.3}s, {} LPs)",
            self.command, self.verdict, self.method, self.reach_time_seconds, self.check_time_seconds, self.lp_call_count
        )
    }
}
