#![allow(dead_code)]

use ndarray::{Array1, Array2, ArrayView1};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use starreach::{ActivationKind, Layer, Lp, Network, Polyhedron, Star};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// One of the five piece-wise linear kinds with valid random parameters.
pub fn random_kind<R: Rng>(rng: &mut R) -> ActivationKind {
    match rng.gen_range(0..5) {
        0 => ActivationKind::Relu,
        1 => ActivationKind::LeakyRelu {
            gamma: rng.gen_range(0.05..0.5),
        },
        2 => {
            let v_min = rng.gen_range(-1.5..0.0);
            ActivationKind::HardTanh {
                v_min,
                v_max: v_min + rng.gen_range(0.2..2.0),
            }
        }
        3 => {
            let v_min = rng.gen_range(-2.5..0.0);
            ActivationKind::HardSigmoid {
                v_min,
                v_max: v_min + rng.gen_range(0.5..3.0),
            }
        }
        _ => {
            let r_min = rng.gen_range(-1.0..0.5);
            ActivationKind::UnitStep {
                val: rng.gen_range(-0.5..0.5),
                r_min,
                r_max: r_min + rng.gen_range(0.1..1.5),
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct Shape {
    pub inputs: std::ops::RangeInclusive<usize>,
    pub hidden_layers: std::ops::RangeInclusive<usize>,
    pub neurons: std::ops::RangeInclusive<usize>,
    pub outputs: std::ops::RangeInclusive<usize>,
}

impl Default for Shape {
    fn default() -> Self {
        Self {
            inputs: 2..=2,
            hidden_layers: 1..=4,
            neurons: 2..=8,
            outputs: 1..=3,
        }
    }
}

/// Random network with one activation kind per hidden layer and a linear
/// output layer. Weights are scaled by fan-in.
pub fn random_network(seed: u64, shape: &Shape) -> Network {
    let mut rng = rng(seed);
    let inputs = rng.gen_range(shape.inputs.clone());
    let hidden = rng.gen_range(shape.hidden_layers.clone());
    let mut sizes = vec![inputs];
    for _ in 0..hidden {
        sizes.push(rng.gen_range(shape.neurons.clone()));
    }
    sizes.push(rng.gen_range(shape.outputs.clone()));
    let mut layers = Vec::new();
    for k in 0..sizes.len() - 1 {
        let (fan_in, fan_out) = (sizes[k], sizes[k + 1]);
        let scale = 1.0 / (fan_in as f64).sqrt();
        let w = Array2::from_shape_fn((fan_out, fan_in), |_| rng.sample::<f64, _>(StandardNormal) * scale);
        let b = Array1::from_shape_fn(fan_out, |_| rng.gen_range(-0.3..0.3));
        let act = if k + 2 == sizes.len() {
            ActivationKind::Identity
        } else {
            random_kind(&mut rng)
        };
        layers.push(Layer::new(w, b, act));
    }
    Network::new(layers).unwrap()
}

/// Random input box around a point of `[-1, 1]^n`.
pub fn random_box(seed: u64, n: usize, max_half_width: f64) -> (Vec<f64>, Vec<f64>) {
    let mut rng = rng(seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut lo = Vec::with_capacity(n);
    let mut hi = Vec::with_capacity(n);
    for _ in 0..n {
        let c = rng.gen_range(-1.0..1.0);
        let h = rng.gen_range(0.05 * max_half_width..max_half_width);
        lo.push(c - h);
        hi.push(c + h);
    }
    (lo, hi)
}

pub fn uniform_in(rng: &mut ChaCha8Rng, lo: &[f64], hi: &[f64]) -> Array1<f64> {
    lo.iter().zip(hi).map(|(&a, &b)| rng.gen_range(a..=b)).collect()
}

/// Input point of an exact star for predicate point `alpha`.
pub fn anchor_input(s: &Star, alpha: ArrayView1<f64>) -> Array1<f64> {
    s.anchor_point_at(alpha).expect("exact stars keep their anchor")
}

pub fn max_abs_diff(a: &Array1<f64>, b: &Array1<f64>) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Whether `y` lies in `region` up to slack `tol` on every row.
pub fn in_region(region: &Polyhedron, y: ArrayView1<f64>, tol: f64) -> bool {
    region.max_violation(y) <= tol
}

/// Membership of `y` in a union of stars, trying stars whose bounding box
/// admits `y` first and confirming with an LP.
pub struct UnionMembership<'a> {
    stars: &'a [Star],
    boxes: Vec<Vec<(f64, f64)>>,
}

impl<'a> UnionMembership<'a> {
    pub fn new(lp: &Lp, stars: &'a [Star]) -> Self {
        let boxes = stars
            .iter()
            .map(|s| {
                s.bounding_box(lp)
                    .unwrap()
                    .iter()
                    .map(|b| (b.lower, b.upper))
                    .collect()
            })
            .collect();
        Self { stars, boxes }
    }

    /// `hint` names a star to try first.
    pub fn contains(&self, lp: &Lp, y: ArrayView1<f64>, tol: f64, hint: Option<usize>) -> bool {
        let admits = |k: usize| {
            self.boxes[k]
                .iter()
                .zip(y.iter())
                .all(|(&(lo, hi), &v)| v >= lo - tol && v <= hi + tol)
        };
        let order = hint.into_iter().chain((0..self.stars.len()).filter(|&k| Some(k) != hint));
        for k in order {
            if admits(k) && self.stars[k].contains_point(lp, y, tol).unwrap() {
                return true;
            }
        }
        false
    }
}

/// Index of an exact star whose predicate holds `alpha` (the input point for
/// boxes built with `Star::from_box`).
pub fn predicate_hint(stars: &[Star], alpha: ArrayView1<f64>) -> Option<usize> {
    stars.iter().position(|s| s.predicate().contains(alpha, 1e-9))
}
