//! Parameterized piece-wise linear activations.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
#[error("invalid activation parameters: {0}")]
pub struct ActivationError(pub String);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ActivationKind {
    Identity,
    Relu,
    LeakyRelu { gamma: f64 },
    HardTanh { v_min: f64, v_max: f64 },
    HardSigmoid { v_min: f64, v_max: f64 },
    UnitStep { val: f64, r_min: f64, r_max: f64 },
}

impl ActivationKind {
    pub const fn hard_tanh_default() -> Self {
        ActivationKind::HardTanh { v_min: -1.0, v_max: 1.0 }
    }

    pub const fn unit_step_default() -> Self {
        ActivationKind::UnitStep {
            val: 0.0,
            r_min: 0.0,
            r_max: 1.0,
        }
    }

    pub fn validate(&self) -> Result<(), ActivationError> {
        let finite = |vals: &[f64]| vals.iter().all(|v| v.is_finite());
        match *self {
            ActivationKind::Identity | ActivationKind::Relu => Ok(()),
            ActivationKind::LeakyRelu { gamma } if gamma > 0.0 && gamma < 1.0 => Ok(()),
            ActivationKind::LeakyRelu { gamma } => {
                Err(ActivationError(format!("leaky relu slope {gamma} outside (0, 1)")))
            }
            ActivationKind::HardTanh { v_min, v_max } if finite(&[v_min, v_max]) && v_min <= v_max => Ok(()),
            ActivationKind::HardSigmoid { v_min, v_max } if finite(&[v_min, v_max]) && v_min < v_max => Ok(()),
            ActivationKind::UnitStep { val, r_min, r_max } if finite(&[val, r_min, r_max]) && r_min <= r_max => {
                Ok(())
            }
            other => Err(ActivationError(format!("{other:?}"))),
        }
    }

    /// Scalar semantics of the activation.
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            ActivationKind::Identity => x,
            ActivationKind::Relu => x.max(0.0),
            ActivationKind::LeakyRelu { gamma } => (gamma * x).max(x),
            ActivationKind::HardTanh { v_min, v_max } => {
                if x < v_min {
                    v_min
                } else if x > v_max {
                    v_max
                } else {
                    x
                }
            }
            ActivationKind::HardSigmoid { v_min, v_max } => {
                if x <= v_min {
                    0.0
                } else if x >= v_max {
                    1.0
                } else {
                    x / (v_max - v_min) + v_min / (v_min - v_max)
                }
            }
            ActivationKind::UnitStep { val, r_min, r_max } => {
                if x >= val {
                    r_max
                } else {
                    r_min
                }
            }
        }
    }

    pub fn piecewise(&self) -> PiecewiseSpec {
        PiecewiseSpec::of(self)
    }
}

/// Scalar semantics of `kind` at `x`.
pub fn scalar_eval(kind: &ActivationKind, x: f64) -> f64 {
    kind.eval(x)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Breakpoint {
    pub x: f64,
    /// Left limit of the activation at `x`.
    pub y_left: f64,
    /// Value at `x` (activations are right-continuous at jumps).
    pub y_right: f64,
}

impl Breakpoint {
    pub fn is_jump(&self) -> bool {
        self.y_left != self.y_right
    }
}

/// One linear piece `y = slope * x + offset` on the closed interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Piece {
    pub lo: f64,
    pub hi: f64,
    pub slope: f64,
    pub offset: f64,
}

/// Breakpoints plus the slopes of the two unbounded pieces.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseSpec {
    pub breakpoints: Vec<Breakpoint>,
    pub slope_neg_inf: f64,
    pub slope_pos_inf: f64,
    pieces: Vec<Piece>,
}

impl PiecewiseSpec {
    fn of(kind: &ActivationKind) -> Self {
        let bp = |x: f64, y: f64| Breakpoint { x, y_left: y, y_right: y };
        let piece = |lo: f64, hi: f64, slope: f64, offset: f64| Piece { lo, hi, slope, offset };
        let (ninf, pinf) = (f64::NEG_INFINITY, f64::INFINITY);
        let (breakpoints, slope_neg_inf, slope_pos_inf, pieces) = match *kind {
            ActivationKind::Identity => (vec![], 1.0, 1.0, vec![piece(ninf, pinf, 1.0, 0.0)]),
            ActivationKind::Relu => (
                vec![bp(0.0, 0.0)],
                0.0,
                1.0,
                vec![piece(ninf, 0.0, 0.0, 0.0), piece(0.0, pinf, 1.0, 0.0)],
            ),
            ActivationKind::LeakyRelu { gamma } => (
                vec![bp(0.0, 0.0)],
                gamma,
                1.0,
                vec![piece(ninf, 0.0, gamma, 0.0), piece(0.0, pinf, 1.0, 0.0)],
            ),
            ActivationKind::HardTanh { v_min, v_max } if v_min == v_max => (
                vec![bp(v_min, v_min)],
                0.0,
                0.0,
                vec![piece(ninf, v_min, 0.0, v_min), piece(v_max, pinf, 0.0, v_max)],
            ),
            ActivationKind::HardTanh { v_min, v_max } => (
                vec![bp(v_min, v_min), bp(v_max, v_max)],
                0.0,
                0.0,
                vec![
                    piece(ninf, v_min, 0.0, v_min),
                    piece(v_min, v_max, 1.0, 0.0),
                    piece(v_max, pinf, 0.0, v_max),
                ],
            ),
            ActivationKind::HardSigmoid { v_min, v_max } => (
                vec![bp(v_min, 0.0), bp(v_max, 1.0)],
                0.0,
                0.0,
                vec![
                    piece(ninf, v_min, 0.0, 0.0),
                    piece(v_min, v_max, 1.0 / (v_max - v_min), v_min / (v_min - v_max)),
                    piece(v_max, pinf, 0.0, 1.0),
                ],
            ),
            ActivationKind::UnitStep { val, r_min, r_max } => (
                vec![Breakpoint {
                    x: val,
                    y_left: r_min,
                    y_right: r_max,
                }],
                0.0,
                0.0,
                vec![piece(ninf, val, 0.0, r_min), piece(val, pinf, 0.0, r_max)],
            ),
        };
        Self {
            breakpoints,
            slope_neg_inf,
            slope_pos_inf,
            pieces,
        }
    }

    pub fn pieces(&self) -> &[Piece] {
        &self.pieces
    }

    /// Evaluates the piecewise description (interpolating between breakpoints).
    pub fn eval(&self, x: f64) -> f64 {
        let bps = &self.breakpoints;
        let Some(first) = bps.first() else {
            return self.slope_pos_inf * x;
        };
        if x < first.x {
            return first.y_left + self.slope_neg_inf * (x - first.x);
        }
        for (k, b) in bps.iter().enumerate() {
            if x == b.x {
                return b.y_right;
            }
            match bps.get(k + 1) {
                Some(next) if x < next.x => {
                    let t = (x - b.x) / (next.x - b.x);
                    return b.y_right + t * (next.y_left - b.y_right);
                }
                Some(_) => continue,
                None => return b.y_right + self.slope_pos_inf * (x - b.x),
            }
        }
        unreachable!("breakpoints cover the real line")
    }

    /// Value at `x`, or the left limit when `left` is set.
    pub fn eval_side(&self, x: f64, left: bool) -> f64 {
        match self.breakpoints.iter().find(|b| b.x == x) {
            Some(b) if left => b.y_left,
            Some(b) => b.y_right,
            None => self.eval(x),
        }
    }
}
