//! Closed convex hull of an activation graph over `[l, u]` in the
//! `(x, y)` plane, returned as non-vertical supporting halfplanes.
//!
//! Finite ends contribute the graph endpoints; infinite ends contribute a
//! recession ray with the slope of the outermost piece. Interior breakpoints
//! contribute both one-sided limits, so jumps are closed over.

use serde::{Deserialize, Serialize};

use crate::activation::PiecewiseSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    /// `y >= slope * x + intercept`
    Lower,
    /// `y <= slope * x + intercept`
    Upper,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HullConstraint {
    pub side: Side,
    pub slope: f64,
    pub intercept: f64,
}

impl HullConstraint {
    pub fn at(&self, x: f64) -> f64 {
        self.slope * x + self.intercept
    }

    /// Whether `(x, y)` satisfies the constraint up to `tol`.
    pub fn admits(&self, x: f64, y: f64, tol: f64) -> bool {
        match self.side {
            Side::Lower => y >= self.at(x) - tol,
            Side::Upper => y <= self.at(x) + tol,
        }
    }
}

/// Generators of the hull: finite points and recession directions.
#[derive(Debug, Clone, PartialEq)]
pub struct HullGenerators {
    pub points: Vec<(f64, f64)>,
    pub rays: Vec<(f64, f64)>,
}

pub fn generators(spec: &PiecewiseSpec, l: f64, u: f64) -> HullGenerators {
    let mut points = Vec::new();
    if l.is_finite() {
        points.push((l, spec.eval(l)));
    }
    for b in &spec.breakpoints {
        if b.x > l && b.x <= u {
            points.push((b.x, b.y_left));
        }
        if b.x >= l && b.x < u {
            points.push((b.x, b.y_right));
        }
    }
    if u.is_finite() {
        points.push((u, spec.eval(u)));
    }
    points.dedup();
    let mut rays = Vec::new();
    if l == f64::NEG_INFINITY {
        rays.push((-1.0, -spec.slope_neg_inf));
    }
    if u == f64::INFINITY {
        rays.push((1.0, spec.slope_pos_inf));
    }
    HullGenerators { points, rays }
}

/// Supporting halfplanes of `conv(graph of spec over [l, u])`, lower side
/// first, each side ordered by slope. Requires `l < u`.
pub fn graph_hull(spec: &PiecewiseSpec, l: f64, u: f64) -> Vec<HullConstraint> {
    hull_of(&generators(spec, l, u))
}

pub fn hull_of(gens: &HullGenerators) -> Vec<HullConstraint> {
    let HullGenerators { points, rays } = gens;
    let scale = points
        .iter()
        .flat_map(|&(x, y)| [x.abs(), y.abs()])
        .fold(1.0_f64, f64::max);
    let tol = 1e-12 * scale;

    let mut candidates = Vec::new();
    for (i, &(x1, y1)) in points.iter().enumerate() {
        for &(x2, y2) in &points[i + 1..] {
            if x2 != x1 {
                let slope = (y2 - y1) / (x2 - x1);
                candidates.push((slope, y1 - slope * x1));
            }
        }
        for &(dx, dy) in rays {
            let slope = dy / dx;
            candidates.push((slope, y1 - slope * x1));
        }
    }

    let mut out: Vec<HullConstraint> = Vec::new();
    for (slope, intercept) in candidates {
        for side in [Side::Lower, Side::Upper] {
            let c = HullConstraint { side, slope, intercept };
            let points_ok = points.iter().all(|&(x, y)| c.admits(x, y, tol * (1.0 + slope.abs())));
            let rays_ok = rays.iter().all(|&(dx, dy)| match side {
                Side::Lower => dy >= slope * dx - 1e-12,
                Side::Upper => dy <= slope * dx + 1e-12,
            });
            let duplicate = out.iter().any(|o| {
                o.side == side
                    && (o.slope - slope).abs() <= 1e-12 * (1.0 + slope.abs())
                    && (o.intercept - intercept).abs() <= tol * (1.0 + slope.abs())
            });
            if points_ok && rays_ok && !duplicate {
                out.push(c);
            }
        }
    }
    out.sort_by(|a, b| {
        let rank = |s: Side| matches!(s, Side::Upper) as u8;
        rank(a.side)
            .cmp(&rank(b.side))
            .then(a.slope.total_cmp(&b.slope))
            .then(a.intercept.total_cmp(&b.intercept))
    });
    out
}
