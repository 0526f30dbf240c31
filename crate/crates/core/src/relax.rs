//! Per-neuron exact splitting and single-star over-approximation.
//!
//! Both operate on one dimension `j` of a star. The exact step cuts the star
//! along the breakpoints the neuron's range actually crosses and maps each
//! branch by its linear piece. The approximate step either applies the single
//! piece covering the range, or replaces `x_j` by a fresh predicate variable
//! constrained to the convex hull of the activation graph over `[l, u]`.

use ndarray::Array1;

use crate::activation::{ActivationKind, PiecewiseSpec};
use crate::hull::{graph_hull, generators, Side};
use crate::lp::Lp;
use crate::star::{DimBounds, Star, StarError};

/// Ranges narrower than this (relative to their magnitude) are treated as a point.
const DEGENERATE_WIDTH: f64 = 1e-9;
/// Overlap with a piece below this (relative) is treated as touching only.
const TOUCH_TOL: f64 = 1e-9;

/// How the range `[l, u]` of one neuron relates to the activation's pieces.
#[derive(Debug, Clone, PartialEq)]
enum Coverage {
    /// `l` and `u` coincide numerically: the neuron is constant.
    Point(f64),
    /// Indices of the pieces the range meets, lowest first.
    Pieces(Vec<usize>),
}

fn coverage(spec: &PiecewiseSpec, bounds: DimBounds) -> Coverage {
    let DimBounds { lower: l, upper: u } = bounds;
    let mag = 1.0 + [l, u].iter().filter(|v| v.is_finite()).fold(0.0_f64, |m, v| m.max(v.abs()));
    if u - l <= DEGENERATE_WIDTH * mag {
        return Coverage::Point(0.5 * (l + u));
    }
    let jump_at = |x: f64| spec.breakpoints.iter().any(|b| b.x == x && b.is_jump());
    let mut hits: Vec<usize> = Vec::new();
    for (k, p) in spec.pieces().iter().enumerate() {
        let overlap = u.min(p.hi) - l.max(p.lo);
        // Jumps need strict inclusion: dropping a sliver would misassign values.
        let tol = if jump_at(p.lo) || jump_at(p.hi) {
            0.0
        } else {
            TOUCH_TOL * mag
        };
        if overlap > tol {
            hits.push(k);
        }
    }
    // A range ending on a jump still reaches the value right of it.
    for (k, p) in spec.pieces().iter().enumerate() {
        if jump_at(p.lo) && !hits.contains(&k) && (u - p.lo).abs() <= TOUCH_TOL * mag {
            hits.push(k);
        }
    }
    hits.sort_unstable();
    Coverage::Pieces(hits)
}

/// Projects dimension `j` onto the constant `value`.
fn constant_dimension(s: &Star, j: usize, value: f64) -> Star {
    let out = s.map_dimension(j, 0.0, value);
    out.seed_bounds(j, DimBounds::new(value, value));
    out
}

/// Exact image of `s` under the activation applied to dimension `j`.
///
/// Returns the nonempty branches, lowest piece first. A single piece means no
/// split and no new constraints.
pub fn exact_step(lp: &Lp, s: &Star, j: usize, kind: &ActivationKind) -> Result<Vec<Star>, StarError> {
    if matches!(kind, ActivationKind::Identity) {
        return Ok(vec![s.clone()]);
    }
    let bounds = s.dim_bounds(lp, j)?;
    let spec = kind.piecewise();
    let pieces = match coverage(&spec, bounds) {
        Coverage::Point(x) => return Ok(vec![constant_dimension(s, j, kind.eval(x))]),
        Coverage::Pieces(p) => p,
    };
    let n = s.dim();
    let single = pieces.len() == 1;
    let mut out = Vec::with_capacity(pieces.len());
    for k in pieces {
        let piece = spec.pieces()[k];
        let mut branch = s.clone();
        if !single {
            let mut e = Array1::zeros(n);
            if piece.lo > bounds.lower {
                e[j] = -1.0;
                branch = branch.intersect_halfspace(e.view(), -piece.lo)?;
            }
            if piece.hi < bounds.upper {
                e[j] = 1.0;
                branch = branch.intersect_halfspace(e.view(), piece.hi)?;
            }
        }
        let lo = bounds.lower.max(piece.lo);
        let hi = bounds.upper.min(piece.hi).max(lo);
        let mapped = branch.map_dimension(j, piece.slope, piece.offset);
        let image = |x: f64| if piece.slope == 0.0 { piece.offset } else { piece.slope * x + piece.offset };
        mapped.seed_bounds(j, DimBounds::new(image(lo), image(hi)));
        out.push(mapped);
    }
    Ok(out)
}

/// Single-star over-approximation of the activation applied to dimension `j`.
pub fn approx_step(lp: &Lp, s: &Star, j: usize, kind: &ActivationKind) -> Result<Star, StarError> {
    if matches!(kind, ActivationKind::Identity) {
        return Ok(s.clone());
    }
    let bounds = s.dim_bounds(lp, j)?;
    let spec = kind.piecewise();
    match coverage(&spec, bounds) {
        Coverage::Point(x) => return Ok(constant_dimension(s, j, kind.eval(x))),
        Coverage::Pieces(p) if p.len() == 1 => {
            return Ok(exact_step(lp, s, j, kind)?.remove(0));
        }
        Coverage::Pieces(_) => {}
    }

    let DimBounds { lower: l, upper: u } = bounds;
    let hull = graph_hull(&spec, l, u);
    let m = s.num_vars();
    let cj = s.center()[j];
    let vj = s.basis().row(j).to_owned();

    let mut out = s.extend_vars(1);
    {
        let (center, basis, predicate, anchor) = out.parts_mut();
        center[j] = 0.0;
        basis.row_mut(j).fill(0.0);
        basis[[j, m]] = 1.0;
        // y = alpha_{m+1};  x_j = c_j + V_j . alpha
        for h in &hull {
            let mut row = Array1::zeros(m + 1);
            let rhs = match h.side {
                Side::Upper => {
                    // y - s V_j alpha <= s c_j + t
                    row.slice_mut(ndarray::s![..m]).assign(&(&vj * -h.slope));
                    row[m] = 1.0;
                    h.slope * cj + h.intercept
                }
                Side::Lower => {
                    row.slice_mut(ndarray::s![..m]).assign(&(&vj * h.slope));
                    row[m] = -1.0;
                    -h.slope * cj - h.intercept
                }
            };
            predicate.push_constraint(row.view(), rhs)?;
        }
        if let Some(a) = anchor {
            a.relaxed = true;
        }
    }
    for i in 0..s.dim() {
        if i != j {
            if let Some(b) = s.cached_bounds(i) {
                out.seed_bounds(i, b);
            }
        }
    }
    let gens = generators(&spec, l, u);
    let ys = gens.points.iter().map(|p| p.1);
    let mut y_lo = ys.clone().fold(f64::INFINITY, f64::min);
    let mut y_hi = ys.fold(f64::NEG_INFINITY, f64::max);
    for &(_, dy) in &gens.rays {
        if dy < 0.0 {
            y_lo = f64::NEG_INFINITY;
        }
        if dy > 0.0 {
            y_hi = f64::INFINITY;
        }
    }
    out.seed_bounds(j, DimBounds::new(y_lo, y_hi));
    Ok(out)
}

/// Applies the activation to every dimension, splitting exactly.
///
/// Output order is depth-first with the lowest piece first.
pub fn layer_step_exact(lp: &Lp, stars: Vec<Star>, kind: &ActivationKind) -> Result<Vec<Star>, StarError> {
    if matches!(kind, ActivationKind::Identity) {
        return Ok(stars);
    }
    let mut out = Vec::new();
    for s in stars {
        out.extend(star_step_exact(lp, s, kind, &mut || Ok::<(), StarError>(()))?);
    }
    Ok(out)
}

/// Exact layer step for one star; `tick` is called before each neuron and may
/// abort the computation.
pub(crate) fn star_step_exact<E: From<StarError>>(
    lp: &Lp,
    s: Star,
    kind: &ActivationKind,
    tick: &mut dyn FnMut() -> Result<(), E>,
) -> Result<Vec<Star>, E> {
    let mut current = vec![s];
    let n = current[0].dim();
    for j in 0..n {
        tick()?;
        let mut next = Vec::with_capacity(current.len());
        for st in &current {
            next.extend(exact_step(lp, st, j, kind)?);
        }
        current = next;
    }
    Ok(current)
}

/// Applies the activation to every dimension, relaxing where needed.
pub fn layer_step_approx(lp: &Lp, s: Star, kind: &ActivationKind) -> Result<Star, StarError> {
    star_step_approx(lp, s, kind, &mut || Ok::<(), StarError>(()))
}

pub(crate) fn star_step_approx<E: From<StarError>>(
    lp: &Lp,
    s: Star,
    kind: &ActivationKind,
    tick: &mut dyn FnMut() -> Result<(), E>,
) -> Result<Star, E> {
    if matches!(kind, ActivationKind::Identity) {
        return Ok(s);
    }
    let mut current = s;
    for j in 0..current.dim() {
        tick()?;
        current = approx_step(lp, &current, j, kind)?;
    }
    Ok(current)
}
