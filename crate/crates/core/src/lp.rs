//! Dense two-phase simplex over H-polyhedra `{x : Ax <= b}` with free variables.
//!
//! Every geometric predicate in the crate (emptiness, bounding boxes,
//! membership, containment) reduces to a call into [`Lp`]. The solver is
//! deterministic: Dantzig pricing with a switch to Bland's rule once a run of
//! degenerate pivots is observed, and lowest-index tie breaking everywhere.

use std::sync::atomic::{AtomicU64, Ordering};

use ndarray::{s, Array1, Array2, ArrayView1, Axis};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LpError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("numerically unstable LP: {0}")]
    NumericallyUnstable(String),
}

/// The constraint system `{x in R^m : Ax <= b}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polyhedron {
    a: Array2<f64>,
    b: Array1<f64>,
}

impl Polyhedron {
    pub fn new(a: Array2<f64>, b: Array1<f64>) -> Result<Self, LpError> {
        if a.nrows() != b.len() {
            return Err(LpError::DimensionMismatch(format!(
                "constraint matrix has {} rows but rhs has {} entries",
                a.nrows(),
                b.len()
            )));
        }
        Ok(Self { a, b })
    }

    /// All of `R^m`.
    pub fn unconstrained(num_vars: usize) -> Self {
        Self {
            a: Array2::zeros((0, num_vars)),
            b: Array1::zeros(0),
        }
    }

    /// The axis-aligned box `lower <= x <= upper`.
    pub fn from_box(lower: &[f64], upper: &[f64]) -> Result<Self, LpError> {
        if lower.len() != upper.len() {
            return Err(LpError::DimensionMismatch(format!(
                "box lower has {} entries, upper has {}",
                lower.len(),
                upper.len()
            )));
        }
        let m = lower.len();
        let mut a = Array2::zeros((2 * m, m));
        let mut b = Array1::zeros(2 * m);
        for i in 0..m {
            a[[2 * i, i]] = 1.0;
            b[2 * i] = upper[i];
            a[[2 * i + 1, i]] = -1.0;
            b[2 * i + 1] = -lower[i];
        }
        Ok(Self { a, b })
    }

    pub fn num_vars(&self) -> usize {
        self.a.ncols()
    }

    pub fn num_constraints(&self) -> usize {
        self.a.nrows()
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.a
    }

    pub fn rhs(&self) -> &Array1<f64> {
        &self.b
    }

    /// Appends the row `row . x <= rhs`.
    pub fn push_constraint(&mut self, row: ArrayView1<f64>, rhs: f64) -> Result<(), LpError> {
        if row.len() != self.num_vars() {
            return Err(LpError::DimensionMismatch(format!(
                "constraint row has {} entries, polyhedron has {} variables",
                row.len(),
                self.num_vars()
            )));
        }
        self.a
            .push_row(row)
            .map_err(|e| LpError::DimensionMismatch(e.to_string()))?;
        let mut b = self.b.to_vec();
        b.push(rhs);
        self.b = Array1::from(b);
        Ok(())
    }

    pub fn with_constraint(&self, row: ArrayView1<f64>, rhs: f64) -> Result<Self, LpError> {
        let mut out = self.clone();
        out.push_constraint(row, rhs)?;
        Ok(out)
    }

    /// Appends `extra` unconstrained variables (zero columns).
    pub fn extend_vars(&self, extra: usize) -> Self {
        let (p, m) = self.a.dim();
        let mut a = Array2::zeros((p, m + extra));
        a.slice_mut(s![.., ..m]).assign(&self.a);
        Self {
            a,
            b: self.b.clone(),
        }
    }

    /// Stacks the rows of `other` (same variable space) under `self`.
    pub fn intersect(&self, other: &Polyhedron) -> Result<Self, LpError> {
        if other.num_vars() != self.num_vars() {
            return Err(LpError::DimensionMismatch(format!(
                "cannot intersect polyhedra over {} and {} variables",
                self.num_vars(),
                other.num_vars()
            )));
        }
        let a = ndarray::concatenate(Axis(0), &[self.a.view(), other.a.view()])
            .map_err(|e| LpError::DimensionMismatch(e.to_string()))?;
        let b = ndarray::concatenate(Axis(0), &[self.b.view(), other.b.view()])
            .map_err(|e| LpError::DimensionMismatch(e.to_string()))?;
        Ok(Self { a, b })
    }

    /// Largest violation `max_i (A_i x - b_i)`, or `-inf` with no rows.
    pub fn max_violation(&self, x: ArrayView1<f64>) -> f64 {
        let ax = self.a.dot(&x);
        ax.iter()
            .zip(self.b.iter())
            .map(|(l, r)| l - r)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn contains(&self, x: ArrayView1<f64>, tol: f64) -> bool {
        x.len() == self.num_vars() && self.max_violation(x) <= tol
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    Minimize,
    Maximize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Infeasible,
    Optimal { value: f64, witness: Array1<f64> },
    /// `point` is feasible and moving along `ray` improves the objective
    /// without bound.
    Unbounded { point: Array1<f64>, ray: Array1<f64> },
}

impl LpOutcome {
    pub fn value(&self) -> Option<f64> {
        match self {
            LpOutcome::Optimal { value, .. } => Some(*value),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LpConfig {
    /// Primal feasibility tolerance on (row-scaled) constraints.
    pub feas_tol: f64,
    /// Objective tolerance used when comparing optimal values.
    pub obj_tol: f64,
    /// Hard cap on simplex pivots per phase; 0 picks a size-dependent limit.
    pub max_iterations: usize,
}

impl Default for LpConfig {
    fn default() -> Self {
        Self {
            feas_tol: 1e-9,
            obj_tol: 1e-7,
            max_iterations: 0,
        }
    }
}

/// A point of a polyhedron together with its inradius.
#[derive(Debug, Clone, PartialEq)]
pub struct InteriorPoint {
    pub point: Array1<f64>,
    pub radius: f64,
    /// True when the polyhedron has (numerically) empty interior.
    pub boundary: bool,
}

/// LP front end. Holds the tolerances and counts calls for statistics.
#[derive(Debug, Default)]
pub struct Lp {
    config: LpConfig,
    calls: AtomicU64,
}

impl Lp {
    pub fn new(config: LpConfig) -> Self {
        Self {
            config,
            calls: AtomicU64::new(0),
        }
    }

    pub fn config(&self) -> &LpConfig {
        &self.config
    }

    /// Number of LPs solved through this instance so far.
    pub fn calls(&self) -> u64 {
        self.calls.load(Ordering::Relaxed)
    }

    pub fn solve(
        &self,
        objective: ArrayView1<f64>,
        sense: Sense,
        poly: &Polyhedron,
    ) -> Result<LpOutcome, LpError> {
        if objective.len() != poly.num_vars() {
            return Err(LpError::DimensionMismatch(format!(
                "objective has {} entries, polyhedron has {} variables",
                objective.len(),
                poly.num_vars()
            )));
        }
        self.calls.fetch_add(1, Ordering::Relaxed);
        let c = match sense {
            Sense::Maximize => objective.to_owned(),
            Sense::Minimize => objective.mapv(|v| -v),
        };
        let raw = maximize(&poly.a, &poly.b, &c, &self.config)?;
        Ok(match raw {
            LpOutcome::Optimal { value, witness } => {
                let value = match sense {
                    Sense::Maximize => value,
                    Sense::Minimize => -value,
                };
                LpOutcome::Optimal { value, witness }
            }
            other => other,
        })
    }

    pub fn is_feasible(&self, poly: &Polyhedron) -> Result<bool, LpError> {
        let zero = Array1::zeros(poly.num_vars());
        Ok(!matches!(
            self.solve(zero.view(), Sense::Maximize, poly)?,
            LpOutcome::Infeasible
        ))
    }

    /// Chebyshev center of `poly`, or `None` when it is empty.
    ///
    /// Polyhedra with unbounded inradius get a center for the inradius capped
    /// at one.
    pub fn interior_point(&self, poly: &Polyhedron) -> Result<Option<InteriorPoint>, LpError> {
        let m = poly.num_vars();
        if m == 0 {
            let feasible = poly.b.iter().all(|&v| v >= -self.config.feas_tol);
            return Ok(feasible.then(|| InteriorPoint {
                point: Array1::zeros(0),
                radius: 0.0,
                boundary: false,
            }));
        }
        let p = poly.num_constraints();
        let mut a = Array2::zeros((p + 1, m + 1));
        let mut b = Array1::zeros(p + 1);
        for i in 0..p {
            let row = poly.a.row(i);
            let norm = row.dot(&row).sqrt();
            a.slice_mut(s![i, ..m]).assign(&row);
            a[[i, m]] = norm;
            b[i] = poly.b[i];
        }
        a[[p, m]] = -1.0;
        let mut lifted = Polyhedron { a, b };
        let mut objective = Array1::zeros(m + 1);
        objective[m] = 1.0;
        let mut outcome = self.solve(objective.view(), Sense::Maximize, &lifted)?;
        if matches!(outcome, LpOutcome::Unbounded { .. }) {
            let mut cap = Array1::zeros(m + 1);
            cap[m] = 1.0;
            lifted.push_constraint(cap.view(), 1.0)?;
            outcome = self.solve(objective.view(), Sense::Maximize, &lifted)?;
        }
        match outcome {
            LpOutcome::Infeasible => Ok(None),
            LpOutcome::Optimal { value, witness } => {
                let point = witness.slice(s![..m]).to_owned();
                Ok(Some(InteriorPoint {
                    point,
                    radius: value.max(0.0),
                    boundary: value <= self.config.feas_tol,
                }))
            }
            LpOutcome::Unbounded { .. } => Err(LpError::NumericallyUnstable(
                "capped inradius LP reported unbounded".into(),
            )),
        }
    }
}

const PIVOT_TOL: f64 = 1e-9;
const DEGENERATE_RUN_BEFORE_BLAND: usize = 50;

/// Dense simplex tableau in row-major order with the rhs in the last column.
struct Tableau {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
    /// Reduced costs; the last entry is minus the current objective.
    z: Vec<f64>,
    basis: Vec<usize>,
}

impl Tableau {
    #[inline]
    fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i * (self.cols + 1) + j]
    }

    #[inline]
    fn rhs(&self, i: usize) -> f64 {
        self.data[i * (self.cols + 1) + self.cols]
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let w = self.cols + 1;
        let pv = self.data[r * w + c];
        for j in 0..w {
            self.data[r * w + j] /= pv;
        }
        self.data[r * w + c] = 1.0;
        let (before, rest) = self.data.split_at_mut(r * w);
        let (prow, after) = rest.split_at_mut(w);
        let eliminate = |row: &mut [f64]| {
            let f = row[c];
            if f != 0.0 {
                for (x, p) in row.iter_mut().zip(prow.iter()) {
                    *x -= f * p;
                }
                row[c] = 0.0;
            }
        };
        before.chunks_mut(w).for_each(eliminate);
        after.chunks_mut(w).for_each(eliminate);
        let f = self.z[c];
        if f != 0.0 {
            for (x, p) in self.z.iter_mut().zip(prow.iter()) {
                *x -= f * p;
            }
            self.z[c] = 0.0;
        }
        self.basis[r] = c;
    }

    fn set_costs(&mut self, cost: &[f64]) {
        self.z = cost.to_vec();
        self.z.push(0.0);
        for i in 0..self.rows {
            let cb = cost[self.basis[i]];
            if cb != 0.0 {
                for j in 0..=self.cols {
                    self.z[j] -= cb * self.at(i, j);
                }
            }
        }
    }

    fn entering(&self, allowed: &[bool], bland: bool, tol: f64) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for j in 0..self.cols {
            if !allowed[j] || self.z[j] >= -tol {
                continue;
            }
            if bland {
                return Some(j);
            }
            if best.map_or(true, |(_, v)| self.z[j] < v) {
                best = Some((j, self.z[j]));
            }
        }
        best.map(|(j, _)| j)
    }

    fn leaving(&self, c: usize) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for i in 0..self.rows {
            let t = self.at(i, c);
            if t <= PIVOT_TOL {
                continue;
            }
            let ratio = self.rhs(i).max(0.0) / t;
            best = match best {
                None => Some((i, ratio)),
                Some((bi, br)) => {
                    let tie = (ratio - br).abs() <= 1e-12 * (1.0 + br.abs());
                    if ratio < br && !tie || tie && self.basis[i] < self.basis[bi] {
                        Some((i, ratio))
                    } else {
                        Some((bi, br))
                    }
                }
            };
        }
        best.map(|(i, _)| i)
    }

    /// Minimizes the loaded costs. Returns the unbounded entering column, if any.
    fn run(&mut self, allowed: &[bool], max_iter: usize) -> Result<Option<usize>, LpError> {
        let mut degenerate_run = 0;
        let mut bland = false;
        for _ in 0..max_iter {
            let Some(c) = self.entering(allowed, bland, PIVOT_TOL) else {
                return Ok(None);
            };
            let Some(r) = self.leaving(c) else {
                return Ok(Some(c));
            };
            if self.rhs(r).abs() <= PIVOT_TOL {
                degenerate_run += 1;
                if degenerate_run >= DEGENERATE_RUN_BEFORE_BLAND {
                    bland = true;
                }
            } else {
                degenerate_run = 0;
            }
            self.pivot(r, c);
        }
        Err(LpError::NumericallyUnstable(format!(
            "simplex did not terminate within {max_iter} pivots"
        )))
    }
}

/// Maximizes `c . x` over `{x : Ax <= b}` with `x` free.
fn maximize(a: &Array2<f64>, b: &Array1<f64>, c: &Array1<f64>, cfg: &LpConfig) -> Result<LpOutcome, LpError> {
    let m = a.ncols();
    let mut rows: Vec<(Vec<f64>, f64)> = Vec::with_capacity(a.nrows());
    for (row, &rhs) in a.outer_iter().zip(b.iter()) {
        if !rhs.is_finite() || row.iter().any(|v| !v.is_finite()) {
            if rhs == f64::INFINITY && row.iter().all(|v| v.is_finite()) {
                continue;
            }
            return Err(LpError::NumericallyUnstable("non-finite constraint data".into()));
        }
        let scale = row.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
        if scale == 0.0 {
            if rhs < -cfg.feas_tol {
                return Ok(LpOutcome::Infeasible);
            }
            continue;
        }
        rows.push((row.iter().map(|v| v / scale).collect(), rhs / scale));
    }
    if m == 0 {
        return Ok(LpOutcome::Optimal {
            value: 0.0,
            witness: Array1::zeros(0),
        });
    }

    let p = rows.len();
    let n_art = rows.iter().filter(|(_, r)| *r < 0.0).count();
    let cols = 2 * m + p + n_art;
    let w = cols + 1;
    let mut data = vec![0.0; p * w];
    let mut basis = vec![0; p];
    let mut art = 0;
    for (i, (row, rhs)) in rows.iter().enumerate() {
        let sign = if *rhs < 0.0 { -1.0 } else { 1.0 };
        let base = i * w;
        for j in 0..m {
            data[base + j] = sign * row[j];
            data[base + m + j] = -sign * row[j];
        }
        data[base + 2 * m + i] = sign;
        data[base + cols] = sign * rhs;
        if sign < 0.0 {
            let col = 2 * m + p + art;
            data[base + col] = 1.0;
            basis[i] = col;
            art += 1;
        } else {
            basis[i] = 2 * m + i;
        }
    }
    let mut t = Tableau {
        rows: p,
        cols,
        data,
        z: Vec::new(),
        basis,
    };
    let max_iter = if cfg.max_iterations == 0 {
        1000 + 50 * (p + cols)
    } else {
        cfg.max_iterations
    };
    let art_start = 2 * m + p;
    let rhs_scale = 1.0 + rows.iter().fold(0.0_f64, |acc, (_, r)| acc.max(r.abs()));

    if n_art > 0 {
        let mut cost = vec![0.0; cols];
        cost[art_start..].iter_mut().for_each(|v| *v = 1.0);
        t.set_costs(&cost);
        let allowed = vec![true; cols];
        t.run(&allowed, max_iter)?;
        let infeasibility = -t.z[cols];
        if infeasibility > cfg.feas_tol * rhs_scale {
            return Ok(LpOutcome::Infeasible);
        }
        // Drive zero-level artificials out of the basis.
        for i in 0..p {
            if t.basis[i] < art_start {
                continue;
            }
            let mut best: Option<(usize, f64)> = None;
            for j in 0..art_start {
                let v = t.at(i, j).abs();
                if v > PIVOT_TOL && best.map_or(true, |(_, bv)| v > bv) {
                    best = Some((j, v));
                }
            }
            if let Some((j, _)) = best {
                t.pivot(i, j);
            }
        }
    }

    let mut cost = vec![0.0; cols];
    for j in 0..m {
        cost[j] = -c[j];
        cost[m + j] = c[j];
    }
    t.set_costs(&cost);
    let allowed: Vec<bool> = (0..cols).map(|j| j < art_start).collect();
    let unbounded_col = t.run(&allowed, max_iter)?;

    let mut values = vec![0.0; cols];
    for i in 0..p {
        values[t.basis[i]] = t.rhs(i).max(0.0);
    }
    let x: Array1<f64> = (0..m).map(|j| values[j] - values[m + j]).collect();

    let violation = rows
        .iter()
        .map(|(row, rhs)| row.iter().zip(x.iter()).map(|(r, v)| r * v).sum::<f64>() - rhs)
        .fold(0.0_f64, f64::max);
    if violation > 1e-6 * rhs_scale.max(x.iter().fold(1.0_f64, |acc, v| acc.max(v.abs()))) {
        return Err(LpError::NumericallyUnstable(format!(
            "basic solution violates constraints by {violation:e}"
        )));
    }

    if let Some(col) = unbounded_col {
        let mut dir = vec![0.0; cols];
        dir[col] = 1.0;
        for i in 0..p {
            dir[t.basis[i]] -= t.at(i, col);
        }
        let ray: Array1<f64> = (0..m).map(|j| dir[j] - dir[m + j]).collect();
        return Ok(LpOutcome::Unbounded { point: x, ray });
    }
    let value = c.dot(&x);
    Ok(LpOutcome::Optimal { value, witness: x })
}
