//! Star sets `{c + V a : a in P}`.

use std::sync::OnceLock;

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lp::{Lp, LpError, LpOutcome, Polyhedron, Sense};
use crate::sampling::hit_and_run;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StarError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("operation requires a nonempty star")]
    Empty,
    #[error(transparent)]
    Lp(#[from] LpError),
}

/// Per-dimension range of a star; either end may be infinite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DimBounds {
    pub lower: f64,
    pub upper: f64,
}

impl DimBounds {
    pub fn new(lower: f64, upper: f64) -> Self {
        debug_assert!(lower <= upper || lower.is_nan() || upper.is_nan());
        Self { lower, upper }
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn is_bounded(&self) -> bool {
        self.lower.is_finite() && self.upper.is_finite()
    }
}

/// The input star's center and basis expressed over the current predicate
/// variables. Lets an output star be pulled back to the inputs that reach it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Anchor {
    pub center: Array1<f64>,
    pub basis: Array2<f64>,
    /// Set once an over-approximation variable has been introduced; the
    /// pull-back is then no longer exact.
    pub relaxed: bool,
}

#[derive(Debug, Clone)]
pub struct Star {
    center: Array1<f64>,
    basis: Array2<f64>,
    predicate: Polyhedron,
    anchor: Option<Anchor>,
    bounds: Vec<OnceLock<DimBounds>>,
}

impl PartialEq for Star {
    fn eq(&self, other: &Self) -> bool {
        self.center == other.center
            && self.basis == other.basis
            && self.predicate == other.predicate
            && self.anchor == other.anchor
    }
}

impl Star {
    pub fn new(center: Array1<f64>, basis: Array2<f64>, predicate: Polyhedron) -> Result<Self, StarError> {
        if basis.nrows() != center.len() {
            return Err(StarError::DimensionMismatch(format!(
                "basis has {} rows, center has {} entries",
                basis.nrows(),
                center.len()
            )));
        }
        if basis.ncols() != predicate.num_vars() {
            return Err(StarError::DimensionMismatch(format!(
                "basis has {} generators, predicate has {} variables",
                basis.ncols(),
                predicate.num_vars()
            )));
        }
        Ok(Self::from_parts(center, basis, predicate, None))
    }

    pub(crate) fn from_parts(
        center: Array1<f64>,
        basis: Array2<f64>,
        predicate: Polyhedron,
        anchor: Option<Anchor>,
    ) -> Self {
        let n = center.len();
        Self {
            center,
            basis,
            predicate,
            anchor,
            bounds: vec![OnceLock::new(); n],
        }
    }

    /// Star with zero center and identity basis over `poly`, anchored to itself.
    pub fn from_polyhedron(poly: Polyhedron) -> Self {
        let n = poly.num_vars();
        let center = Array1::zeros(n);
        let basis = Array2::eye(n);
        let anchor = Anchor {
            center: center.clone(),
            basis: basis.clone(),
            relaxed: false,
        };
        Self::from_parts(center, basis, poly, Some(anchor))
    }

    pub fn from_box(lower: &[f64], upper: &[f64]) -> Result<Self, StarError> {
        Ok(Self::from_polyhedron(Polyhedron::from_box(lower, upper)?))
    }

    /// State-space dimension `n`.
    pub fn dim(&self) -> usize {
        self.center.len()
    }

    /// Predicate variable count `m`.
    pub fn num_vars(&self) -> usize {
        self.basis.ncols()
    }

    pub fn center(&self) -> &Array1<f64> {
        &self.center
    }

    pub fn basis(&self) -> &Array2<f64> {
        &self.basis
    }

    pub fn predicate(&self) -> &Polyhedron {
        &self.predicate
    }

    pub fn anchor(&self) -> Option<&Anchor> {
        self.anchor.as_ref()
    }

    pub fn with_anchor(mut self, anchor: Option<Anchor>) -> Result<Self, StarError> {
        if let Some(a) = &anchor {
            if a.basis.ncols() != self.num_vars() || a.basis.nrows() != a.center.len() {
                return Err(StarError::DimensionMismatch(
                    "anchor basis does not share the predicate space".into(),
                ));
            }
        }
        self.anchor = anchor;
        Ok(self)
    }

    /// `c + V alpha`.
    pub fn point_at(&self, alpha: ArrayView1<f64>) -> Array1<f64> {
        &self.center + &self.basis.dot(&alpha)
    }

    /// Anchor image `c0 + V0 alpha`, if anchored.
    pub fn anchor_point_at(&self, alpha: ArrayView1<f64>) -> Option<Array1<f64>> {
        self.anchor.as_ref().map(|a| &a.center + &a.basis.dot(&alpha))
    }

    pub fn affine_map(&self, w: ArrayView2<f64>, b: ArrayView1<f64>) -> Result<Star, StarError> {
        if w.ncols() != self.dim() || w.nrows() != b.len() {
            return Err(StarError::DimensionMismatch(format!(
                "affine map {}x{} with bias {} applied to a {}-dimensional star",
                w.nrows(),
                w.ncols(),
                b.len(),
                self.dim()
            )));
        }
        let center = w.dot(&self.center) + b;
        let basis = w.dot(&self.basis);
        Ok(Self::from_parts(center, basis, self.predicate.clone(), self.anchor.clone()))
    }

    /// Intersection with `{x : h . x <= g}`.
    pub fn intersect_halfspace(&self, h: ArrayView1<f64>, g: f64) -> Result<Star, StarError> {
        if h.len() != self.dim() {
            return Err(StarError::DimensionMismatch(format!(
                "halfspace normal has {} entries, star has dimension {}",
                h.len(),
                self.dim()
            )));
        }
        let row = h.dot(&self.basis);
        let predicate = self.predicate.with_constraint(row.view(), g - h.dot(&self.center))?;
        Ok(Self::from_parts(
            self.center.clone(),
            self.basis.clone(),
            predicate,
            self.anchor.clone(),
        ))
    }

    /// Intersection with every row of `{x : A x <= b}`.
    pub fn intersect_polyhedron(&self, region: &Polyhedron) -> Result<Star, StarError> {
        if region.num_vars() != self.dim() {
            return Err(StarError::DimensionMismatch(format!(
                "region over {} variables, star has dimension {}",
                region.num_vars(),
                self.dim()
            )));
        }
        let rows = region.matrix().dot(&self.basis);
        let rhs = region.rhs() - &region.matrix().dot(&self.center);
        let extra = Polyhedron::new(rows, rhs)?;
        Ok(Self::from_parts(
            self.center.clone(),
            self.basis.clone(),
            self.predicate.intersect(&extra)?,
            self.anchor.clone(),
        ))
    }

    pub fn is_empty(&self, lp: &Lp) -> Result<bool, LpError> {
        Ok(!lp.is_feasible(&self.predicate)?)
    }

    /// Range of dimension `i` via two LPs over the predicate; memoized.
    pub fn dim_bounds(&self, lp: &Lp, i: usize) -> Result<DimBounds, StarError> {
        if i >= self.dim() {
            return Err(StarError::DimensionMismatch(format!(
                "dimension {i} out of range for a {}-dimensional star",
                self.dim()
            )));
        }
        if let Some(b) = self.bounds[i].get() {
            return Ok(*b);
        }
        let row = self.basis.row(i);
        let c = self.center[i];
        let lower = match lp.solve(row, Sense::Minimize, &self.predicate)? {
            LpOutcome::Infeasible => return Err(StarError::Empty),
            LpOutcome::Optimal { value, .. } => c + value,
            LpOutcome::Unbounded { .. } => f64::NEG_INFINITY,
        };
        let upper = match lp.solve(row, Sense::Maximize, &self.predicate)? {
            LpOutcome::Infeasible => return Err(StarError::Empty),
            LpOutcome::Optimal { value, .. } => c + value,
            LpOutcome::Unbounded { .. } => f64::INFINITY,
        };
        let bounds = DimBounds::new(lower.min(upper), upper.max(lower));
        Ok(*self.bounds[i].get_or_init(|| bounds))
    }

    pub fn bounding_box(&self, lp: &Lp) -> Result<Vec<DimBounds>, StarError> {
        (0..self.dim()).map(|i| self.dim_bounds(lp, i)).collect()
    }

    pub(crate) fn seed_bounds(&self, i: usize, bounds: DimBounds) {
        let _ = self.bounds[i].set(bounds);
    }

    pub(crate) fn cached_bounds(&self, i: usize) -> Option<DimBounds> {
        self.bounds[i].get().copied()
    }

    /// LP membership test: is there a feasible `alpha` with `|c + V alpha - x| <= tol`?
    pub fn contains_point(&self, lp: &Lp, x: ArrayView1<f64>, tol: f64) -> Result<bool, StarError> {
        if x.len() != self.dim() {
            return Err(StarError::DimensionMismatch(format!(
                "point has {} entries, star has dimension {}",
                x.len(),
                self.dim()
            )));
        }
        let offset = &x - &self.center;
        let neg_basis = self.basis.mapv(|v| -v);
        let rows = ndarray::concatenate(Axis(0), &[self.basis.view(), neg_basis.view()])
            .map_err(|e| StarError::DimensionMismatch(e.to_string()))?;
        let rhs: Array1<f64> = offset
            .iter()
            .map(|v| v + tol)
            .chain(offset.iter().map(|v| -v + tol))
            .collect();
        let equality = Polyhedron::new(rows, rhs)?;
        Ok(lp.is_feasible(&self.predicate.intersect(&equality)?)?)
    }

    /// Predicate points keeping slack `margin * |row|` on every constraint,
    /// produced by a hit-and-run walk from the Chebyshev center of the shrunk
    /// predicate. Empty when the shrunk predicate is empty.
    pub fn sample_predicate(
        &self,
        lp: &Lp,
        count: usize,
        seed: u64,
        margin: f64,
    ) -> Result<Vec<Array1<f64>>, StarError> {
        let shrunk = if margin > 0.0 {
            let norms: Array1<f64> = self
                .predicate
                .matrix()
                .outer_iter()
                .map(|r| r.dot(&r).sqrt())
                .collect();
            Polyhedron::new(
                self.predicate.matrix().clone(),
                self.predicate.rhs() - &(norms * margin),
            )?
        } else {
            self.predicate.clone()
        };
        let Some(center) = lp.interior_point(&shrunk)? else {
            return Ok(Vec::new());
        };
        Ok(hit_and_run(&shrunk, &center.point, count, seed, 0.0))
    }

    /// `count` points of the star: the Chebyshev-center image first, then a
    /// hit-and-run walk. Deterministic for a fixed seed.
    pub fn sample_points(&self, lp: &Lp, count: usize, seed: u64) -> Result<Vec<Array1<f64>>, StarError> {
        let Some(center) = lp.interior_point(&self.predicate)? else {
            return Err(StarError::Empty);
        };
        Ok(hit_and_run(&self.predicate, &center.point, count, seed, 0.0)
            .iter()
            .map(|a| self.point_at(a.view()))
            .collect())
    }

    /// Replaces row `j` of center and basis by `slope * row + offset`.
    pub(crate) fn map_dimension(&self, j: usize, slope: f64, offset: f64) -> Star {
        let mut center = self.center.clone();
        let mut basis = self.basis.clone();
        center[j] = slope * center[j] + offset;
        basis.row_mut(j).mapv_inplace(|v| slope * v);
        let out = Self::from_parts(center, basis, self.predicate.clone(), self.anchor.clone());
        for (i, cell) in self.bounds.iter().enumerate() {
            if i == j {
                continue;
            }
            if let Some(b) = cell.get() {
                out.seed_bounds(i, *b);
            }
        }
        out
    }

    /// Adds `extra` predicate variables with zero generators (and zero anchor columns).
    pub(crate) fn extend_vars(&self, extra: usize) -> Star {
        let (n, m) = self.basis.dim();
        let mut basis = Array2::zeros((n, m + extra));
        basis.slice_mut(s![.., ..m]).assign(&self.basis);
        let anchor = self.anchor.as_ref().map(|a| {
            let mut ab = Array2::zeros((a.basis.nrows(), m + extra));
            ab.slice_mut(s![.., ..m]).assign(&a.basis);
            Anchor {
                center: a.center.clone(),
                basis: ab,
                relaxed: a.relaxed,
            }
        });
        Self::from_parts(self.center.clone(), basis, self.predicate.extend_vars(extra), anchor)
    }

    pub(crate) fn parts_mut(&mut self) -> (&mut Array1<f64>, &mut Array2<f64>, &mut Polyhedron, &mut Option<Anchor>) {
        self.bounds.iter_mut().for_each(|b| *b = OnceLock::new());
        (&mut self.center, &mut self.basis, &mut self.predicate, &mut self.anchor)
    }
}
