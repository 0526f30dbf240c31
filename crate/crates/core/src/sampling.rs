//! Hit-and-run walks over H-polyhedra.

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::lp::Polyhedron;

/// Steps taken between two recorded samples.
const THINNING: usize = 4;
/// Chord half-length used along directions in which the polyhedron is unbounded.
const UNBOUNDED_REACH: f64 = 10.0;

/// Walks from `start` (which must satisfy every row with slack at least
/// `margin * |row|`) and returns `count` points, the first being `start`.
///
/// All returned points keep that slack. Deterministic for a fixed seed.
pub fn hit_and_run(
    poly: &Polyhedron,
    start: &Array1<f64>,
    count: usize,
    seed: u64,
    margin: f64,
) -> Vec<Array1<f64>> {
    let m = poly.num_vars();
    let mut out = Vec::with_capacity(count);
    if count == 0 {
        return out;
    }
    out.push(start.clone());
    if m == 0 {
        out.resize(count, start.clone());
        return out;
    }
    let a: &Array2<f64> = poly.matrix();
    let norms: Vec<f64> = a.outer_iter().map(|r| r.dot(&r).sqrt()).collect();
    let limits: Array1<f64> = poly
        .rhs()
        .iter()
        .zip(&norms)
        .map(|(b, n)| b - margin * n)
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = start.clone();
    let mut ax = a.dot(&x);
    while out.len() < count {
        for _ in 0..THINNING {
            let mut d: Array1<f64> = (0..m).map(|_| rng.sample(StandardNormal)).collect();
            let norm = d.dot(&d).sqrt();
            if norm == 0.0 {
                continue;
            }
            d /= norm;
            let ad = a.dot(&d);
            let (mut lo, mut hi) = (-UNBOUNDED_REACH, UNBOUNDED_REACH);
            for i in 0..ad.len() {
                let slack = (limits[i] - ax[i]).max(0.0);
                if ad[i] > 1e-14 {
                    hi = hi.min(slack / ad[i]);
                } else if ad[i] < -1e-14 {
                    lo = lo.max(slack / ad[i]);
                }
            }
            if hi <= lo {
                continue;
            }
            let t = rng.gen_range(lo..=hi) * (1.0 - 1e-9);
            x.scaled_add(t, &d);
            ax.scaled_add(t, &ad);
        }
        out.push(x.clone());
    }
    out
}

/// Uniform point in an axis-aligned box.
pub fn uniform_in_box<R: Rng>(rng: &mut R, lower: &[f64], upper: &[f64]) -> Array1<f64> {
    lower
        .iter()
        .zip(upper)
        .map(|(&l, &u)| if u > l { rng.gen_range(l..=u) } else { l })
        .collect()
}
