//! Convex-hull membership by linear-programming feasibility.
//!
//! The hull is kept as its generating points; no facets are enumerated. A
//! query x is accepted at tolerance τ when x′ = c + (x − c)/τ (c the
//! centroid) is a convex combination of the generators, i.e. when
//! λ ≥ 0, Σλ = 1, Σλᵢpᵢ = x′ is feasible. Feasibility is decided by a
//! phase-one simplex with Bland's rule on a problem translated to the
//! centroid and scaled to unit spread, so the slack is scale-free.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

use super::gpca::GpcaModel;

/// Largest phase-one objective (sum of artificial variables) still counted
/// as feasible, in units of the normalized problem.
pub const FEASIBILITY_SLACK: f64 = 1e-8;

/// Pivot and reduced-cost threshold of the simplex.
const PIVOT_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct Hull {
    pub points: Vec<DVector<f64>>,
    pub centroid: DVector<f64>,
    /// The generators span fewer than D affine dimensions.
    pub degenerate: bool,
}

impl Hull {
    pub fn new(points: Vec<DVector<f64>>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::param(format!(
                "a hull needs at least 2 points, got {}",
                points.len()
            )));
        }
        let dim = points[0].len();
        if dim == 0 || points.iter().any(|p| p.len() != dim) {
            return Err(Error::param("hull points must share a positive dimension"));
        }
        if points.iter().any(|p| p.iter().any(|v| !v.is_finite())) {
            return Err(Error::param("hull points must be finite"));
        }
        let centroid = points.iter().fold(DVector::zeros(dim), |a, p| a + p) / points.len() as f64;
        let spread = DMatrix::from_fn(dim, points.len(), |r, c| points[c][r] - centroid[r]);
        let scale = spread.abs().max();
        let rank = if scale == 0.0 {
            0
        } else {
            (spread / scale).svd(false, false).rank(1e-10)
        };
        Ok(Hull {
            points,
            centroid,
            degenerate: rank < dim,
        })
    }

    pub fn dim(&self) -> usize {
        self.centroid.len()
    }

    /// Membership of `x` in the hull scaled by `tolerance` about the centroid.
    pub fn contains(&self, x: &DVector<f64>, tolerance: f64) -> bool {
        if !(tolerance > 0.0) || x.len() != self.dim() || x.iter().any(|v| !v.is_finite()) {
            return false;
        }
        let target = &self.centroid + (x - &self.centroid) / tolerance;
        in_convex_hull(&self.points, &self.centroid, &target)
    }
}

/// Phase-one simplex on the normalized problem.
fn in_convex_hull(points: &[DVector<f64>], centre: &DVector<f64>, target: &DVector<f64>) -> bool {
    let dim = centre.len();
    let n = points.len();
    let scale = points
        .iter()
        .flat_map(|p| (p - centre).iter().map(|v| v.abs()).collect::<Vec<_>>())
        .fold(0.0f64, f64::max);
    let scale = if scale > 0.0 { scale } else { 1.0 };
    // Rows: one per coordinate, then Σλ = 1.
    let m = dim + 1;
    let cols = n + m + 1;
    let rhs = cols - 1;
    let mut t = vec![0.0; m * cols];
    for r in 0..m {
        let b = if r < dim { (target[r] - centre[r]) / scale } else { 1.0 };
        let sign = if b < 0.0 { -1.0 } else { 1.0 };
        for (j, p) in points.iter().enumerate() {
            let a = if r < dim { (p[r] - centre[r]) / scale } else { 1.0 };
            t[r * cols + j] = sign * a;
        }
        t[r * cols + n + r] = 1.0;
        t[r * cols + rhs] = sign * b;
    }
    let mut basis: Vec<usize> = (n..n + m).collect();
    // Phase-one cost row: minimize the artificial sum, expressed in the
    // non-basic variables.
    let mut cost = vec![0.0; cols];
    for r in 0..m {
        for j in 0..cols {
            if !(n..n + m).contains(&j) {
                cost[j] -= t[r * cols + j];
            }
        }
    }
    let max_iter = 50 * (n + m);
    for _ in 0..max_iter {
        // Bland: lowest-index improving column.
        let Some(enter) = (0..n + m).find(|j| cost[*j] < -PIVOT_EPS) else {
            break;
        };
        let mut leave: Option<(usize, f64)> = None;
        for r in 0..m {
            let a = t[r * cols + enter];
            if a > PIVOT_EPS {
                let ratio = t[r * cols + rhs] / a;
                leave = match leave {
                    None => Some((r, ratio)),
                    Some((lr, lratio)) => {
                        if ratio < lratio - PIVOT_EPS
                            || (ratio <= lratio + PIVOT_EPS && basis[r] < basis[lr])
                        {
                            Some((r, ratio))
                        } else {
                            Some((lr, lratio))
                        }
                    }
                };
            }
        }
        let Some((pr, _)) = leave else {
            // Unbounded cannot happen in phase one; treat as stalled.
            break;
        };
        let piv = t[pr * cols + enter];
        for j in 0..cols {
            t[pr * cols + j] /= piv;
        }
        for r in 0..m {
            if r != pr {
                let f = t[r * cols + enter];
                if f != 0.0 {
                    for j in 0..cols {
                        t[r * cols + j] -= f * t[pr * cols + j];
                    }
                }
            }
        }
        let f = cost[enter];
        for j in 0..cols {
            cost[j] -= f * t[pr * cols + j];
        }
        basis[pr] = enter;
    }
    let infeasibility: f64 = (0..m)
        .filter(|r| basis[*r] >= n)
        .map(|r| t[r * cols + rhs].max(0.0))
        .sum();
    infeasibility <= FEASIBILITY_SLACK
}

/// Attach a hull built from training features.
pub fn build_hull(mut model: GpcaModel, training_features: Vec<DVector<f64>>) -> Result<GpcaModel> {
    let hull = Hull::new(training_features)?;
    if hull.dim() != model.feature_dim() {
        return Err(Error::param(format!(
            "feature dimension {} does not match the model's {}",
            hull.dim(),
            model.feature_dim()
        )));
    }
    model.hull = Some(hull);
    Ok(model)
}

/// Membership against the model's hull; a model without a hull contains
/// nothing.
pub fn hull_contains(model: &GpcaModel, x: &DVector<f64>, tolerance: f64) -> bool {
    model.hull.as_ref().is_some_and(|h| h.contains(x, tolerance))
}
