use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::schedule::{Rate, Schedule};
use crate::shape::{column_sum, ProblemShape};

/// State of one feature column reduced to two numbers.
///
/// `alpha = κ η(t) ‖w‖ / ‖h‖²` with the effective step `κ = (1+γ)/(CN)`,
/// `beta = cos(w, h)`, `xi = η(t+1)/η(t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SphericalScalars {
    pub alpha: f64,
    pub beta: f64,
    pub xi: f64,
}

/// One step of the scalar recursion
/// `β⁺ = (β + α(1−β²))/√(1 + α²(1−β²))`, `α⁺ = ξα/(1 + α²(1−β²))`.
/// The returned `xi` is carried over unchanged.
pub fn scalar_spherical_step(sc: SphericalScalars) -> SphericalScalars {
    let gap = 1.0 - sc.beta * sc.beta;
    let growth = 1.0 + sc.alpha * sc.alpha * gap;
    SphericalScalars {
        alpha: sc.xi * sc.alpha / growth,
        beta: (sc.beta + sc.alpha * gap) / growth.sqrt(),
        xi: sc.xi,
    }
}

/// Effective step factor `(1+γ)/(CN)` multiplying `η(t)`.
pub fn spherical_step_factor(shape: &ProblemShape) -> f64 {
    (1.0 + shape.gamma()) / shape.samples() as f64
}

/// Scalars of column `k` under rate `eta`.
pub fn column_scalars(h: &DMatrix<f64>, w: &DMatrix<f64>, shape: &ProblemShape, k: usize, eta: f64, xi: f64) -> SphericalScalars {
    let hk = h.column(k);
    let wc = w.column(shape.label_of(k));
    let (hn, wn) = (hk.norm(), wc.norm());
    SphericalScalars { alpha: spherical_step_factor(shape) * eta * wn / (hn * hn), beta: hk.dot(&wc) / (hn * wn), xi }
}

/// One projected step per feature column, `h ← h + (κ η/‖h‖)(I − ĥĥ^T) w_c`.
/// With `rescale`, `η` is replaced by `η‖h‖`.
pub fn step_spherical(
    h: &DMatrix<f64>,
    w: &DMatrix<f64>,
    shape: &ProblemShape,
    schedule: &Schedule,
    t: f64,
    rescale: bool,
) -> Result<DMatrix<f64>> {
    shape.check_features(h)?;
    shape.check_prototypes(w)?;
    let mut next = h.clone();
    advance_spherical(&mut next, w, shape, schedule.eta(Rate::Features, t)?, rescale)?;
    Ok(next)
}

/// A column whose perpendicular part of `w_c` is below this fraction of
/// `‖w_c‖` is treated as collinear and left untouched.
const COLLINEAR: f64 = 1e-12;

pub(crate) fn advance_spherical(
    h: &mut DMatrix<f64>,
    w: &DMatrix<f64>,
    shape: &ProblemShape,
    eta: f64,
    rescale: bool,
) -> Result<()> {
    let kappa = spherical_step_factor(shape);
    let mut perp = DVector::zeros(h.nrows());
    for k in 0..h.ncols() {
        let wc = w.column(shape.label_of(k));
        let mut hk = h.column_mut(k);
        let hn = hk.norm();
        if hn == 0.0 {
            return Err(Error::ZeroFeature(k));
        }
        let wn = wc.norm();
        perp.copy_from(&wc);
        let along = hk.dot(&wc) / (hn * hn);
        perp.axpy(-along, &hk, 1.0);
        if perp.norm() <= COLLINEAR * wn {
            continue;
        }
        let rate = if rescale { eta * hn } else { eta };
        hk.axpy(kappa * rate / hn, &perp, 1.0);
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SphericalPreconditions {
    /// `max_k κ η(0) ‖w_c‖ / ‖h_k(0)‖`; the rate bound holds when this is ≤ 1.
    pub worst_rate_ratio: f64,
    pub rate_bound_holds: bool,
}

/// Checks that `W 1_C = 0` (hard requirement) and evaluates the initial rate bound.
pub fn spherical_preconditions(
    h: &DMatrix<f64>,
    w: &DMatrix<f64>,
    shape: &ProblemShape,
    eta0: f64,
) -> Result<SphericalPreconditions> {
    shape.check_features(h)?;
    shape.check_prototypes(w)?;
    let mean = column_sum(w).norm();
    if mean > 1e-10 * w.norm().max(1.0) {
        return Err(Error::InvalidArgument(format!("spherical dynamics need W·1 = 0, got norm {mean:e}")));
    }
    let kappa = spherical_step_factor(shape);
    let mut worst: f64 = 0.0;
    for k in 0..h.ncols() {
        let hn = h.column(k).norm();
        if hn == 0.0 {
            return Err(Error::ZeroFeature(k));
        }
        worst = worst.max(kappa * eta0 * w.column(shape.label_of(k)).norm() / hn);
    }
    Ok(SphericalPreconditions { worst_rate_ratio: worst, rate_bound_holds: worst <= 1.0 })
}
