use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::schedule::{Rate, Schedule};
use crate::shape::{add_times_m, ProblemShape};

/// Features under fixed prototypes with feature decay `λ`:
/// `H(t) = e^{−λζ} H0 + ((1 − e^{−λζ})/λ) W M`, and `H0 + ζ W M` at `λ = 0`.
pub fn anchored_state(
    h0: &DMatrix<f64>,
    w: &DMatrix<f64>,
    shape: &ProblemShape,
    schedule: &Schedule,
    lambda: f64,
    t: f64,
) -> Result<DMatrix<f64>> {
    shape.check_features(h0)?;
    shape.check_prototypes(w)?;
    if !lambda.is_finite() || lambda < 0.0 {
        return Err(Error::InvalidArgument(format!("feature decay must be finite and >= 0, got {lambda}")));
    }
    let zeta = schedule.zeta(Rate::Features, t)?;
    let x = lambda * zeta;
    let (keep, drift) = if lambda == 0.0 { (1.0, zeta) } else { ((-x).exp(), -(-x).exp_m1() / lambda) };
    let mut h = h0 * keep;
    add_times_m(&mut h, w, drift, shape);
    Ok(h)
}
