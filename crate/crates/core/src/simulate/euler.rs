use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::schedule::{Rate, Schedule};
use crate::shape::{add_times_m, add_times_mt, scale_add_times_m, ProblemShape, State};

fn check_step(dt: f64) -> Result<()> {
    if !dt.is_finite() || dt <= 0.0 {
        return Err(Error::InvalidArgument(format!("dt must be finite and > 0, got {dt}")));
    }
    Ok(())
}

/// One explicit Euler step of the unconstrained flow. Both blocks use the
/// pre-step state.
pub fn step_unconstrained(state: &State, shape: &ProblemShape, schedule: &Schedule, t: f64, dt: f64) -> Result<State> {
    step_regularized(state, shape, schedule, 0.0, 0.0, t, dt)
}

/// One explicit Euler step of the flow with weight decay `λ1` on features and
/// `λ2` on prototypes and bias.
pub fn step_regularized(
    state: &State,
    shape: &ProblemShape,
    schedule: &Schedule,
    lambda1: f64,
    lambda2: f64,
    t: f64,
    dt: f64,
) -> Result<State> {
    shape.check_state(state)?;
    let mut next = state.clone();
    let mut scratch = DMatrix::zeros(shape.p(), shape.classes());
    advance_regularized(&mut next, &mut scratch, shape, schedule, lambda1, lambda2, t, dt)?;
    Ok(next)
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn advance_regularized(
    state: &mut State,
    scratch: &mut DMatrix<f64>,
    shape: &ProblemShape,
    schedule: &Schedule,
    lambda1: f64,
    lambda2: f64,
    t: f64,
    dt: f64,
) -> Result<()> {
    check_step(dt)?;
    let e1 = dt * schedule.eta(Rate::Features, t)?;
    let e2 = dt * schedule.eta(Rate::Prototypes, t)?;
    scratch.fill(0.0);
    add_times_mt(scratch, &state.h, e2, shape);
    scale_add_times_m(&mut state.h, 1.0 - lambda1 * e1, &state.w, e1, shape);
    if lambda2 != 0.0 {
        state.w *= 1.0 - lambda2 * e2;
        state.b *= 1.0 - lambda2 * e2;
    }
    state.w += &*scratch;
    let drift = e2 * shape.bias_drift();
    if drift != 0.0 {
        state.b.add_scalar_mut(drift);
    }
    Ok(())
}

/// Euler step of the feature flow `H' = η W M − λ η H` with `W` held fixed.
pub fn step_anchored(
    h: &DMatrix<f64>,
    w: &DMatrix<f64>,
    shape: &ProblemShape,
    schedule: &Schedule,
    lambda: f64,
    t: f64,
    dt: f64,
) -> Result<DMatrix<f64>> {
    shape.check_features(h)?;
    shape.check_prototypes(w)?;
    let mut next = h.clone();
    advance_anchored(&mut next, w, shape, schedule, lambda, t, dt)?;
    Ok(next)
}

pub(crate) fn advance_anchored(
    h: &mut DMatrix<f64>,
    w: &DMatrix<f64>,
    shape: &ProblemShape,
    schedule: &Schedule,
    lambda: f64,
    t: f64,
    dt: f64,
) -> Result<()> {
    check_step(dt)?;
    let e = dt * schedule.eta(Rate::Features, t)?;
    scale_add_times_m(h, 1.0 - lambda * e, w, e, shape);
    Ok(())
}

/// Euler step of the fixed-kernel flow `H' = η1 K W M`, `W' = η2 H M^T`.
pub fn step_ntk(
    state: &State,
    kernel: &DMatrix<f64>,
    shape: &ProblemShape,
    schedule: &Schedule,
    t: f64,
    dt: f64,
) -> Result<State> {
    shape.check_state(state)?;
    let mut next = state.clone();
    advance_ntk(&mut next, kernel, shape, schedule, t, dt)?;
    Ok(next)
}

pub(crate) fn advance_ntk(
    state: &mut State,
    kernel: &DMatrix<f64>,
    shape: &ProblemShape,
    schedule: &Schedule,
    t: f64,
    dt: f64,
) -> Result<()> {
    check_step(dt)?;
    let e1 = dt * schedule.eta(Rate::Features, t)?;
    let e2 = dt * schedule.eta(Rate::Prototypes, t)?;
    let mut dw = DMatrix::zeros(shape.p(), shape.classes());
    add_times_mt(&mut dw, &state.h, e2, shape);
    let kw = kernel * &state.w;
    add_times_m(&mut state.h, &kw, e1, shape);
    state.w += dw;
    state.b.add_scalar_mut(e2 * shape.bias_drift());
    Ok(())
}
