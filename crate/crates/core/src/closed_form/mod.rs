//! Closed-form trajectories of the gradient flows.

mod anchored;
mod ntk;
mod regularized;
mod unconstrained;

pub use anchored::anchored_state;
pub use ntk::{ntk_state, NtkPropagator};
pub use regularized::{
    omega1, omega2, regularized_bias, regularized_bias_as_printed, regularized_limit, regularized_limit_direction,
    regularized_state, NormTrend, RegularizedLimit, RegularizedScalars,
};
pub use unconstrained::{
    limit_direction, unconstrained_bias, unconstrained_limit, unconstrained_state, UnconstrainedCoefficients,
    UnconstrainedLimit,
};

/// `sinh(x)/x`, exact at zero.
pub(crate) fn sinhc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        1.0 + x * x / 6.0
    } else {
        x.sinh() / x
    }
}
