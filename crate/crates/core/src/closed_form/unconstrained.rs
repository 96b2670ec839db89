use nalgebra::DVector;

use super::sinhc;
use crate::error::{Error, Result};
use crate::schedule::{Rate, Schedule};
use crate::shape::{HwPair, ProblemShape};
use crate::subspace::{Decomposition, Subspace};

/// Scalars of the unconstrained solution; index 0 is the `+` sign, 1 the `−` sign.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnconstrainedCoefficients {
    pub alpha1: [f64; 2],
    pub beta1: [f64; 2],
    pub alpha2: [f64; 2],
    pub beta2: [f64; 2],
    pub zeta1: f64,
    pub zeta2: f64,
}

impl UnconstrainedCoefficients {
    pub fn at(shape: &ProblemShape, schedule: &Schedule, t: f64) -> Result<Self> {
        let zeta1 = schedule.zeta(Rate::Features, t)?;
        let zeta2 = schedule.zeta(Rate::Prototypes, t)?;
        let g = (zeta1 * zeta2).sqrt();
        // α = sinh(σg)/g = σ·sinhc(σg), β = cosh(σg)
        let pair = |sigma: f64| {
            let x = sigma * g;
            (sigma * sinhc(x), x.cosh())
        };
        let (s1, s2) = (shape.sigma1(), shape.sigma2());
        let (a1p, b1p) = pair(s1);
        let (a1m, b1m) = pair(-s1);
        let (a2p, b2p) = pair(s2);
        let (a2m, b2m) = pair(-s2);
        Ok(Self {
            alpha1: [a1p, a1m],
            beta1: [b1p, b1m],
            alpha2: [a2p, a2m],
            beta2: [b2p, b2m],
            zeta1,
            zeta2,
        })
    }

    /// Factors `(α ζ1 + β, α ζ2 + β)` applied to the feature and prototype blocks.
    pub fn block_factors(&self, tag: Subspace) -> (f64, f64) {
        let (a, b) = match tag {
            Subspace::E1Plus => (self.alpha1[0], self.beta1[0]),
            Subspace::E1Minus => (self.alpha1[1], self.beta1[1]),
            Subspace::E2Plus => (self.alpha2[0], self.beta2[0]),
            Subspace::E2Minus => (self.alpha2[1], self.beta2[1]),
            Subspace::E3 => return (1.0, 1.0),
        };
        (a * self.zeta1 + b, a * self.zeta2 + b)
    }
}

/// `Z(t) = Σ Π_i^ε Z0 (α_i^ε C(t) + β_i^ε I) + Π3 Z0`.
pub fn unconstrained_state(d: &Decomposition, shape: &ProblemShape, schedule: &Schedule, t: f64) -> Result<HwPair> {
    let coef = UnconstrainedCoefficients::at(shape, schedule, t)?;
    let mut z = HwPair::zeros(shape);
    for comp in &d.components {
        let (fh, fw) = coef.block_factors(comp.subspace);
        z.axpy_blocks(fh, fw, &comp.h, &comp.w);
    }
    Ok(z)
}

/// `b(t) = b0 + ((1 + γ − γC) ζ2(t)/C) 1`.
pub fn unconstrained_bias(b0: &DVector<f64>, shape: &ProblemShape, schedule: &Schedule, t: f64) -> Result<DVector<f64>> {
    check_bias(b0, shape)?;
    let shift = shape.bias_drift() * schedule.zeta(Rate::Prototypes, t)?;
    Ok(b0.add_scalar(shift))
}

pub(crate) fn check_bias(b0: &DVector<f64>, shape: &ProblemShape) -> Result<()> {
    if b0.len() != shape.classes() {
        return Err(Error::DimensionMismatch {
            what: "b",
            expected: shape.classes().to_string(),
            got: b0.len().to_string(),
        });
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct UnconstrainedLimit {
    /// Limit direction (not normalized).
    pub direction: HwPair,
    /// Exponent of the relative residual per unit `√(ζ1 ζ2)`.
    pub rate_per_g: f64,
}

/// The E1-dominated limit direction built from the E1 components for ratio `s`.
/// No validity check; see [`unconstrained_limit`].
pub fn limit_direction(d: &Decomposition, s: f64) -> HwPair {
    let rs = s.sqrt();
    let plus = d.get(Subspace::E1Plus);
    let minus = d.get(Subspace::E1Minus);
    let h = &plus.h * ((1.0 + rs) / 2.0) + &minus.h * ((1.0 - rs) / 2.0);
    let w = &plus.w * ((1.0 + rs) / (2.0 * rs)) - &minus.w * ((1.0 - rs) / (2.0 * rs));
    HwPair::new(h, w)
}

/// Limit direction and residual rate, valid when `0 < γ < 2/(C−2)` or `C = 2`.
pub fn unconstrained_limit(d: &Decomposition, shape: &ProblemShape, s: f64) -> Result<UnconstrainedLimit> {
    if !s.is_finite() || s <= 0.0 {
        return Err(Error::InvalidArgument(format!("ratio s must be > 0, got {s}")));
    }
    if !shape.e1_dominated() {
        let c = shape.classes();
        return Err(Error::NotE1Dominated {
            gamma: shape.gamma(),
            bound: if c > 2 { 2.0 / (c as f64 - 2.0) } else { f64::INFINITY },
            classes: c,
        });
    }
    let c = shape.classes() as f64;
    let g = shape.gamma();
    let rate = (-g * c).max((c - 2.0) * g - 2.0) / (c * (shape.per_class() as f64).sqrt());
    Ok(UnconstrainedLimit { direction: limit_direction(d, s), rate_per_g: rate })
}
