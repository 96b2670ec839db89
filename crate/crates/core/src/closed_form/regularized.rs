use nalgebra::DVector;

use super::sinhc;
use super::unconstrained::{check_bias, unconstrained_bias};
use crate::error::{Error, Result};
use crate::schedule::{Rate, Schedule};
use crate::shape::{HwPair, ProblemShape};
use crate::subspace::{Decomposition, Subspace};

/// Per-subspace scalars of the weight-decayed flow: `(a, b) = exp(S)(1, 1)`
/// with `S = [[−λ1ζ1, σζ1], [σζ2, −λ2ζ2]]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegularizedScalars {
    pub theta1: f64,
    pub theta2: f64,
    pub a: f64,
    pub b: f64,
}

impl RegularizedScalars {
    /// Evaluated as `exp(S) = e^m [cosh(δ) I + (sinh(δ)/δ)(S − m I)]` with
    /// `m = tr(S)/2` and `δ = (θ2 − θ1)/2`, which stays accurate when the two
    /// eigenvalues coincide.
    pub fn compute(sigma: f64, lambda1: f64, lambda2: f64, zeta1: f64, zeta2: f64) -> Self {
        let d1 = lambda1 * zeta1;
        let d2 = lambda2 * zeta2;
        let m = -(d1 + d2) / 2.0;
        let disc = (d1 - d2) * (d1 - d2) + 4.0 * sigma * sigma * zeta1 * zeta2;
        let delta = disc.max(0.0).sqrt() / 2.0;
        let (ch, sh) = if delta < 1e-4 {
            let em = m.exp();
            (em * delta.cosh(), em * sinhc(delta))
        } else {
            let up = (m + delta).exp();
            let down = (m - delta).exp();
            ((up + down) / 2.0, (up - down) / (2.0 * delta))
        };
        let row1 = -d1 - m + sigma * zeta1;
        let row2 = sigma * zeta2 - d2 - m;
        Self { theta1: m - delta, theta2: m + delta, a: ch + sh * row1, b: ch + sh * row2 }
    }
}

pub fn regularized_state(
    d: &Decomposition,
    shape: &ProblemShape,
    schedule: &Schedule,
    lambda1: f64,
    lambda2: f64,
    t: f64,
) -> Result<HwPair> {
    check_decay(lambda1)?;
    check_decay(lambda2)?;
    let zeta1 = schedule.zeta(Rate::Features, t)?;
    let zeta2 = schedule.zeta(Rate::Prototypes, t)?;
    let mut z = HwPair::zeros(shape);
    for comp in &d.components {
        let sc = RegularizedScalars::compute(comp.eigenvalue, lambda1, lambda2, zeta1, zeta2);
        z.axpy_blocks(sc.a, sc.b, &comp.h, &comp.w);
    }
    Ok(z)
}

fn check_decay(lambda: f64) -> Result<()> {
    if !lambda.is_finite() || lambda < 0.0 {
        return Err(Error::InvalidArgument(format!("weight decay must be finite and >= 0, got {lambda}")));
    }
    Ok(())
}

/// Exact solution of `b' = η2 (1+γ−γC)/C · 1 − λ2 η2 b`.
pub fn regularized_bias(
    b0: &DVector<f64>,
    shape: &ProblemShape,
    schedule: &Schedule,
    lambda2: f64,
    t: f64,
) -> Result<DVector<f64>> {
    check_decay(lambda2)?;
    if lambda2 == 0.0 {
        return unconstrained_bias(b0, shape, schedule, t);
    }
    check_bias(b0, shape)?;
    let x = lambda2 * schedule.zeta(Rate::Prototypes, t)?;
    let decay = (-x).exp();
    let shift = shape.bias_drift() / lambda2 * -(-x).exp_m1();
    Ok((b0 * decay).add_scalar(shift))
}

/// The bias formula `φ(t)(b0 + k ψ(t) 1)` with `ψ(t) = ∫_0^t ζ2(τ) e^{λ2 ζ2(τ)} dτ`
/// as it is commonly printed. It does not solve the bias ODE; it is kept only
/// so the two can be compared.
pub fn regularized_bias_as_printed(
    b0: &DVector<f64>,
    shape: &ProblemShape,
    schedule: &Schedule,
    lambda2: f64,
    t: f64,
) -> Result<DVector<f64>> {
    check_decay(lambda2)?;
    check_bias(b0, shape)?;
    let zeta = |tau: f64| schedule.zeta(Rate::Prototypes, tau);
    let integrand = |tau: f64| -> Result<f64> {
        let z = zeta(tau)?;
        Ok(z * (lambda2 * z).exp())
    };
    let panels = 4096;
    let step = t / panels as f64;
    let mut psi = 0.0;
    if t > 0.0 {
        psi = integrand(0.0)? + integrand(t)?;
        for i in 1..panels {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            psi += w * integrand(i as f64 * step)?;
        }
        psi *= step / 3.0;
    }
    let phi = (-lambda2 * zeta(t)?).exp();
    Ok((b0.add_scalar(shape.bias_drift() * psi)) * phi)
}

/// Smallest exponent of the `2×2` system per unit `ζ2`.
pub fn omega1(sigma: f64, lambda: f64, s: f64) -> f64 {
    -(lambda * (s + 1.0) + root(sigma, lambda, s)) / 2.0
}

/// Largest exponent of the `2×2` system per unit `ζ2`; equals `σ − λ` at `s = 1`.
pub fn omega2(sigma: f64, lambda: f64, s: f64) -> f64 {
    (root(sigma, lambda, s) - lambda * (s + 1.0)) / 2.0
}

fn root(sigma: f64, lambda: f64, s: f64) -> f64 {
    (lambda * lambda * (s - 1.0) * (s - 1.0) + 4.0 * s * sigma * sigma).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormTrend {
    Shrinks,
    Converges,
    Diverges,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegularizedLimit {
    pub lambda_star: f64,
    pub omega1: f64,
    pub omega2: f64,
    pub pi_h_plus: f64,
    pub pi_h_minus: f64,
    pub pi_w_plus: f64,
    pub pi_w_minus: f64,
    /// Gap `ω2(σ1) − ω2(|σ2|)`; the residual relative to the limit decays like `e^{−ω ζ2}`.
    pub omega: f64,
    pub direction: HwPair,
    pub trend: NormTrend,
}

struct PiCoefficients {
    h_plus: f64,
    h_minus: f64,
    w_plus: f64,
    w_minus: f64,
}

fn pi_coefficients(sigma1: f64, lambda: f64, s: f64) -> PiCoefficients {
    let w1 = omega1(sigma1, lambda, s);
    let w2 = omega2(sigma1, lambda, s);
    let gap = w2 - w1;
    PiCoefficients {
        h_plus: (s * sigma1 - s * lambda - w1) / gap,
        h_minus: (-s * sigma1 - s * lambda - w1) / gap,
        w_plus: (s * lambda + w2 + sigma1) / gap,
        w_minus: (s * lambda + w2 - sigma1) / gap,
    }
}

/// `(π_h^+ H1^+ + π_h^− H1^−, π_w^+ W1^+ + π_w^− W1^−)` without validity checks.
pub fn regularized_limit_direction(d: &Decomposition, shape: &ProblemShape, s: f64, lambda: f64) -> HwPair {
    let pi = pi_coefficients(shape.sigma1(), lambda, s);
    let plus = d.get(Subspace::E1Plus);
    let minus = d.get(Subspace::E1Minus);
    HwPair::new(
        &plus.h * pi.h_plus + &minus.h * pi.h_minus,
        &plus.w * pi.w_plus + &minus.w * pi.w_minus,
    )
}

/// Asymptotics of the flow with `λ1 = λ2 = λ`.
pub fn regularized_limit(
    d: &Decomposition,
    shape: &ProblemShape,
    schedule: &Schedule,
    lambda: f64,
) -> Result<RegularizedLimit> {
    check_decay(lambda)?;
    if !shape.e1_dominated() {
        let c = shape.classes();
        return Err(Error::NotE1Dominated { gamma: shape.gamma(), bound: 2.0 / (c as f64 - 2.0), classes: c });
    }
    let s = schedule.ratio();
    let sigma1 = shape.sigma1();
    let lambda_star = shape.lambda_star();
    let pi = pi_coefficients(sigma1, lambda, s);
    let omega = omega2(sigma1, lambda, s) - omega2(shape.sigma2().abs(), lambda, s);
    let scale = lambda_star.max(lambda).max(f64::MIN_POSITIVE);
    let trend = if (lambda - lambda_star).abs() <= 1e-12 * scale {
        NormTrend::Converges
    } else if lambda > lambda_star {
        NormTrend::Shrinks
    } else {
        NormTrend::Diverges
    };
    Ok(RegularizedLimit {
        lambda_star,
        omega1: omega1(sigma1, lambda, s),
        omega2: omega2(sigma1, lambda, s),
        pi_h_plus: pi.h_plus,
        pi_h_minus: pi.h_minus,
        pi_w_plus: pi.w_plus,
        pi_w_minus: pi.w_minus,
        omega,
        direction: regularized_limit_direction(d, shape, s, lambda),
        trend,
    })
}
