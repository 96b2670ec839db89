//! Learning-rate schedules `η1(t) = s·η2(t)` with exact cumulative integrals.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Time profile of the prototype rate `η2`.
#[derive(Debug, Clone, PartialEq)]
pub enum RateProfile {
    Constant { eta: f64 },
    /// `(η0/2)(1 + cos(πt/T))` on `[0, T]`, zero afterwards.
    CosineAnnealing { eta0: f64, period: f64 },
    /// `(start, value)` pairs; each value holds until the next start, the last one forever.
    Piecewise { segments: Vec<(f64, f64)> },
}

impl RateProfile {
    fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        match self {
            RateProfile::Constant { eta } => {
                if !eta.is_finite() || *eta < 0.0 {
                    return bad(format!("rate must be finite and >= 0, got {eta}"));
                }
            }
            RateProfile::CosineAnnealing { eta0, period } => {
                if !eta0.is_finite() || *eta0 < 0.0 {
                    return bad(format!("eta0 must be finite and >= 0, got {eta0}"));
                }
                if !period.is_finite() || *period <= 0.0 {
                    return bad(format!("period must be finite and > 0, got {period}"));
                }
            }
            RateProfile::Piecewise { segments } => {
                if segments.is_empty() || segments[0].0 != 0.0 {
                    return bad("piecewise table must start at t = 0".into());
                }
                for pair in segments.windows(2) {
                    if !(pair[1].0 > pair[0].0) {
                        return bad("piecewise breakpoints must be strictly increasing".into());
                    }
                }
                if segments.iter().any(|&(t, v)| !t.is_finite() || !v.is_finite() || v < 0.0) {
                    return bad("piecewise entries must be finite with rates >= 0".into());
                }
            }
        }
        Ok(())
    }

    fn value(&self, t: f64) -> f64 {
        match self {
            RateProfile::Constant { eta } => *eta,
            RateProfile::CosineAnnealing { eta0, period } => {
                if t <= *period {
                    0.5 * eta0 * (1.0 + (PI * t / period).cos())
                } else {
                    0.0
                }
            }
            RateProfile::Piecewise { segments } => {
                let idx = segments.partition_point(|&(start, _)| start <= t);
                segments[idx.saturating_sub(1)].1
            }
        }
    }

    fn integral(&self, t: f64) -> f64 {
        match self {
            RateProfile::Constant { eta } => eta * t,
            RateProfile::CosineAnnealing { eta0, period } => {
                let u = t.min(*period);
                0.5 * eta0 * (u + period / PI * (PI * u / period).sin())
            }
            RateProfile::Piecewise { segments } => {
                let mut acc = 0.0;
                for (i, &(start, value)) in segments.iter().enumerate() {
                    if start >= t {
                        break;
                    }
                    let end = segments.get(i + 1).map_or(t, |next| next.0.min(t));
                    acc += value * (end - start);
                }
                acc
            }
        }
    }

    fn scaled(&self, factor: f64) -> RateProfile {
        match self {
            RateProfile::Constant { eta } => RateProfile::Constant { eta: eta * factor },
            RateProfile::CosineAnnealing { eta0, period } => {
                RateProfile::CosineAnnealing { eta0: eta0 * factor, period: *period }
            }
            RateProfile::Piecewise { segments } => {
                RateProfile::Piecewise { segments: segments.iter().map(|&(t, v)| (t, v * factor)).collect() }
            }
        }
    }
}

/// Which of the two rates: `η1` drives the features, `η2` the prototypes and bias.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rate {
    Features,
    Prototypes,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    profile: RateProfile,
    s: f64,
}

impl Schedule {
    /// `profile` is `η2`; `η1 = s·η2`.
    pub fn new(profile: RateProfile, s: f64) -> Result<Self> {
        profile.validate()?;
        if !s.is_finite() || s <= 0.0 {
            return Err(Error::InvalidArgument(format!("ratio s must be finite and > 0, got {s}")));
        }
        Ok(Self { profile, s })
    }

    pub fn constant(eta: f64) -> Result<Self> {
        Self::new(RateProfile::Constant { eta }, 1.0)
    }

    /// Builds a schedule from two independently given profiles, rejecting
    /// pairs that are not proportional.
    pub fn from_rates(eta1: RateProfile, eta2: RateProfile) -> Result<Self> {
        eta1.validate()?;
        eta2.validate()?;
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * a.abs().max(b.abs());
        let reject = || Err(Error::NonProportional(format!("{eta1:?} vs {eta2:?}")));
        let ratio = match (&eta1, &eta2) {
            (RateProfile::Constant { eta: a }, RateProfile::Constant { eta: b }) => a / b,
            (
                RateProfile::CosineAnnealing { eta0: a, period: pa },
                RateProfile::CosineAnnealing { eta0: b, period: pb },
            ) if pa == pb => a / b,
            (RateProfile::Piecewise { segments: sa }, RateProfile::Piecewise { segments: sb })
                if sa.len() == sb.len() && sa.iter().zip(sb).all(|(x, y)| x.0 == y.0) =>
            {
                let Some(idx) = sb.iter().position(|&(_, v)| v > 0.0) else {
                    return reject();
                };
                let r = sa[idx].1 / sb[idx].1;
                if !sa.iter().zip(sb).all(|(x, y)| close(x.1, r * y.1)) {
                    return reject();
                }
                r
            }
            _ => return reject(),
        };
        if !ratio.is_finite() || ratio <= 0.0 {
            return reject();
        }
        Self::new(eta2, ratio)
    }

    pub fn profile(&self) -> &RateProfile {
        &self.profile
    }

    /// `s = η1/η2`.
    pub fn ratio(&self) -> f64 {
        self.s
    }

    fn factor(&self, which: Rate) -> f64 {
        match which {
            Rate::Features => self.s,
            Rate::Prototypes => 1.0,
        }
    }

    pub fn eta(&self, which: Rate, t: f64) -> Result<f64> {
        check_time(t)?;
        Ok(self.factor(which) * self.profile.value(t))
    }

    /// `ζ(t) = ∫_0^t η(τ) dτ`, in closed form.
    pub fn zeta(&self, which: Rate, t: f64) -> Result<f64> {
        check_time(t)?;
        Ok(self.factor(which) * self.profile.integral(t))
    }

    /// Per-sample rate `η1(t)·‖h‖` used by the rescaled spherical update.
    pub fn rescaled_eta(&self, t: f64, feature_norm: f64) -> Result<f64> {
        if !(feature_norm > 0.0) || !feature_norm.is_finite() {
            return Err(Error::InvalidArgument(format!("feature norm must be > 0, got {feature_norm}")));
        }
        Ok(self.eta(Rate::Features, t)? * feature_norm)
    }

    /// The same schedule with every rate multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(self.profile.scaled(factor), self.s)
    }
}

fn check_time(t: f64) -> Result<()> {
    if t < 0.0 || t.is_nan() {
        Err(Error::NegativeTime(t))
    } else {
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn cosine() -> Schedule {
        Schedule::new(RateProfile::CosineAnnealing { eta0: 0.1, period: 100.0 }, 1.0).unwrap()
    }

    #[test]
    fn examples() {
        let c = Schedule::constant(0.1).unwrap();
        assert_eq!(c.eta(Rate::Features, 7.0).unwrap(), 0.1);
        assert_eq!(c.eta(Rate::Prototypes, 7.0).unwrap(), 0.1);
        assert_abs_diff_eq!(c.zeta(Rate::Prototypes, 10.0).unwrap(), 1.0, epsilon = 1e-15);
        let k = cosine();
        assert_abs_diff_eq!(k.eta(Rate::Prototypes, 100.0).unwrap(), 0.0, epsilon = 1e-17);
        assert_abs_diff_eq!(k.eta(Rate::Prototypes, 50.0).unwrap(), 0.05, epsilon = 1e-15);
        assert_abs_diff_eq!(k.zeta(Rate::Prototypes, 100.0).unwrap(), 5.0, epsilon = 1e-13);
        assert_eq!(k.eta(Rate::Prototypes, 150.0).unwrap(), 0.0);
        assert_abs_diff_eq!(k.zeta(Rate::Prototypes, 1e4).unwrap(), 5.0, epsilon = 1e-13);
        assert_eq!(k.zeta(Rate::Features, 0.0).unwrap(), 0.0);
        assert!(k.eta(Rate::Features, -1.0).is_err());
    }

    #[test]
    fn rescaled() {
        let c = Schedule::constant(0.1).unwrap();
        assert_eq!(c.rescaled_eta(3.0, 1.0).unwrap(), 0.1);
        assert_abs_diff_eq!(c.rescaled_eta(3.0, 4.0).unwrap(), 0.4);
        assert!(c.rescaled_eta(3.0, 0.0).is_err());
    }

    #[test]
    fn piecewise_integral() {
        let p = Schedule::new(RateProfile::Piecewise { segments: vec![(0.0, 1.0), (2.0, 0.5), (5.0, 0.0)] }, 2.0).unwrap();
        assert_eq!(p.eta(Rate::Prototypes, 1.9).unwrap(), 1.0);
        assert_eq!(p.eta(Rate::Prototypes, 2.0).unwrap(), 0.5);
        assert_eq!(p.zeta(Rate::Prototypes, 3.0).unwrap(), 2.5);
        assert_eq!(p.zeta(Rate::Prototypes, 9.0).unwrap(), 3.5);
        assert_eq!(p.zeta(Rate::Features, 9.0).unwrap(), 7.0);
    }

    #[test]
    fn proportionality_is_enforced() {
        let a = RateProfile::Constant { eta: 0.2 };
        let b = RateProfile::Constant { eta: 0.1 };
        assert_abs_diff_eq!(Schedule::from_rates(a, b.clone()).unwrap().ratio(), 2.0);
        let cos = RateProfile::CosineAnnealing { eta0: 0.1, period: 10.0 };
        assert!(matches!(Schedule::from_rates(cos, b), Err(Error::NonProportional(_))));
        let c1 = RateProfile::CosineAnnealing { eta0: 0.1, period: 10.0 };
        let c2 = RateProfile::CosineAnnealing { eta0: 0.1, period: 20.0 };
        assert!(Schedule::from_rates(c1, c2).is_err());
        let p1 = RateProfile::Piecewise { segments: vec![(0.0, 0.2), (1.0, 0.4)] };
        let p2 = RateProfile::Piecewise { segments: vec![(0.0, 0.1), (1.0, 0.3)] };
        assert!(Schedule::from_rates(p1, p2).is_err());
    }

    #[test]
    fn invalid_profiles() {
        assert!(Schedule::constant(-1.0).is_err());
        assert!(Schedule::new(RateProfile::Constant { eta: 0.1 }, 0.0).is_err());
        assert!(Schedule::new(RateProfile::CosineAnnealing { eta0: 0.1, period: 0.0 }, 1.0).is_err());
        assert!(Schedule::new(RateProfile::Piecewise { segments: vec![(1.0, 0.1)] }, 1.0).is_err());
    }
}
