//! Convergence diagnostics: exponential rate fits, normalized distances,
//! simulation-versus-closed-form errors and norm-growth classification.

use crate::error::{Error, Result};
use crate::shape::HwPair;
use crate::simulate::Trace;

/// Sub-range of times used by a fit.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Window {
    /// The second half of the sampled time span.
    #[default]
    LatterHalf,
    /// The last `fraction` of the sampled time span.
    LatterFraction(f64),
    /// Explicit closed interval of times.
    Range(f64, f64),
}

impl Window {
    fn bounds(&self, times: &[f64]) -> (f64, f64) {
        let first = times.first().copied().unwrap_or(0.0);
        let last = times.last().copied().unwrap_or(0.0);
        match *self {
            Window::LatterHalf => (first + 0.5 * (last - first), last),
            Window::LatterFraction(f) => (last - f.clamp(0.0, 1.0) * (last - first), last),
            Window::Range(a, b) => (a, b),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub window: (f64, f64),
    pub points: usize,
}

/// Least-squares line through `(t, ln v)` over the window.
pub fn fit_exponential_rate(times: &[f64], values: &[f64], window: Window) -> Result<RateFit> {
    if times.len() != values.len() {
        return Err(Error::DimensionMismatch {
            what: "values",
            expected: times.len().to_string(),
            got: values.len().to_string(),
        });
    }
    let (lo, hi) = window.bounds(times);
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (&t, &v) in times.iter().zip(values) {
        if t < lo || t > hi {
            continue;
        }
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::NonPositive { time: t, value: v });
        }
        xs.push(t);
        ys.push(v.ln());
    }
    if xs.len() < 10 {
        return Err(Error::TooFewPoints(xs.len()));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for (x, y) in xs.iter().zip(&ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
        syy += (y - my) * (y - my);
    }
    if sxx == 0.0 {
        return Err(Error::InvalidArgument("all fit times coincide".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let r_squared = if syy == 0.0 { if ss_res == 0.0 { 1.0 } else { 0.0 } } else { 1.0 - ss_res / syy };
    Ok(RateFit { slope, intercept, r_squared, window: (lo, hi), points: xs.len() })
}

/// `‖Z/‖Z‖ − L/‖L‖‖` for each state.
pub fn dist_to_limit(states: &[HwPair], limit: &HwPair) -> Result<Vec<f64>> {
    let ln = limit.norm();
    if ln == 0.0 {
        return Err(Error::ZeroNorm);
    }
    let lh = &limit.h / ln;
    let lw = &limit.w / ln;
    states
        .iter()
        .map(|z| {
            let zn = z.norm();
            if zn == 0.0 {
                return Err(Error::ZeroNorm);
            }
            Ok(((&z.h / zn - &lh).norm_squared() + (&z.w / zn - &lw).norm_squared()).sqrt())
        })
        .collect()
}

/// Denominator guard for relative errors.
pub const ERROR_FLOOR: f64 = 1e-300;

/// `‖sim − reference‖ / max(‖reference‖, 1e-300)`.
pub fn relative_error(sim: &HwPair, reference: &HwPair) -> f64 {
    sim.sub(reference).norm() / reference.norm().max(ERROR_FLOOR)
}

/// Maximum relative error between stored snapshots and a closed-form solver
/// over `sample_times`. Each sample time must match a snapshot time.
pub fn compare_closed_form<F>(trace: &Trace, solver: F, sample_times: &[f64]) -> Result<f64>
where
    F: Fn(f64) -> Result<HwPair>,
{
    let mut worst: f64 = 0.0;
    for &t in sample_times {
        let (ts, state) = trace
            .snapshots
            .iter()
            .min_by(|a, b| (a.0 - t).abs().total_cmp(&(b.0 - t).abs()))
            .ok_or_else(|| Error::InvalidArgument("trace holds no snapshots".into()))?;
        if (ts - t).abs() > 1e-9 * t.abs().max(1.0) {
            return Err(Error::InvalidArgument(format!("no snapshot at t = {t} (nearest {ts})")));
        }
        worst = worst.max(relative_error(&state.pair(), &solver(t)?));
    }
    Ok(worst)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Growth {
    Shrinks,
    Bounded,
    Grows,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormGrowth {
    pub classification: Growth,
    pub fit: RateFit,
}

/// Log-slope threshold (per unit time) separating the three classes.
pub const GROWTH_THRESHOLD: f64 = 1e-6;

/// Classifies the `norm_Z` column of a trace by its fitted log-slope.
pub fn norm_growth_report(trace: &Trace) -> Result<NormGrowth> {
    let norms: Vec<f64> = trace.rows.iter().map(|r| r.norm_z).collect();
    classify_growth(&trace.times, &norms, Window::LatterHalf)
}

pub fn classify_growth(times: &[f64], norms: &[f64], window: Window) -> Result<NormGrowth> {
    let fit = fit_exponential_rate(times, norms, window)?;
    let classification = if fit.slope > GROWTH_THRESHOLD {
        Growth::Grows
    } else if fit.slope < -GROWTH_THRESHOLD {
        Growth::Shrinks
    } else {
        Growth::Bounded
    };
    Ok(NormGrowth { classification, fit })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use nalgebra::DMatrix;

    #[test]
    fn exact_exponential() {
        let t: Vec<f64> = (0..=10).map(f64::from).collect();
        let v: Vec<f64> = t.iter().map(|x| (-0.5 * x).exp()).collect();
        let fit = fit_exponential_rate(&t, &v, Window::Range(0.0, 10.0)).unwrap();
        assert_abs_diff_eq!(fit.slope, -0.5, epsilon = 1e-10);
        assert_abs_diff_eq!(fit.r_squared, 1.0, epsilon = 1e-10);
    }

    #[test]
    fn perturbed_exponential() {
        let t: Vec<f64> = (0..=200).map(|i| i as f64 * 0.1).collect();
        let v: Vec<f64> = t.iter().map(|x| (-0.5 * x).exp() * (1.0 + 0.01 * x.sin())).collect();
        let fit = fit_exponential_rate(&t, &v, Window::Range(0.0, 20.0)).unwrap();
        assert!((fit.slope + 0.5).abs() < 0.005);
    }

    #[test]
    fn constant_values_and_errors() {
        let t: Vec<f64> = (0..20).map(f64::from).collect();
        let fit = fit_exponential_rate(&t, &vec![3.0; 20], Window::Range(0.0, 19.0)).unwrap();
        assert_eq!(fit.slope, 0.0);
        assert!(matches!(fit_exponential_rate(&t[..5], &[1.0; 5], Window::LatterHalf), Err(Error::TooFewPoints(_))));
        let mut bad = vec![1.0; 20];
        bad[15] = 0.0;
        assert!(matches!(fit_exponential_rate(&t, &bad, Window::LatterHalf), Err(Error::NonPositive { .. })));
    }

    #[test]
    fn distances() {
        let l = HwPair::new(DMatrix::from_element(2, 2, 1.0), DMatrix::zeros(2, 1));
        let scaled = l.scaled(3.5);
        let orth = HwPair::new(DMatrix::zeros(2, 2), DMatrix::from_element(2, 1, 2.0));
        let d = dist_to_limit(&[scaled, orth], &l).unwrap();
        assert!(d[0] < 1e-15);
        assert_abs_diff_eq!(d[1], 2f64.sqrt(), epsilon = 1e-15);
        assert!(dist_to_limit(&[l.clone()], &l.scaled(0.0)).is_err());
    }
}
