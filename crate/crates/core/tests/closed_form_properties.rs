mod common;

use common::{pair, rel_pair, state};
use peel_core::analysis::{fit_exponential_rate, Window};
use peel_core::closed_form::{
    anchored_state, regularized_limit, regularized_state, unconstrained_limit, unconstrained_state, RegularizedScalars,
};
use peel_core::shape::{times_m, times_mt};
use peel_core::subspace::{decompose, project_e1};
use peel_core::{HwPair, ProblemShape, Rate, RateProfile, Schedule, Sign};
use peel_oracles::dense;
use proptest::prelude::*;

fn schedule(kind: usize, s: f64) -> Schedule {
    let profile = match kind {
        0 => RateProfile::Constant { eta: 0.7 },
        1 => RateProfile::CosineAnnealing { eta0: 0.9, period: 8.0 },
        _ => RateProfile::Piecewise { segments: vec![(0.0, 0.8), (2.0, 0.3), (5.0, 0.05)] },
    };
    Schedule::new(profile, s).unwrap()
}

fn shape() -> ProblemShape {
    ProblemShape::new(8, 5, 3, 0.1).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn unconstrained_solution_solves_its_flow(seed in any::<u64>(), kind in 0usize..3, s in 0.2f64..2.0, t in 0.1f64..9.0) {
        let sh = shape();
        let sched = schedule(kind, s);
        let d = decompose(&pair(&sh, seed), &sh).unwrap();
        let delta = 1e-4;
        let a = unconstrained_state(&d, &sh, &sched, t).unwrap();
        let b = unconstrained_state(&d, &sh, &sched, t + delta).unwrap();
        let rhs = HwPair::new(
            times_m(&a.w, &sh) * sched.eta(Rate::Features, t).unwrap(),
            times_mt(&a.h, &sh) * sched.eta(Rate::Prototypes, t).unwrap(),
        );
        prop_assume!(rhs.norm() > 0.0);
        prop_assert!(rel_pair(&b.sub(&a).scaled(1.0 / delta), &rhs) < 1e-2);
    }

    #[test]
    fn regularized_solution_solves_its_flow(seed in any::<u64>(), kind in 0usize..3, s in 0.2f64..2.0, t in 0.1f64..9.0, l1 in 0.0f64..0.5, l2 in 0.0f64..0.5) {
        let sh = shape();
        let sched = schedule(kind, s);
        let d = decompose(&pair(&sh, seed), &sh).unwrap();
        let delta = 1e-4;
        let a = regularized_state(&d, &sh, &sched, l1, l2, t).unwrap();
        let b = regularized_state(&d, &sh, &sched, l1, l2, t + delta).unwrap();
        let rhs = HwPair::new(
            (times_m(&a.w, &sh) - &a.h * l1) * sched.eta(Rate::Features, t).unwrap(),
            (times_mt(&a.h, &sh) - &a.w * l2) * sched.eta(Rate::Prototypes, t).unwrap(),
        );
        prop_assume!(rhs.norm() > 0.0);
        prop_assert!(rel_pair(&b.sub(&a).scaled(1.0 / delta), &rhs) < 1e-2);
    }

    #[test]
    fn anchored_solution_solves_its_flow(seed in any::<u64>(), kind in 0usize..3, s in 0.2f64..2.0, t in 0.1f64..9.0, lam in 0.0f64..1.0) {
        let sh = shape();
        let sched = schedule(kind, s);
        let st = state(&sh, seed);
        let delta = 1e-4;
        let a = anchored_state(&st.h, &st.w, &sh, &sched, lam, t).unwrap();
        let b = anchored_state(&st.h, &st.w, &sh, &sched, lam, t + delta).unwrap();
        let rhs = (times_m(&st.w, &sh) - &a * lam) * sched.eta(Rate::Features, t).unwrap();
        prop_assume!(rhs.norm() > 0.0);
        prop_assert!(common::rel(&((&b - &a) / delta), &rhs) < 1e-2);
    }

    #[test]
    fn constant_rate_solutions_form_semigroups(seed in any::<u64>(), s in 0.2f64..2.0, t1 in 0.0f64..5.0, t2 in 0.0f64..5.0, lam in 0.0f64..1.0) {
        let sh = shape();
        let sched = Schedule::new(RateProfile::Constant { eta: 0.6 }, s).unwrap();
        let z0 = pair(&sh, seed);
        let d = decompose(&z0, &sh).unwrap();
        let mid = unconstrained_state(&d, &sh, &sched, t1).unwrap();
        let chained = unconstrained_state(&decompose(&mid, &sh).unwrap(), &sh, &sched, t2).unwrap();
        prop_assert!(rel_pair(&chained, &unconstrained_state(&d, &sh, &sched, t1 + t2).unwrap()) < 1e-9);

        let h1 = anchored_state(&z0.h, &z0.w, &sh, &sched, lam, t1).unwrap();
        let h2 = anchored_state(&h1, &z0.w, &sh, &sched, lam, t2).unwrap();
        prop_assert!(common::rel(&h2, &anchored_state(&z0.h, &z0.w, &sh, &sched, lam, t1 + t2).unwrap()) < 1e-9);
    }

    #[test]
    fn regularized_scalars_match_matrix_exponential(sigma in -2.0f64..2.0, l1 in 0.0f64..1.0, l2 in 0.0f64..1.0, z2 in 0.0f64..6.0, s in 0.1f64..3.0) {
        let z1 = s * z2;
        let sc = RegularizedScalars::compute(sigma, l1, l2, z1, z2);
        let m = nalgebra::DMatrix::from_row_slice(2, 2, &[-l1 * z1, sigma * z1, sigma * z2, -l2 * z2]);
        let e = dense::expm(&m);
        let scale = e.amax().max(1.0);
        prop_assert!((sc.a - e[(0, 0)] - e[(0, 1)]).abs() < 1e-11 * scale);
        prop_assert!((sc.b - e[(1, 0)] - e[(1, 1)]).abs() < 1e-11 * scale);
    }
}

fn log_norm_slope(sh: &ProblemShape, seed: u64, t1: f64, t2: f64) -> f64 {
    let sched = Schedule::constant(1.0).unwrap();
    let d = decompose(&pair(sh, seed), sh).unwrap();
    let a = unconstrained_state(&d, sh, &sched, t1).unwrap().norm().ln();
    let b = unconstrained_state(&d, sh, &sched, t2).unwrap().norm().ln();
    (b - a) / (t2 - t1)
}

#[test]
fn norm_growth_follows_the_dominant_eigenvalue() {
    for (gamma, seed) in [(0.1, 1u64), (1.0, 2)] {
        let sh = ProblemShape::new(8, 5, 3, gamma).unwrap();
        let want = sh.sigma1().max(sh.sigma2().abs());
        let got = log_norm_slope(&sh, seed, 250.0, 350.0);
        assert!((got / want - 1.0).abs() < 0.02, "gamma {gamma}: {got} vs {want}");
    }
    let e1 = ProblemShape::new(8, 5, 3, 0.1).unwrap();
    let lim = unconstrained_limit(&decompose(&pair(&e1, 1), &e1).unwrap(), &e1, 1.0).unwrap();
    assert!((lim.rate_per_g - (e1.sigma2().abs() - e1.sigma1())).abs() < 1e-15);
}

#[test]
fn regularized_trichotomy_at_fifty_over_lambda_star() {
    let sh = ProblemShape::new(8, 5, 3, 0.25).unwrap();
    let sched = Schedule::constant(1.0).unwrap();
    let z0 = pair(&sh, 9);
    let d = decompose(&z0, &sh).unwrap();
    let star = sh.lambda_star();
    let t = 50.0 / star;
    let target = project_e1(&z0, &sh, Sign::Plus).unwrap().pair().norm();
    let grow = regularized_state(&d, &sh, &sched, 0.5 * star, 0.5 * star, t).unwrap().norm();
    let grow_half = regularized_state(&d, &sh, &sched, 0.5 * star, 0.5 * star, t / 2.0).unwrap().norm();
    let keep = regularized_state(&d, &sh, &sched, star, star, t).unwrap().norm();
    let shrink = regularized_state(&d, &sh, &sched, 2.0 * star, 2.0 * star, t).unwrap().norm();
    assert!(grow > 1e9 * z0.norm() && grow > grow_half);
    assert!((keep / target - 1.0).abs() < 1e-9);
    assert!(shrink < 1e-9 * z0.norm());
    let lim = regularized_limit(&d, &sh, &sched, star).unwrap();
    assert_eq!(lim.trend, peel_core::closed_form::NormTrend::Converges);
}

#[test]
fn balanced_direction_converges_at_the_corollary_rate() {
    let sh = ProblemShape::new(8, 5, 3, 0.25).unwrap();
    let sched = Schedule::constant(1.0).unwrap();
    let z0 = pair(&sh, 4);
    let d = decompose(&z0, &sh).unwrap();
    let limit = project_e1(&z0, &sh, Sign::Plus).unwrap().pair();
    let times: Vec<f64> = (0..=150).map(f64::from).collect();
    let states: Vec<HwPair> = times.iter().map(|&t| unconstrained_state(&d, &sh, &sched, t).unwrap()).collect();
    let dist = peel_core::analysis::dist_to_limit(&states, &limit).unwrap();
    let fit = fit_exponential_rate(&times, &dist, Window::LatterHalf).unwrap();
    assert!((fit.slope / -sh.sigma1() - 1.0).abs() < 0.1, "slope {}", fit.slope);
}
