mod common;

use common::{rel, rel_pair, state};
use nalgebra::DMatrix;
use peel_core::analysis::{fit_exponential_rate, Window};
use peel_core::closed_form::{anchored_state, ntk_state, regularized_state, unconstrained_state};
use peel_core::init::{gaussian_matrix, random_psd, substream, unit_columns};
use peel_core::loss::simplex_etf;
use peel_core::simulate::{
    column_scalars, scalar_spherical_step, step_anchored, step_ntk, step_regularized, step_spherical, step_unconstrained,
};
use peel_core::subspace::decompose;
use peel_core::{HwPair, ProblemShape, RateProfile, Schedule, State};
use proptest::prelude::*;

fn euler<F>(st: &State, horizon: f64, dt: f64, mut step: F) -> State
where
    F: FnMut(&State, f64, f64) -> State,
{
    let mut s = st.clone();
    let n = (horizon / dt).round() as usize;
    for i in 0..n {
        s = step(&s, i as f64 * dt, dt);
    }
    s
}

fn order(coarse: f64, fine: f64) -> f64 {
    coarse / fine
}

#[test]
fn euler_simulators_converge_at_first_order() {
    let sh = ProblemShape::new(8, 5, 3, 0.1).unwrap();
    let sched = Schedule::new(RateProfile::CosineAnnealing { eta0: 0.5, period: 6.0 }, 0.8).unwrap();
    let st = state(&sh, 3);
    let d = decompose(&st.pair(), &sh).unwrap();
    let horizon = 5.0;

    let exact = unconstrained_state(&d, &sh, &sched, horizon).unwrap();
    let err = |dt| rel_pair(&euler(&st, horizon, dt, |s, t, dt| step_unconstrained(s, &sh, &sched, t, dt).unwrap()).pair(), &exact);
    let r = order(err(1e-2), err(5e-3));
    assert!((1.8..=2.2).contains(&r), "unconstrained ratio {r}");

    let (l1, l2) = (0.3, 0.6);
    let exact = regularized_state(&d, &sh, &sched, l1, l2, horizon).unwrap();
    let err = |dt| rel_pair(&euler(&st, horizon, dt, |s, t, dt| step_regularized(s, &sh, &sched, l1, l2, t, dt).unwrap()).pair(), &exact);
    let r = order(err(1e-2), err(5e-3));
    assert!((1.8..=2.2).contains(&r), "regularized ratio {r}");

    let lam = 0.4;
    let exact = anchored_state(&st.h, &st.w, &sh, &sched, lam, horizon).unwrap();
    let err = |dt| {
        let end = euler(&st, horizon, dt, |s, t, dt| State { h: step_anchored(&s.h, &s.w, &sh, &sched, lam, t, dt).unwrap(), ..s.clone() });
        rel(&end.h, &exact)
    };
    let r = order(err(1e-2), err(5e-3));
    assert!((1.8..=2.2).contains(&r), "anchored ratio {r}");

    let k = random_psd(8, &mut substream(5, 0));
    let unit = Schedule::constant(1.0).unwrap();
    let exact = ntk_state(&st.h, &st.w, &k, &sh, horizon).unwrap();
    let err = |dt| rel_pair(&euler(&st, horizon, dt, |s, t, dt| step_ntk(s, &k, &sh, &unit, t, dt).unwrap()).pair(), &exact);
    let r = order(err(1e-2), err(5e-3));
    assert!((1.8..=2.2).contains(&r), "ntk ratio {r}");
}

struct Sphere {
    shape: ProblemShape,
    w: DMatrix<f64>,
    h: DMatrix<f64>,
    eta: f64,
}

fn sphere(seed: u64, alpha0: f64) -> Sphere {
    let shape = ProblemShape::new(6, 4, 3, 1.0 / 3.0).unwrap();
    let w = simplex_etf(6, 4, 1.0).unwrap();
    let h = unit_columns(&gaussian_matrix(&mut substream(seed, 0), 6, 12, 1.0));
    let kappa = (1.0 + shape.gamma()) / shape.samples() as f64;
    Sphere { shape, w, h, eta: alpha0 / kappa }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn spherical_columns_follow_the_scalar_recursion(seed in any::<u64>(), alpha0 in 0.01f64..1.0) {
        let sp = sphere(seed, alpha0);
        let sched = Schedule::constant(sp.eta).unwrap();
        let mut h = sp.h.clone();
        for _ in 0..60 {
            let before: Vec<_> = (0..12).map(|k| column_scalars(&h, &sp.w, &sp.shape, k, sp.eta, 1.0)).collect();
            h = step_spherical(&h, &sp.w, &sp.shape, &sched, 0.0, false).unwrap();
            for (k, b) in before.into_iter().enumerate() {
                let want = scalar_spherical_step(b);
                let got = column_scalars(&h, &sp.w, &sp.shape, k, sp.eta, 1.0);
                prop_assert!((got.alpha - want.alpha).abs() < 1e-12 && (got.beta - want.beta).abs() < 1e-12);
                prop_assert!(got.beta >= b.beta - 1e-15 && got.alpha <= b.alpha * (1.0 + 1e-14));
            }
        }
    }

    #[test]
    fn antipodal_columns_stay_frozen(seed in any::<u64>(), alpha0 in 0.01f64..1.0, rescale in any::<bool>()) {
        let mut sp = sphere(seed, alpha0);
        let col = -sp.w.column(1) * 1.7;
        sp.h.set_column(5, &col);
        let sched = Schedule::constant(sp.eta).unwrap();
        let mut h = sp.h.clone();
        for step in 0..40 {
            h = step_spherical(&h, &sp.w, &sp.shape, &sched, step as f64, rescale).unwrap();
            prop_assert!(h.column(5) == col.column(0));
        }
    }
}

fn decay_slope(sp: &Sphere, rescale: bool) -> f64 {
    let sched = Schedule::constant(sp.eta).unwrap();
    let mut h = sp.h.clone();
    let (mut ts, mut gaps) = (Vec::new(), Vec::new());
    for step in 0..400 {
        let gap = 1.0 - column_scalars(&h, &sp.w, &sp.shape, 0, sp.eta, 1.0).beta;
        if gap > 1e-12 && gap < 1e-2 {
            ts.push(step as f64);
            gaps.push(gap);
        }
        h = step_spherical(&h, &sp.w, &sp.shape, &sched, step as f64, rescale).unwrap();
    }
    fit_exponential_rate(&ts, &gaps, Window::LatterHalf).unwrap().slope
}

#[test]
fn spherical_gap_decays_log_linearly_and_faster_with_rescaling() {
    for seed in 0..5 {
        let sp = sphere(seed, 0.1);
        let plain = decay_slope(&sp, false);
        let scaled = decay_slope(&sp, true);
        assert!(plain < 0.0, "seed {seed}: plain slope {plain}");
        assert!(scaled <= plain, "seed {seed}: rescaled {scaled} vs plain {plain}");
    }
}

#[test]
fn euler_step_matches_hand_computed_update() {
    let sh = ProblemShape::new(2, 2, 1, 1.0).unwrap();
    let st = State::new(DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]), DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]), nalgebra::DVector::zeros(2), &sh).unwrap();
    let next = step_unconstrained(&st, &sh, &Schedule::constant(0.5).unwrap(), 0.0, 1.0).unwrap();
    let m = peel_oracles::dense::coupling(2, 1, 1.0);
    let want = HwPair::new(&st.h + &st.w * &m * 0.5, &st.w + &st.h * m.transpose() * 0.5);
    assert!(rel_pair(&next.pair(), &want) < 1e-15);
}
