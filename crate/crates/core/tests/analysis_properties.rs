mod common;

use common::pair;
use peel_core::analysis::{dist_to_limit, fit_exponential_rate, relative_error, Window};
use peel_core::ProblemShape;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn noiseless_exponentials_are_fitted_exactly(rate in -2.0f64..2.0, scale in 0.01f64..100.0, n in 10usize..200) {
        let times: Vec<f64> = (0..n).map(|i| i as f64 * 0.1).collect();
        let values: Vec<f64> = times.iter().map(|t| scale * (rate * t).exp()).collect();
        let fit = fit_exponential_rate(&times, &values, Window::Range(0.0, times[n - 1])).unwrap();
        prop_assert!((fit.slope - rate).abs() < 1e-10);
        prop_assert!((fit.intercept - scale.ln()).abs() < 1e-9);
        prop_assert!(rate == 0.0 || (fit.r_squared - 1.0).abs() < 1e-10);
    }

    #[test]
    fn distance_ignores_positive_rescaling(seed in any::<u64>(), a in 1e-3f64..1e3, b in 1e-3f64..1e3) {
        let shape = ProblemShape::new(5, 3, 2, 0.2).unwrap();
        let z = pair(&shape, seed);
        let l = pair(&shape, seed.wrapping_add(1));
        let base = dist_to_limit(&[z.clone()], &l).unwrap()[0];
        let scaled = dist_to_limit(&[z.scaled(a)], &l.scaled(b)).unwrap()[0];
        prop_assert!((base - scaled).abs() < 1e-12);
    }

    #[test]
    fn swapped_relative_errors_differ_by_the_norm_ratio(seed in any::<u64>(), a in 0.1f64..10.0) {
        let shape = ProblemShape::new(4, 3, 2, 0.3).unwrap();
        let x = pair(&shape, seed);
        let y = pair(&shape, seed.wrapping_add(7)).scaled(a);
        let forward = relative_error(&x, &y);
        let backward = relative_error(&y, &x);
        prop_assert!((forward * y.norm() - backward * x.norm()).abs() <= 1e-12 * forward * y.norm());
    }
}
