use criterion::{criterion_group, criterion_main, Criterion};
use peel_core::closed_form::{ntk_state, regularized_state, unconstrained_state};
use peel_core::init::{random_psd, random_state, substream};
use peel_core::simulate::{metrics_row, step_anchored, step_regularized, step_spherical, step_unconstrained};
use peel_core::subspace::decompose;
use peel_core::{LimitTarget, ProblemShape, Schedule};
use std::hint::black_box;

fn full_scale_shape() -> ProblemShape {
    ProblemShape::new(512, 100, 10, 1.0 / 99.0).unwrap()
}

fn steps(c: &mut Criterion) {
    let shape = full_scale_shape();
    let state = random_state(&shape, &mut substream(1, 0));
    let sched = Schedule::constant(0.1).unwrap();
    c.bench_function("euler_unconstrained_step", |b| {
        b.iter(|| step_unconstrained(black_box(&state), &shape, &sched, 0.0, 1.0).unwrap())
    });
    c.bench_function("euler_regularized_step", |b| {
        b.iter(|| step_regularized(black_box(&state), &shape, &sched, 3e-3, 3e-3, 0.0, 1.0).unwrap())
    });
    c.bench_function("euler_anchored_step", |b| {
        b.iter(|| step_anchored(black_box(&state.h), &state.w, &shape, &sched, 0.01, 0.0, 1.0).unwrap())
    });
    let w = peel_core::loss::simplex_etf(512, 100, 1.0).unwrap();
    let h = peel_core::init::unit_columns(&state.h);
    c.bench_function("spherical_step", |b| b.iter(|| step_spherical(black_box(&h), &w, &shape, &sched, 0.0, true).unwrap()));
    c.bench_function("metrics_row", |b| b.iter(|| metrics_row(black_box(&state), &shape, 0.0, &LimitTarget::OwnPrototype).unwrap()));
}

fn closed_forms(c: &mut Criterion) {
    let shape = full_scale_shape();
    let state = random_state(&shape, &mut substream(2, 0));
    let sched = Schedule::constant(0.1).unwrap();
    c.bench_function("decompose", |b| b.iter(|| decompose(black_box(&state.pair()), &shape).unwrap()));
    let d = decompose(&state.pair(), &shape).unwrap();
    c.bench_function("unconstrained_state", |b| b.iter(|| unconstrained_state(black_box(&d), &shape, &sched, 100.0).unwrap()));
    c.bench_function("regularized_state", |b| {
        b.iter(|| regularized_state(black_box(&d), &shape, &sched, 3e-3, 3e-3, 100.0).unwrap())
    });
    let small = ProblemShape::new(32, 10, 5, 1.0 / 9.0).unwrap();
    let st = random_state(&small, &mut substream(3, 0));
    let k = random_psd(32, &mut substream(3, 1));
    c.bench_function("ntk_state_small", |b| b.iter(|| ntk_state(black_box(&st.h), &st.w, &k, &small, 2.0).unwrap()));
}

criterion_group!(benches, steps, closed_forms);
criterion_main!(benches);
