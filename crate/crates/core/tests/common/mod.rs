#![allow(dead_code)]

use nalgebra::DMatrix;
use peel_core::init::{gaussian_matrix, random_state, substream};
use peel_core::{HwPair, ProblemShape, State};

pub const SHAPES: [(usize, usize, usize); 4] = [(3, 2, 1), (4, 3, 2), (8, 5, 3), (16, 4, 4)];

/// The shape grid crossed with `γ ∈ {0.01, 1/(C−1), 0.5}`.
pub fn shape_grid() -> Vec<ProblemShape> {
    let mut out = Vec::new();
    for (p, c, n) in SHAPES {
        for g in [0.01, 1.0 / (c as f64 - 1.0), 0.5] {
            out.push(ProblemShape::new(p, c, n, g).unwrap());
        }
    }
    out
}

pub fn state(shape: &ProblemShape, seed: u64) -> State {
    let mut rng = substream(seed, 0);
    let mut st = random_state(shape, &mut rng);
    st.b = gaussian_matrix(&mut rng, shape.classes(), 1, 1.0).column(0).into_owned();
    st
}

pub fn pair(shape: &ProblemShape, seed: u64) -> HwPair {
    state(shape, seed).pair()
}

pub fn rel(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / b.norm().max(1e-300)
}

pub fn rel_pair(a: &HwPair, b: &HwPair) -> f64 {
    a.sub(b).norm() / b.norm().max(1e-300)
}
