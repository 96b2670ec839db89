//! Seeded random initialization.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

use crate::shape::{ProblemShape, State};

/// Independent, reproducible generator for sweep member `index` of `seed`.
pub fn substream(seed: u64, index: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

pub fn gaussian_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize, std: f64) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| std * rng.sample::<f64, _>(StandardNormal))
}

/// `H` and `W` with i.i.d. `N(0, 1/p)` entries and zero bias.
pub fn random_state<R: Rng + ?Sized>(shape: &ProblemShape, rng: &mut R) -> State {
    let std = 1.0 / (shape.p() as f64).sqrt();
    let h = gaussian_matrix(rng, shape.p(), shape.samples(), std);
    let w = gaussian_matrix(rng, shape.p(), shape.classes(), std);
    State { h, w, b: DVector::zeros(shape.classes()) }
}

/// Columns rescaled to unit norm; zero columns are left as they are.
pub fn unit_columns(m: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = m.clone();
    for mut col in out.column_iter_mut() {
        let n = col.norm();
        if n > 0.0 {
            col /= n;
        }
    }
    out
}

/// Random positive semidefinite `p × p` matrix `G G^T / p`.
pub fn random_psd<R: Rng + ?Sized>(p: usize, rng: &mut R) -> DMatrix<f64> {
    let g = gaussian_matrix(rng, p, p, 1.0);
    let k = &g * g.transpose() / p as f64;
    (&k + k.transpose()) * 0.5
}
