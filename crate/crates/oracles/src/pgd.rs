use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Projected gradient descent on the bias-free mean unhinged loss over
/// `‖w_c‖ ≤ e1`, `‖h_k‖ ≤ e2`, from `restarts` random starts. Returns the
/// smallest loss seen at any iterate of any restart.
#[allow(clippy::too_many_arguments)]
pub fn min_loss_on_balls(
    p: usize,
    labels: &[usize],
    classes: usize,
    gamma: f64,
    e1: f64,
    e2: f64,
    restarts: usize,
    iterations: usize,
    seed: u64,
) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples = labels.len();
    let mut best = f64::INFINITY;
    for _ in 0..restarts {
        let mut w = DMatrix::from_fn(p, classes, |_, _| StandardNormal.sample(&mut rng));
        let mut h = DMatrix::from_fn(p, samples, |_, _| StandardNormal.sample(&mut rng));
        project(&mut w, e1);
        project(&mut h, e2);
        let step = 0.5 * samples as f64;
        for _ in 0..iterations {
            let (loss, gw, gh) = loss_and_grad(&w, &h, labels, gamma);
            best = best.min(loss);
            w -= gw * step;
            h -= gh * step;
            project(&mut w, e1);
            project(&mut h, e2);
        }
        best = best.min(loss_and_grad(&w, &h, labels, gamma).0);
    }
    best
}

fn project(m: &mut DMatrix<f64>, radius: f64) {
    for mut col in m.column_iter_mut() {
        let n = col.norm();
        if n > radius {
            col *= radius / n;
        }
    }
}

fn loss_and_grad(w: &DMatrix<f64>, h: &DMatrix<f64>, labels: &[usize], gamma: f64) -> (f64, DMatrix<f64>, DMatrix<f64>) {
    let n = labels.len() as f64;
    let mut loss = 0.0;
    let mut gw = DMatrix::zeros(w.nrows(), w.ncols());
    let mut gh = DMatrix::zeros(h.nrows(), h.ncols());
    for (k, &y) in labels.iter().enumerate() {
        let x = h.column(k);
        for j in 0..w.ncols() {
            let coef = if j == y { -1.0 } else { gamma };
            loss += coef * w.column(j).dot(&x);
            gw.column_mut(j).axpy(coef / n, &x, 1.0);
            gh.column_mut(k).axpy(coef / n, &w.column(j), 1.0);
        }
    }
    (loss / n, gw, gh)
}
