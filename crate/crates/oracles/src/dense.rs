use nalgebra::{DMatrix, DVector};

pub fn kron(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    DMatrix::from_fn(ar * br, ac * bc, |i, j| a[(i / br, j / bc)] * b[(i % br, j % bc)])
}

/// `M = (1/CN)((1+γ)(I_C ⊗ 1_N^T) − γ 1_C 1_CN^T)` assembled literally.
pub fn coupling(classes: usize, per_class: usize, gamma: f64) -> DMatrix<f64> {
    let cn = (classes * per_class) as f64;
    let block = kron(&DMatrix::identity(classes, classes), &DMatrix::from_element(1, per_class, 1.0));
    let ones = DMatrix::from_element(classes, classes * per_class, 1.0);
    (block * (1.0 + gamma) - ones * gamma) / cn
}

/// Mean of `−w_y·h − b_y + γ Σ_{j≠y}(w_j·h + b_j)` over the columns of `H`,
/// column `k` carrying label `labels[k]`.
pub fn mean_sample_loss(w: &DMatrix<f64>, b: &DVector<f64>, h: &DMatrix<f64>, labels: &[usize], gamma: f64) -> f64 {
    let mut total = 0.0;
    for (k, &y) in labels.iter().enumerate() {
        let x = h.column(k);
        for j in 0..w.ncols() {
            let logit = w.column(j).dot(&x) + b[j];
            total += if j == y { -logit } else { gamma * logit };
        }
    }
    total / labels.len() as f64
}

/// Class-major labels `k / N`.
pub fn class_major_labels(classes: usize, per_class: usize) -> Vec<usize> {
    (0..classes * per_class).map(|k| k / per_class).collect()
}

/// `exp(A)` by scaling and squaring with a truncated Taylor series.
pub fn expm(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let norm = a.abs().row_sum().max();
    let mut squarings = 0u32;
    let mut scale = 1.0;
    while norm * scale > 0.125 {
        scale *= 0.5;
        squarings += 1;
    }
    let x = a * scale;
    let mut term = DMatrix::<f64>::identity(n, n);
    let mut sum = term.clone();
    for k in 1..=24 {
        term = &term * &x / k as f64;
        sum += &term;
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    sum
}
