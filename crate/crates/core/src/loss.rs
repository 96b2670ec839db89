//! The unhinged loss, its batch form and gradients, the prediction rule and
//! neural-collapse diagnostics.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::shape::{class_sums, column_sum, ProblemShape, State};

/// Per-sample unhinged loss `−w_y·h − b_y + γ Σ_{j≠y} (w_j·h + b_j)`.
/// Class indices are zero-based.
pub fn unhinged_loss(w: &DMatrix<f64>, b: &DVector<f64>, h: &DVector<f64>, y: usize, gamma: f64) -> Result<f64> {
    let c = w.ncols();
    if b.len() != c {
        return Err(Error::DimensionMismatch { what: "b", expected: c.to_string(), got: b.len().to_string() });
    }
    if h.len() != w.nrows() {
        return Err(Error::DimensionMismatch { what: "h", expected: w.nrows().to_string(), got: h.len().to_string() });
    }
    if y >= c {
        return Err(Error::InvalidArgument(format!("label {y} out of range for {c} classes")));
    }
    let logits = w.tr_mul(h) + b;
    let others: f64 = logits.iter().enumerate().filter(|&(j, _)| j != y).map(|(_, v)| v).sum();
    Ok(-logits[y] + gamma * others)
}

/// Mean unhinged loss over all `CN` samples, `Tr(Y^T W^T H) + ((γC−γ−1)/C) 1^T b`.
pub fn batch_loss(state: &State, shape: &ProblemShape) -> Result<f64> {
    shape.check_state(state)?;
    Ok(-coupling_inner(&state.h, &state.w, shape) + shape.bias_loss_coefficient() * state.b.sum())
}

/// `⟨H, W M⟩` evaluated through class sums.
pub(crate) fn coupling_inner(h: &DMatrix<f64>, w: &DMatrix<f64>, shape: &ProblemShape) -> f64 {
    let g = shape.gamma();
    let sums = class_sums(h, shape);
    let own = w.dot(&sums);
    let cross = column_sum(w).dot(&column_sum(h));
    ((1.0 + g) * own - g * cross) / shape.samples() as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub h: DMatrix<f64>,
    pub w: DMatrix<f64>,
    pub b: DVector<f64>,
}

/// Gradients of [`batch_loss`]: `(W Y, H Y^T, ((γC−γ−1)/C) 1)`.
pub fn gradients(state: &State, shape: &ProblemShape) -> Result<Gradients> {
    shape.check_state(state)?;
    let mut gh = DMatrix::zeros(shape.p(), shape.samples());
    crate::shape::add_times_m(&mut gh, &state.w, -1.0, shape);
    let mut gw = DMatrix::zeros(shape.p(), shape.classes());
    crate::shape::add_times_mt(&mut gw, &state.h, -1.0, shape);
    let gb = DVector::from_element(shape.classes(), shape.bias_loss_coefficient());
    Ok(Gradients { h: gh, w: gw, b: gb })
}

/// Fraction of samples whose largest logit `w_c·h + b_c` is their own class.
/// Ties go to the smallest class index.
pub fn train_accuracy(state: &State, shape: &ProblemShape) -> Result<f64> {
    shape.check_state(state)?;
    let logits = state.w.transpose() * &state.h;
    let mut correct = 0usize;
    for (k, col) in logits.column_iter().enumerate() {
        let mut best = 0;
        let mut best_val = col[0] + state.b[0];
        for c in 1..shape.classes() {
            let v = col[c] + state.b[c];
            if v > best_val {
                best = c;
                best_val = v;
            }
        }
        if best == shape.label_of(k) {
            correct += 1;
        }
    }
    Ok(correct as f64 / shape.samples() as f64)
}

/// Neural-collapse diagnostics. `None` marks a degenerate value caused by a
/// zero-norm class mean or prototype.
#[derive(Debug, Clone, PartialEq)]
pub struct NcReport {
    pub within_class_variability: f64,
    pub self_duality: Option<f64>,
    pub etf_deviation: Option<f64>,
    pub norm_spread: Option<f64>,
}

impl NcReport {
    pub fn is_degenerate(&self) -> bool {
        self.self_duality.is_none() || self.etf_deviation.is_none() || self.norm_spread.is_none()
    }
}

pub fn nc_metrics(state: &State, shape: &ProblemShape) -> Result<NcReport> {
    shape.check_state(state)?;
    let n = shape.per_class();
    let means = class_sums(&state.h, shape) / n as f64;

    let mut spread = 0.0;
    for (k, col) in state.h.column_iter().enumerate() {
        spread += col.iter().zip(means.column(shape.label_of(k)).iter()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
    }
    let energy = state.h.norm_squared();
    let within_class_variability = if energy > 0.0 { spread / energy } else { 0.0 };

    let proto_norms: Vec<f64> = state.w.column_iter().map(|c| c.norm()).collect();
    let mut self_duality = Some(0.0);
    for c in 0..shape.classes() {
        let mn = means.column(c).norm();
        if mn == 0.0 || proto_norms[c] == 0.0 {
            self_duality = None;
            break;
        }
        if let Some(acc) = self_duality.as_mut() {
            *acc += means.column(c).dot(&state.w.column(c)) / (mn * proto_norms[c]);
        }
    }
    let self_duality = self_duality.map(|s| s / shape.classes() as f64);

    let has_zero = proto_norms.iter().any(|&v| v == 0.0);
    let (etf_deviation, norm_spread) = if has_zero {
        (None, None)
    } else {
        let c = shape.classes() as f64;
        let mut normalized = state.w.clone();
        for (j, mut col) in normalized.column_iter_mut().enumerate() {
            col /= proto_norms[j];
        }
        let gram = normalized.transpose() * &normalized;
        let target = DMatrix::from_fn(shape.classes(), shape.classes(), |i, j| {
            if i == j {
                1.0
            } else {
                -1.0 / (c - 1.0)
            }
        });
        let max = proto_norms.iter().cloned().fold(f64::MIN, f64::max);
        let min = proto_norms.iter().cloned().fold(f64::MAX, f64::min);
        (Some((gram - target).norm()), Some(max / min))
    };

    Ok(NcReport { within_class_variability, self_duality, etf_deviation, norm_spread })
}

/// Global lower bound `−(1+γ) E1 E2` of the mean loss under the norm balls
/// `‖w_c‖ ≤ E1`, `‖h‖ ≤ E2`.
pub fn lemma1_bound(e1: f64, e2: f64, gamma: f64) -> f64 {
    -(1.0 + gamma) * e1 * e2
}

/// `C` prototypes of norm `scale` with pairwise cosine `−1/(C−1)`, placed in
/// the first `C−1` coordinates via a Helmert basis. Requires `p ≥ C−1`.
pub fn simplex_etf(p: usize, classes: usize, scale: f64) -> Result<DMatrix<f64>> {
    if classes < 2 || p + 1 < classes {
        return Err(Error::InvalidArgument(format!("simplex ETF needs p >= C-1 (p = {p}, C = {classes})")));
    }
    let basis = helmert(classes);
    let factor = scale * (classes as f64 / (classes as f64 - 1.0)).sqrt();
    let mut w = DMatrix::zeros(p, classes);
    for r in 0..classes - 1 {
        for c in 0..classes {
            w[(r, c)] = factor * basis[(c, r)];
        }
    }
    Ok(w)
}

/// Orthonormal basis of `1^⊥ ⊂ R^m` as the columns of an `m × (m−1)` matrix.
pub fn helmert(m: usize) -> DMatrix<f64> {
    let mut u = DMatrix::zeros(m, m.saturating_sub(1));
    for j in 0..m.saturating_sub(1) {
        let k = (j + 1) as f64;
        let norm = (k * (k + 1.0)).sqrt();
        for i in 0..=j {
            u[(i, j)] = 1.0 / norm;
        }
        u[(j + 1, j)] = -k / norm;
    }
    u
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shape::expand_classes;
    use approx::assert_abs_diff_eq;

    fn shape(p: usize, c: usize, n: usize, g: f64) -> ProblemShape {
        ProblemShape::new(p, c, n, g).unwrap()
    }

    #[test]
    fn per_sample_examples() {
        let w = DMatrix::from_row_slice(1, 2, &[1.0, -1.0]);
        let h = DVector::from_element(1, 1.0);
        assert_eq!(unhinged_loss(&w, &DVector::zeros(2), &h, 0, 1.0).unwrap(), -2.0);
        let w0 = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        let orth = DVector::from_vec(vec![0.0, 1.0]);
        assert_eq!(unhinged_loss(&w0, &DVector::zeros(2), &orth, 1, 0.7).unwrap(), 0.0);
        let b = DVector::from_vec(vec![1.0, 2.0]);
        assert_eq!(unhinged_loss(&DMatrix::zeros(1, 2), &b, &DVector::zeros(1), 0, 0.5).unwrap(), 0.0);
        assert!(unhinged_loss(&w, &DVector::zeros(2), &h, 2, 1.0).is_err());
    }

    #[test]
    fn batch_loss_examples() {
        let s = shape(1, 2, 1, 1.0);
        let st = State::new(
            DMatrix::from_row_slice(1, 2, &[1.0, -1.0]),
            DMatrix::from_row_slice(1, 2, &[1.0, -1.0]),
            DVector::zeros(2),
            &s,
        )
        .unwrap();
        assert_abs_diff_eq!(batch_loss(&st, &s).unwrap(), -2.0, epsilon = 1e-15);
        let zero = State::new(DMatrix::zeros(1, 2), st.w.clone(), DVector::zeros(2), &s).unwrap();
        assert_eq!(batch_loss(&zero, &s).unwrap(), 0.0);
    }

    #[test]
    fn gradient_examples() {
        let s = shape(1, 2, 1, 1.0);
        let st = State::new(DMatrix::zeros(1, 2), DMatrix::from_row_slice(1, 2, &[1.0, -1.0]), DVector::zeros(2), &s)
            .unwrap();
        let g = gradients(&st, &s).unwrap();
        assert_abs_diff_eq!(g.h, DMatrix::from_row_slice(1, 2, &[-1.0, 1.0]), epsilon = 1e-15);
        let balanced = shape(2, 4, 2, 1.0 / 3.0);
        let st = State::new(DMatrix::zeros(2, 8), DMatrix::zeros(2, 4), DVector::zeros(4), &balanced).unwrap();
        assert!(gradients(&st, &balanced).unwrap().b.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn accuracy_examples() {
        let s = shape(2, 2, 3, 0.5);
        let w = DMatrix::from_row_slice(2, 2, &[1.0, -1.0, 0.5, -0.5]);
        let own = State::new(expand_classes(&w, &s), w.clone(), DVector::zeros(2), &s).unwrap();
        assert_eq!(train_accuracy(&own, &s).unwrap(), 1.0);
        let flipped = State::new(-expand_classes(&w, &s), w.clone(), DVector::zeros(2), &s).unwrap();
        assert_eq!(train_accuracy(&flipped, &s).unwrap(), 0.0);
        let s5 = shape(3, 5, 2, 0.5);
        let zero = State::new(DMatrix::zeros(3, 10), DMatrix::zeros(3, 5), DVector::zeros(5), &s5).unwrap();
        assert_abs_diff_eq!(train_accuracy(&zero, &s5).unwrap(), 0.2);
    }

    #[test]
    fn etf_is_exact_and_collapsed_features_score_perfectly() {
        let s = shape(6, 4, 3, 0.2);
        let w = simplex_etf(6, 4, 2.0).unwrap();
        let st = State::new(expand_classes(&w, &s) * 0.3, w, DVector::zeros(4), &s).unwrap();
        let r = nc_metrics(&st, &s).unwrap();
        assert!(r.etf_deviation.unwrap() < 1e-14);
        assert!(r.within_class_variability < 1e-28);
        assert_abs_diff_eq!(r.self_duality.unwrap(), 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(r.norm_spread.unwrap(), 1.0, epsilon = 1e-14);
        assert!(simplex_etf(2, 4, 1.0).is_err());
        assert!(simplex_etf(3, 4, 1.0).is_ok());
    }

    #[test]
    fn zero_prototype_is_flagged() {
        let s = shape(2, 3, 1, 0.5);
        let st = State::new(DMatrix::from_element(2, 3, 1.0), DMatrix::zeros(2, 3), DVector::zeros(3), &s).unwrap();
        let r = nc_metrics(&st, &s).unwrap();
        assert!(r.is_degenerate());
        assert!(r.within_class_variability.is_finite());
    }

    #[test]
    fn bound_formula() {
        assert_eq!(lemma1_bound(1.0, 1.0, 0.5), -1.5);
    }
}
