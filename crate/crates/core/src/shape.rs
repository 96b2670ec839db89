//! Problem dimensions, the state triple and the coupling matrix.
//!
//! Feature columns are stored class-major: column `c * N + i` holds sample `i`
//! of class `c`, so the label pattern is exactly `I_C ⊗ 1_N^T`. Use
//! [`State::from_sample_major`] to import the interleaved listing
//! `h_{1,1}, …, h_{1,C}, h_{2,1}, …` where the class index varies fastest.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProblemShape {
    p: usize,
    classes: usize,
    per_class: usize,
    gamma: f64,
}

impl ProblemShape {
    /// `gamma = 0` is accepted so that sweeps can include the no-penalty
    /// baseline; negative or non-finite values are rejected.
    pub fn new(p: usize, classes: usize, per_class: usize, gamma: f64) -> Result<Self> {
        if p == 0 {
            return Err(Error::InvalidShape("p must be at least 1".into()));
        }
        if classes < 2 {
            return Err(Error::InvalidShape("C must be at least 2".into()));
        }
        if per_class == 0 {
            return Err(Error::InvalidShape("N must be at least 1".into()));
        }
        if !gamma.is_finite() || gamma < 0.0 {
            return Err(Error::InvalidShape(format!("gamma must be finite and >= 0, got {gamma}")));
        }
        Ok(Self { p, classes, per_class, gamma })
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn per_class(&self) -> usize {
        self.per_class
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Total number of samples `C·N`.
    pub fn samples(&self) -> usize {
        self.classes * self.per_class
    }

    pub fn label_of(&self, column: usize) -> usize {
        column / self.per_class
    }

    /// `1 + γ − γC`, snapped to exactly zero when γ equals `1/(C−1)` up to
    /// rounding so that the balanced setting keeps the bias bit-for-bit fixed.
    pub fn balance(&self) -> f64 {
        let c = self.classes as f64;
        let v = 1.0 - self.gamma * (c - 1.0);
        if v.abs() <= 8.0 * f64::EPSILON * (1.0 + self.gamma * c) {
            0.0
        } else {
            v
        }
    }

    /// Per-class bias velocity `(1 + γ − γC)/C`.
    pub fn bias_drift(&self) -> f64 {
        self.balance() / self.classes as f64
    }

    /// Loss coefficient on `1^T b`, i.e. `(γC − γ − 1)/C`.
    pub fn bias_loss_coefficient(&self) -> f64 {
        -self.bias_drift()
    }

    pub fn sigma1(&self) -> f64 {
        (1.0 + self.gamma) / (self.classes as f64 * (self.per_class as f64).sqrt())
    }

    pub fn sigma2(&self) -> f64 {
        self.balance() / (self.classes as f64 * (self.per_class as f64).sqrt())
    }

    /// Weight-decay threshold `(1+γ)/(C√N)` separating growth from collapse.
    pub fn lambda_star(&self) -> f64 {
        self.sigma1()
    }

    /// Whether the E1 subspaces dominate the E2 subspaces in growth rate,
    /// i.e. `0 < γ < 2/(C−2)` or `C = 2`.
    pub fn e1_dominated(&self) -> bool {
        if self.classes == 2 {
            return true;
        }
        self.gamma > 0.0 && self.gamma < 2.0 / (self.classes as f64 - 2.0)
    }

    pub fn check_features(&self, h: &DMatrix<f64>) -> Result<()> {
        check_dims("H", h, self.p, self.samples())
    }

    pub fn check_prototypes(&self, w: &DMatrix<f64>) -> Result<()> {
        check_dims("W", w, self.p, self.classes)
    }

    pub fn check_pair(&self, z: &HwPair) -> Result<()> {
        self.check_features(&z.h)?;
        self.check_prototypes(&z.w)
    }

    pub fn check_state(&self, state: &State) -> Result<()> {
        self.check_features(&state.h)?;
        self.check_prototypes(&state.w)?;
        if state.b.len() != self.classes {
            return Err(Error::DimensionMismatch {
                what: "b",
                expected: self.classes.to_string(),
                got: state.b.len().to_string(),
            });
        }
        Ok(())
    }
}

fn check_dims(what: &'static str, m: &DMatrix<f64>, rows: usize, cols: usize) -> Result<()> {
    if m.nrows() != rows || m.ncols() != cols {
        return Err(Error::DimensionMismatch {
            what,
            expected: format!("{rows}x{cols}"),
            got: format!("{}x{}", m.nrows(), m.ncols()),
        });
    }
    Ok(())
}

pub(crate) fn ensure_finite(what: &'static str, m: &DMatrix<f64>) -> Result<()> {
    if m.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}

/// The `(H, W)` part of a state; the space on which the coupling operator acts.
#[derive(Debug, Clone, PartialEq)]
pub struct HwPair {
    pub h: DMatrix<f64>,
    pub w: DMatrix<f64>,
}

impl HwPair {
    pub fn new(h: DMatrix<f64>, w: DMatrix<f64>) -> Self {
        Self { h, w }
    }

    pub fn zeros(shape: &ProblemShape) -> Self {
        Self {
            h: DMatrix::zeros(shape.p(), shape.samples()),
            w: DMatrix::zeros(shape.p(), shape.classes()),
        }
    }

    pub fn dot(&self, other: &HwPair) -> f64 {
        self.h.dot(&other.h) + self.w.dot(&other.w)
    }

    pub fn norm_squared(&self) -> f64 {
        self.h.norm_squared() + self.w.norm_squared()
    }

    pub fn norm(&self) -> f64 {
        self.norm_squared().sqrt()
    }

    pub fn scaled(&self, factor: f64) -> HwPair {
        HwPair { h: &self.h * factor, w: &self.w * factor }
    }

    /// Scale the feature and prototype blocks independently.
    pub fn scaled_blocks(&self, h_factor: f64, w_factor: f64) -> HwPair {
        HwPair { h: &self.h * h_factor, w: &self.w * w_factor }
    }

    pub fn add(&self, other: &HwPair) -> HwPair {
        HwPair { h: &self.h + &other.h, w: &self.w + &other.w }
    }

    pub fn sub(&self, other: &HwPair) -> HwPair {
        HwPair { h: &self.h - &other.h, w: &self.w - &other.w }
    }

    /// `H += a·dh`, `W += b·dw`.
    pub fn axpy_blocks(&mut self, h_factor: f64, w_factor: f64, dh: &DMatrix<f64>, dw: &DMatrix<f64>) {
        self.h.zip_apply(dh, |x, d| *x += h_factor * d);
        self.w.zip_apply(dw, |x, d| *x += w_factor * d);
    }

    pub fn is_finite(&self) -> bool {
        self.h.iter().chain(self.w.iter()).all(|x| x.is_finite())
    }
}

/// The triple `Z = (H, W, b)`.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub h: DMatrix<f64>,
    pub w: DMatrix<f64>,
    pub b: DVector<f64>,
}

impl State {
    /// Builds a state from class-major features, validating dimensions and finiteness.
    pub fn new(h: DMatrix<f64>, w: DMatrix<f64>, b: DVector<f64>, shape: &ProblemShape) -> Result<Self> {
        let state = Self { h, w, b };
        shape.check_state(&state)?;
        ensure_finite("H", &state.h)?;
        ensure_finite("W", &state.w)?;
        if !state.b.iter().all(|x| x.is_finite()) {
            return Err(Error::NonFinite("b"));
        }
        Ok(state)
    }

    /// Builds a state from features listed sample-major (class index fastest).
    pub fn from_sample_major(
        h_listed: DMatrix<f64>,
        w: DMatrix<f64>,
        b: DVector<f64>,
        shape: &ProblemShape,
    ) -> Result<Self> {
        shape.check_features(&h_listed)?;
        let (c, n) = (shape.classes(), shape.per_class());
        let h = DMatrix::from_fn(h_listed.nrows(), c * n, |r, k| {
            let (class, i) = (k / n, k % n);
            h_listed[(r, i * c + class)]
        });
        Self::new(h, w, b, shape)
    }

    /// Features reordered to the sample-major listing.
    pub fn features_sample_major(&self, shape: &ProblemShape) -> DMatrix<f64> {
        let (c, n) = (shape.classes(), shape.per_class());
        DMatrix::from_fn(self.h.nrows(), c * n, |r, j| {
            let (i, class) = (j / c, j % c);
            self.h[(r, class * n + i)]
        })
    }

    pub fn pair(&self) -> HwPair {
        HwPair { h: self.h.clone(), w: self.w.clone() }
    }

    pub fn from_pair(z: HwPair, b: DVector<f64>) -> Self {
        Self { h: z.h, w: z.w, b }
    }
}

/// Dense coupling matrix `M` and `Y = −M`. The solvers use the structured
/// products [`times_m`] and [`times_mt`] instead; this is kept for checks
/// and small problems.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingMatrix {
    pub m: DMatrix<f64>,
    pub y: DMatrix<f64>,
}

pub fn build_coupling(shape: &ProblemShape) -> CouplingMatrix {
    let (c, n) = (shape.classes(), shape.per_class());
    let cn = (c * n) as f64;
    let g = shape.gamma();
    let m = DMatrix::from_fn(c, c * n, |row, k| {
        let own = if k / n == row { 1.0 + g } else { 0.0 };
        (own - g) / cn
    });
    let y = -&m;
    CouplingMatrix { m, y }
}

/// Column sums `W · 1_C` or `H · 1_CN`.
pub(crate) fn column_sum(m: &DMatrix<f64>) -> DVector<f64> {
    let mut s = DVector::zeros(m.nrows());
    add_columns(s.as_mut_slice(), m.as_slice(), m.nrows(), 1.0);
    s
}

/// `dst += factor · Σ` of the consecutive length-`rows` columns stored in `src`.
fn add_columns(dst: &mut [f64], src: &[f64], rows: usize, factor: f64) {
    if rows == 0 {
        return;
    }
    for col in src.chunks_exact(rows) {
        for (d, v) in dst.iter_mut().zip(col) {
            *d += factor * v;
        }
    }
}

/// Per-class feature sums `H (I_C ⊗ 1_N)`, a `p × C` matrix.
pub fn class_sums(h: &DMatrix<f64>, shape: &ProblemShape) -> DMatrix<f64> {
    let rows = h.nrows();
    let block = rows * shape.per_class();
    let mut out = DMatrix::zeros(rows, shape.classes());
    if rows == 0 {
        return out;
    }
    for (dst, src) in out.as_mut_slice().chunks_exact_mut(rows).zip(h.as_slice().chunks_exact(block)) {
        add_columns(dst, src, rows, 1.0);
    }
    out
}

/// Repeats each prototype column `N` times: `W (I_C ⊗ 1_N^T)`.
pub fn expand_classes(w: &DMatrix<f64>, shape: &ProblemShape) -> DMatrix<f64> {
    let n = shape.per_class();
    DMatrix::from_fn(w.nrows(), w.ncols() * n, |r, k| w[(r, k / n)])
}

/// `dst += coef · W M` without forming `M`.
pub fn add_times_m(dst: &mut DMatrix<f64>, w: &DMatrix<f64>, coef: f64, shape: &ProblemShape) {
    scale_add_times_m(dst, 1.0, w, coef, shape);
}

/// `dst ← keep · dst + coef · W M` in a single pass over `dst`.
pub(crate) fn scale_add_times_m(dst: &mut DMatrix<f64>, keep: f64, w: &DMatrix<f64>, coef: f64, shape: &ProblemShape) {
    let rows = w.nrows();
    if rows == 0 {
        return;
    }
    let g = shape.gamma();
    let scale = coef / shape.samples() as f64;
    let total = column_sum(w) * (g * scale);
    let own = (1.0 + g) * scale;
    let mut class_col = vec![0.0; rows];
    let block = rows * shape.per_class();
    for (src, dst_block) in w.as_slice().chunks_exact(rows).zip(dst.as_mut_slice().chunks_exact_mut(block)) {
        for ((c, s), t) in class_col.iter_mut().zip(src).zip(total.iter()) {
            *c = own * s - t;
        }
        for dst_col in dst_block.chunks_exact_mut(rows) {
            if keep == 1.0 {
                for (d, c) in dst_col.iter_mut().zip(&class_col) {
                    *d += c;
                }
            } else {
                for (d, c) in dst_col.iter_mut().zip(&class_col) {
                    *d = keep * *d + c;
                }
            }
        }
    }
}

/// `dst += coef · H M^T` without forming `M`.
pub fn add_times_mt(dst: &mut DMatrix<f64>, h: &DMatrix<f64>, coef: f64, shape: &ProblemShape) {
    let rows = h.nrows();
    if rows == 0 {
        return;
    }
    let g = shape.gamma();
    let scale = coef / shape.samples() as f64;
    let sums = class_sums(h, shape);
    let total = column_sum(&sums) * (g * scale);
    let own = (1.0 + g) * scale;
    for (dst_col, src) in dst.as_mut_slice().chunks_exact_mut(rows).zip(sums.as_slice().chunks_exact(rows)) {
        for ((d, s), t) in dst_col.iter_mut().zip(src).zip(total.iter()) {
            *d += own * s - t;
        }
    }
}

pub fn times_m(w: &DMatrix<f64>, shape: &ProblemShape) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(w.nrows(), shape.samples());
    add_times_m(&mut out, w, 1.0, shape);
    out
}

pub fn times_mt(h: &DMatrix<f64>, shape: &ProblemShape) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(h.nrows(), shape.classes());
    add_times_mt(&mut out, h, 1.0, shape);
    out
}
