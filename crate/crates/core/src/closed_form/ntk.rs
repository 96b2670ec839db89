use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::sinhc;
use crate::error::{Error, Result};
use crate::loss::helmert;
use crate::shape::{ensure_finite, HwPair, ProblemShape};

/// Solution of `H' = K W M`, `W' = H M^T` (the block system `X' = A X B` with
/// `X = diag(H, W)`, `A = [[0, K], [I_p, 0]]`) at unit learning rate.
///
/// Both factors are diagonalized once: `K` numerically, `B` from its known
/// eigenspaces. Each pair of eigen-directions then evolves under the `2×2`
/// exponential of `μ t [[0, k], [1, 0]]`, which equals the `±√k` spectral form
/// and stays finite at `k = 0`.
#[derive(Debug, Clone)]
pub struct NtkPropagator {
    shape: ProblemShape,
    kernel_values: DVector<f64>,
    kernel_vectors: DMatrix<f64>,
    b_basis: DMatrix<f64>,
    b_values: Vec<f64>,
    top0: DMatrix<f64>,
    bottom0: DMatrix<f64>,
}

impl NtkPropagator {
    pub fn new(h0: &DMatrix<f64>, w0: &DMatrix<f64>, kernel: &DMatrix<f64>, shape: &ProblemShape) -> Result<Self> {
        shape.check_features(h0)?;
        shape.check_prototypes(w0)?;
        let p = shape.p();
        if kernel.nrows() != p || kernel.ncols() != p {
            return Err(Error::DimensionMismatch {
                what: "K",
                expected: format!("{p}x{p}"),
                got: format!("{}x{}", kernel.nrows(), kernel.ncols()),
            });
        }
        ensure_finite("K", kernel)?;
        let asym = (kernel - kernel.transpose()).amax();
        if asym > 1e-12 * kernel.amax().max(1.0) {
            return Err(Error::InvalidArgument(format!("kernel is not symmetric (max asymmetry {asym:e})")));
        }
        let eig = SymmetricEigen::new(kernel.clone());
        if let Some(&worst) = eig.eigenvalues.iter().find(|&&v| v < -1e-10) {
            return Err(Error::NotPsd(worst));
        }
        let kernel_values = eig.eigenvalues.map(|v| v.max(0.0));
        let (b_basis, b_values) = b_eigenbasis(shape);
        let cn = shape.samples();
        let vt = eig.eigenvectors.transpose();
        let top0 = &vt * h0 * b_basis.rows(0, cn);
        let bottom0 = &vt * w0 * b_basis.rows(cn, shape.classes());
        Ok(Self { shape: *shape, kernel_values, kernel_vectors: eig.eigenvectors, b_basis, b_values, top0, bottom0 })
    }

    pub fn at(&self, t: f64) -> Result<HwPair> {
        if t < 0.0 || t.is_nan() {
            return Err(Error::NegativeTime(t));
        }
        let mut top = self.top0.clone();
        let mut bottom = self.bottom0.clone();
        for (j, &mu) in self.b_values.iter().enumerate() {
            for (i, &k) in self.kernel_values.iter().enumerate() {
                let r = k.sqrt();
                let x = mu * t * r;
                let (ch, sh) = (x.cosh(), x.sinh());
                let tau = self.top0[(i, j)];
                let nu = self.bottom0[(i, j)];
                top[(i, j)] = ch * tau + r * sh * nu;
                bottom[(i, j)] = mu * t * sinhc(x) * tau + ch * nu;
            }
        }
        let cn = self.shape.samples();
        let h = &self.kernel_vectors * top * self.b_basis.rows(0, cn).transpose();
        let w = &self.kernel_vectors * bottom * self.b_basis.rows(cn, self.shape.classes()).transpose();
        Ok(HwPair::new(h, w))
    }
}

pub fn ntk_state(
    h0: &DMatrix<f64>,
    w0: &DMatrix<f64>,
    kernel: &DMatrix<f64>,
    shape: &ProblemShape,
    t: f64,
) -> Result<HwPair> {
    NtkPropagator::new(h0, w0, kernel, shape)?.at(t)
}

/// Orthonormal eigenbasis of `B` (columns, in `R^{CN + C}`) assembled from the
/// five eigenspaces, with the matching eigenvalues.
fn b_eigenbasis(shape: &ProblemShape) -> (DMatrix<f64>, Vec<f64>) {
    let (c, n) = (shape.classes(), shape.per_class());
    let cn = c * n;
    let dim = cn + c;
    let root_n = (n as f64).sqrt();
    let mut basis = DMatrix::zeros(dim, dim);
    let mut values = Vec::with_capacity(dim);
    let mut col = 0;

    let mut class_dirs: Vec<(DVector<f64>, f64)> = Vec::with_capacity(c);
    let centered = helmert(c);
    for j in 0..c - 1 {
        class_dirs.push((centered.column(j).into_owned(), shape.sigma1()));
    }
    class_dirs.push((DVector::from_element(c, 1.0 / (c as f64).sqrt()), shape.sigma2()));

    for (q, sigma) in &class_dirs {
        for eps in [1.0, -1.0] {
            for k in 0..cn {
                basis[(k, col)] = eps / root_n * q[k / n] / 2f64.sqrt();
            }
            for m in 0..c {
                basis[(cn + m, col)] = q[m] / 2f64.sqrt();
            }
            values.push(eps * sigma);
            col += 1;
        }
    }

    let within = helmert(n);
    for class in 0..c {
        for j in 0..n - 1 {
            for i in 0..n {
                basis[(class * n + i, col)] = within[(i, j)];
            }
            values.push(0.0);
            col += 1;
        }
    }
    debug_assert_eq!(col, dim);
    (basis, values)
}
