//! The five mutually orthogonal eigenspaces of the coupling operator
//! `B = [[0, M^T], [M, 0]]`, acting on pairs as `(H, W) ↦ (W M, H M^T)`.
//!
//! Components are assembled structurally (build the `p × C` block or the
//! shared vector first, then expand) so membership holds exactly.

use nalgebra::{DMatrix, DVector};

use crate::error::Result;
use crate::shape::{add_times_m, add_times_mt, class_sums, column_sum, expand_classes, HwPair, ProblemShape};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Subspace {
    E1Plus,
    E1Minus,
    E2Plus,
    E2Minus,
    E3,
}

impl Subspace {
    pub const ALL: [Subspace; 5] = [Subspace::E1Plus, Subspace::E1Minus, Subspace::E2Plus, Subspace::E2Minus, Subspace::E3];

    pub fn index(self) -> usize {
        match self {
            Subspace::E1Plus => 0,
            Subspace::E1Minus => 1,
            Subspace::E2Plus => 2,
            Subspace::E2Minus => 3,
            Subspace::E3 => 4,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Subspace::E1Plus => "E1+",
            Subspace::E1Minus => "E1-",
            Subspace::E2Plus => "E2+",
            Subspace::E2Minus => "E2-",
            Subspace::E3 => "E3",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Component {
    pub h: DMatrix<f64>,
    pub w: DMatrix<f64>,
    pub subspace: Subspace,
    pub eigenvalue: f64,
}

impl Component {
    pub fn pair(&self) -> HwPair {
        HwPair::new(self.h.clone(), self.w.clone())
    }

    pub fn norm_squared(&self) -> f64 {
        self.h.norm_squared() + self.w.norm_squared()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    pub components: [Component; 5],
}

impl Decomposition {
    pub fn get(&self, tag: Subspace) -> &Component {
        &self.components[tag.index()]
    }

    /// Sum of all five components.
    pub fn reconstruct(&self) -> HwPair {
        let first = &self.components[0];
        let mut z = first.pair();
        for c in &self.components[1..] {
            z.h += &c.h;
            z.w += &c.w;
        }
        z
    }
}

pub fn eigenvalue_of(tag: Subspace, shape: &ProblemShape) -> f64 {
    match tag {
        Subspace::E1Plus => shape.sigma1(),
        Subspace::E1Minus => -shape.sigma1(),
        Subspace::E2Plus => shape.sigma2(),
        Subspace::E2Minus => -shape.sigma2(),
        Subspace::E3 => 0.0,
    }
}

pub fn project_e1(z: &HwPair, shape: &ProblemShape, sign: Sign) -> Result<Component> {
    shape.check_pair(z)?;
    let eps = sign.value();
    let root_n = (shape.per_class() as f64).sqrt();
    let mut block = class_sums(&z.h, shape) * (eps / root_n) + &z.w;
    block *= 0.5;
    center_rows(&mut block);
    let h = expand_classes(&block, shape) * (eps / root_n);
    let subspace = if sign == Sign::Plus { Subspace::E1Plus } else { Subspace::E1Minus };
    Ok(Component { h, w: block, subspace, eigenvalue: eigenvalue_of(subspace, shape) })
}

pub fn project_e2(z: &HwPair, shape: &ProblemShape, sign: Sign) -> Result<Component> {
    shape.check_pair(z)?;
    let eps = sign.value();
    let root_n = (shape.per_class() as f64).sqrt();
    let c = shape.classes() as f64;
    let shared: DVector<f64> = (column_sum(&z.h) * (eps / root_n) + column_sum(&z.w)) / (2.0 * c);
    let w = DMatrix::from_fn(shape.p(), shape.classes(), |r, _| shared[r]);
    let h = DMatrix::from_fn(shape.p(), shape.samples(), |r, _| shared[r] * eps / root_n);
    let subspace = if sign == Sign::Plus { Subspace::E2Plus } else { Subspace::E2Minus };
    Ok(Component { h, w, subspace, eigenvalue: eigenvalue_of(subspace, shape) })
}

pub fn project_e3(z: &HwPair, shape: &ProblemShape) -> Result<Component> {
    shape.check_pair(z)?;
    let means = class_sums(&z.h, shape) / shape.per_class() as f64;
    let h = &z.h - expand_classes(&means, shape);
    Ok(Component { h, w: DMatrix::zeros(shape.p(), shape.classes()), subspace: Subspace::E3, eigenvalue: 0.0 })
}

pub fn project(z: &HwPair, shape: &ProblemShape, tag: Subspace) -> Result<Component> {
    match tag {
        Subspace::E1Plus => project_e1(z, shape, Sign::Plus),
        Subspace::E1Minus => project_e1(z, shape, Sign::Minus),
        Subspace::E2Plus => project_e2(z, shape, Sign::Plus),
        Subspace::E2Minus => project_e2(z, shape, Sign::Minus),
        Subspace::E3 => project_e3(z, shape),
    }
}

pub fn decompose(z: &HwPair, shape: &ProblemShape) -> Result<Decomposition> {
    Ok(Decomposition {
        components: [
            project_e1(z, shape, Sign::Plus)?,
            project_e1(z, shape, Sign::Minus)?,
            project_e2(z, shape, Sign::Plus)?,
            project_e2(z, shape, Sign::Minus)?,
            project_e3(z, shape)?,
        ],
    })
}

/// `(H, W) B = (W M, H M^T)`.
pub fn apply_b(z: &HwPair, shape: &ProblemShape) -> Result<HwPair> {
    shape.check_pair(z)?;
    let mut out = HwPair::zeros(shape);
    add_times_m(&mut out.h, &z.w, 1.0, shape);
    add_times_mt(&mut out.w, &z.h, 1.0, shape);
    Ok(out)
}

/// Right-multiplication by `I − 11^T/C`: subtract each row's mean.
fn center_rows(m: &mut DMatrix<f64>) {
    let cols = m.ncols() as f64;
    for mut row in m.row_iter_mut() {
        let mean = row.sum() / cols;
        row.add_scalar_mut(-mean);
    }
}
