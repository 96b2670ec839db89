//! Discrete gradient-descent simulators and the trace recorder.

mod euler;
mod spherical;

use nalgebra::DMatrix;

pub use euler::{step_anchored, step_ntk, step_regularized, step_unconstrained};
pub use spherical::{
    column_scalars, scalar_spherical_step, spherical_preconditions, spherical_step_factor, step_spherical,
    SphericalPreconditions, SphericalScalars,
};

use crate::error::{Error, Result};
use crate::loss::{batch_loss, nc_metrics, train_accuracy};
use crate::schedule::{Rate, Schedule};
use crate::shape::{HwPair, ProblemShape, State};

/// Norm beyond which a run is stopped and an overflow is recorded.
pub const OVERFLOW_NORM: f64 = 1e150;

#[derive(Debug, Clone, PartialEq)]
pub enum SimKind {
    Unconstrained,
    Regularized { lambda1: f64, lambda2: f64 },
    /// Prototypes fixed; features decay with `lambda`.
    Anchored { lambda: f64 },
    /// Prototypes fixed with zero mean; features take projected steps.
    Spherical { rescale: bool },
    /// Fixed tangent kernel `K` acting on the feature update.
    Ntk { kernel: DMatrix<f64> },
}

/// What the `dist_to_limit` column measures.
#[derive(Debug, Clone, PartialEq)]
pub enum LimitTarget {
    None,
    /// `‖Z/‖Z‖ − L/‖L‖‖` over the `(H, W)` pair.
    Pair(HwPair),
    /// `‖H/‖H‖ − L/‖L‖‖` over the features only.
    Features(DMatrix<f64>),
    /// `(Σ_k ‖ĥ_k − ŵ_{c(k)}‖²)^{1/2}` with column-wise normalization.
    OwnPrototype,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunParams {
    pub dt: f64,
    /// Number of steps.
    pub horizon: usize,
    pub record_stride: usize,
    /// Store a full state every this many steps (also at the last step).
    pub snapshot_stride: Option<usize>,
    pub limit: LimitTarget,
}

impl RunParams {
    pub fn new(dt: f64, horizon: usize, record_stride: usize) -> Self {
        Self { dt, horizon, record_stride, snapshot_stride: None, limit: LimitTarget::None }
    }
}

/// One recorded row. Metrics without a defined value are `NaN`.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub t: f64,
    pub loss: f64,
    pub train_accuracy: f64,
    pub norm_z: f64,
    pub norm_h: f64,
    pub norm_w: f64,
    pub dist_to_limit: f64,
    pub within_class_variability: f64,
    pub self_duality: f64,
    pub etf_deviation: f64,
    pub bias_max_over_min: f64,
}

impl MetricsRow {
    pub const HEADER: [&'static str; 11] = [
        "t",
        "loss",
        "train_accuracy",
        "norm_Z",
        "norm_H",
        "norm_W",
        "dist_to_limit",
        "within_class_variability",
        "self_duality",
        "etf_deviation",
        "bias_max_over_min",
    ];

    pub fn values(&self) -> [f64; 11] {
        [
            self.t,
            self.loss,
            self.train_accuracy,
            self.norm_z,
            self.norm_h,
            self.norm_w,
            self.dist_to_limit,
            self.within_class_variability,
            self.self_duality,
            self.etf_deviation,
            self.bias_max_over_min,
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OverflowEvent {
    pub step: usize,
    pub t: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub times: Vec<f64>,
    pub rows: Vec<MetricsRow>,
    pub snapshots: Vec<(f64, State)>,
    pub overflow: Option<OverflowEvent>,
    pub warnings: Vec<String>,
}

impl Trace {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let idx = MetricsRow::HEADER.iter().position(|&h| h == name)?;
        Some(self.rows.iter().map(|r| r.values()[idx]).collect())
    }

    /// Snapshot stored at (or closest to) time `t`.
    pub fn snapshot_at(&self, t: f64) -> Option<&State> {
        self.snapshots
            .iter()
            .min_by(|a, b| (a.0 - t).abs().total_cmp(&(b.0 - t).abs()))
            .map(|(_, s)| s)
    }
}

pub fn metrics_row(state: &State, shape: &ProblemShape, t: f64, limit: &LimitTarget) -> Result<MetricsRow> {
    let nc = nc_metrics(state, shape)?;
    let norm_h = state.h.norm();
    let norm_w = state.w.norm();
    let dist = match limit {
        LimitTarget::None => f64::NAN,
        LimitTarget::Pair(l) => normalized_distance(&state.pair(), l),
        LimitTarget::Features(l) => {
            let (a, b) = (state.h.norm(), l.norm());
            if a == 0.0 || b == 0.0 {
                f64::NAN
            } else {
                (&state.h / a - l / b).norm()
            }
        }
        LimitTarget::OwnPrototype => own_prototype_distance(&state.h, &state.w, shape),
    };
    let bmax = state.b.max();
    let bmin = state.b.min();
    let bias_ratio = if bmax == bmin { 1.0 } else { bmax / bmin };
    Ok(MetricsRow {
        t,
        loss: batch_loss(state, shape)?,
        train_accuracy: train_accuracy(state, shape)?,
        norm_z: (norm_h * norm_h + norm_w * norm_w).sqrt(),
        norm_h,
        norm_w,
        dist_to_limit: dist,
        within_class_variability: nc.within_class_variability,
        self_duality: nc.self_duality.unwrap_or(f64::NAN),
        etf_deviation: nc.etf_deviation.unwrap_or(f64::NAN),
        bias_max_over_min: bias_ratio,
    })
}

fn normalized_distance(z: &HwPair, l: &HwPair) -> f64 {
    let (a, b) = (z.norm(), l.norm());
    if a == 0.0 || b == 0.0 {
        return f64::NAN;
    }
    ((&z.h / a - &l.h / b).norm_squared() + (&z.w / a - &l.w / b).norm_squared()).sqrt()
}

/// `(Σ_k ‖ĥ_k − ŵ_{c(k)}‖²)^{1/2}`.
pub fn own_prototype_distance(h: &DMatrix<f64>, w: &DMatrix<f64>, shape: &ProblemShape) -> f64 {
    let mut acc = 0.0;
    for (k, hk) in h.column_iter().enumerate() {
        let wc = w.column(shape.label_of(k));
        let (hn, wn) = (hk.norm(), wc.norm());
        if hn == 0.0 || wn == 0.0 {
            return f64::NAN;
        }
        acc += (hk / hn - wc / wn).norm_squared();
    }
    acc.sqrt()
}

fn overflowed(state: &State) -> bool {
    let sq = state.h.norm_squared() + state.w.norm_squared();
    !sq.is_finite() || sq.sqrt() > OVERFLOW_NORM || !state.b.iter().all(|v| v.is_finite())
}

/// Runs a simulator for `params.horizon` steps, recording metrics every
/// `record_stride` steps (and always at the first and last step).
pub fn run(kind: &SimKind, initial: &State, shape: &ProblemShape, schedule: &Schedule, params: &RunParams) -> Result<Trace> {
    shape.check_state(initial)?;
    if !params.dt.is_finite() || params.dt <= 0.0 {
        return Err(Error::InvalidArgument(format!("dt must be finite and > 0, got {}", params.dt)));
    }
    if params.record_stride == 0 {
        return Err(Error::InvalidArgument("record_stride must be at least 1".into()));
    }
    let mut warnings = Vec::new();
    match kind {
        SimKind::Spherical { .. } => {
            let pre = spherical_preconditions(&initial.h, &initial.w, shape, schedule.eta(Rate::Features, 0.0)? * params.dt)?;
            if !pre.rate_bound_holds {
                warnings.push(format!(
                    "initial rate bound violated (ratio {:.4}); monotonicity is not guaranteed",
                    pre.worst_rate_ratio
                ));
            }
        }
        SimKind::Ntk { kernel } => {
            if kernel.nrows() != shape.p() || kernel.ncols() != shape.p() {
                return Err(Error::DimensionMismatch {
                    what: "K",
                    expected: format!("{0}x{0}", shape.p()),
                    got: format!("{}x{}", kernel.nrows(), kernel.ncols()),
                });
            }
        }
        SimKind::Regularized { lambda1, lambda2 } => {
            if *lambda1 < 0.0 || *lambda2 < 0.0 || !lambda1.is_finite() || !lambda2.is_finite() {
                return Err(Error::InvalidArgument("weight decay must be finite and >= 0".into()));
            }
        }
        SimKind::Anchored { lambda } => {
            if *lambda < 0.0 || !lambda.is_finite() {
                return Err(Error::InvalidArgument("feature decay must be finite and >= 0".into()));
            }
        }
        SimKind::Unconstrained => {}
    }

    let mut state = initial.clone();
    let mut trace = Trace { times: Vec::new(), rows: Vec::new(), snapshots: Vec::new(), overflow: None, warnings };
    let mut scratch = DMatrix::zeros(shape.p(), shape.classes());
    let record = |trace: &mut Trace, state: &State, step: usize| -> Result<()> {
        let t = step as f64 * params.dt;
        trace.times.push(t);
        trace.rows.push(metrics_row(state, shape, t, &params.limit)?);
        Ok(())
    };
    let snapshot = |trace: &mut Trace, state: &State, step: usize| {
        if let Some(stride) = params.snapshot_stride {
            if stride > 0 && (step % stride == 0 || step == params.horizon) {
                trace.snapshots.push((step as f64 * params.dt, state.clone()));
            }
        }
    };
    record(&mut trace, &state, 0)?;
    snapshot(&mut trace, &state, 0);

    for step in 0..params.horizon {
        let t = step as f64 * params.dt;
        let dt = params.dt;
        match kind {
            SimKind::Unconstrained => euler::advance_regularized(&mut state, &mut scratch, shape, schedule, 0.0, 0.0, t, dt)?,
            SimKind::Regularized { lambda1, lambda2 } => {
                euler::advance_regularized(&mut state, &mut scratch, shape, schedule, *lambda1, *lambda2, t, dt)?
            }
            SimKind::Anchored { lambda } => euler::advance_anchored(&mut state.h, &state.w, shape, schedule, *lambda, t, dt)?,
            SimKind::Spherical { rescale } => {
                let eta = dt * schedule.eta(Rate::Features, t)?;
                spherical::advance_spherical(&mut state.h, &state.w, shape, eta, *rescale)?
            }
            SimKind::Ntk { kernel } => euler::advance_ntk(&mut state, kernel, shape, schedule, t, dt)?,
        }
        let done = step + 1;
        if overflowed(&state) {
            trace.overflow = Some(OverflowEvent { step: done, t: done as f64 * dt });
            break;
        }
        if done % params.record_stride == 0 || done == params.horizon {
            record(&mut trace, &state, done)?;
        }
        snapshot(&mut trace, &state, done);
    }
    Ok(trace)
}
