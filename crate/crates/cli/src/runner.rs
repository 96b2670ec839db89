//! Executes configured experiments and writes their artifacts.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use peel_core::analysis::{classify_growth, compare_closed_form, fit_exponential_rate, NormGrowth, RateFit, Window};
use peel_core::closed_form::{anchored_state, limit_direction, regularized_limit_direction, regularized_state, unconstrained_state, NtkPropagator};
use peel_core::init::{gaussian_matrix, random_psd, random_state, substream, unit_columns};
use peel_core::loss::simplex_etf;
use peel_core::schedule::Rate;
use peel_core::simulate::run;
use peel_core::subspace::decompose;
use peel_core::{HwPair, LimitTarget, MetricsRow, RunParams, SimKind, State, Trace};
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::config::{ExperimentConfig, Member, Regime};
use crate::error::CliError;
use crate::svg::{line_chart, Series};

/// `dist_to_limit` level used for the `time_to_threshold` summary field.
pub const ALIGNMENT_THRESHOLD: f64 = 0.1;

/// Number of evenly spaced snapshots compared against the closed form.
const CLOSED_FORM_SAMPLES: usize = 10;

#[derive(Debug, Clone)]
pub struct MemberOutcome {
    pub member: Member,
    pub csv: PathBuf,
    pub trace: Trace,
    pub decay_fit: Option<RateFit>,
    pub growth: Option<NormGrowth>,
    pub time_to_threshold: Option<f64>,
    pub closed_form_error: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub out_dir: PathBuf,
    pub members: Vec<MemberOutcome>,
    pub summary: Value,
}

pub fn run_experiment(config: &ExperimentConfig, out_dir: Option<&Path>, svg: bool) -> Result<RunReport, CliError> {
    let out = out_dir.map(Path::to_path_buf).unwrap_or_else(|| config.output_dir.clone());
    fs::create_dir_all(&out).map_err(|e| CliError::Io(format!("{}: {e}", out.display())))?;
    let members = config.members()?;
    let outcomes: Vec<MemberOutcome> =
        members.into_par_iter().map(|m| run_member(config, m, &out)).collect::<Result<_, CliError>>()?;

    if svg {
        write_plots(&out, &outcomes)?;
    }
    let summary = summary_json(config, &outcomes);
    let text = serde_json::to_string_pretty(&summary).map_err(|e| CliError::Io(e.to_string()))?;
    write_file(&out.join("summary.json"), &(text + "\n"))?;
    Ok(RunReport { out_dir: out, members: outcomes, summary })
}

/// Initial state, simulator and distance target of one sweep member.
pub fn prepare(config: &ExperimentConfig, member: &Member) -> Result<(State, SimKind, LimitTarget), CliError> {
    let shape = &member.shape;
    let mut rng = substream(config.seed, member.index as u64);
    let s = member.schedule.ratio();
    Ok(match config.regime {
        Regime::Unconstrained => {
            let st = random_state(shape, &mut rng);
            let target = LimitTarget::Pair(limit_direction(&decompose(&st.pair(), shape)?, s));
            (st, SimKind::Unconstrained, target)
        }
        Regime::Regularized => {
            let st = random_state(shape, &mut rng);
            let target = if member.lambda1 == member.lambda2 {
                let d = decompose(&st.pair(), shape)?;
                LimitTarget::Pair(regularized_limit_direction(&d, shape, s, member.lambda1))
            } else {
                LimitTarget::None
            };
            (st, SimKind::Regularized { lambda1: member.lambda1, lambda2: member.lambda2 }, target)
        }
        Regime::Anchored => {
            let st = random_state(shape, &mut rng);
            let target = LimitTarget::Features(peel_core::shape::times_m(&st.w, shape));
            (st, SimKind::Anchored { lambda: member.lambda1 }, target)
        }
        Regime::Spherical => {
            let h = unit_columns(&gaussian_matrix(&mut rng, shape.p(), shape.samples(), 1.0));
            let w = simplex_etf(shape.p(), shape.classes(), 1.0)?;
            let st = State::new(h, w, nalgebra::DVector::zeros(shape.classes()), shape)?;
            (st, SimKind::Spherical { rescale: member.rescale_lr }, LimitTarget::OwnPrototype)
        }
        Regime::Ntk => {
            let st = random_state(shape, &mut rng);
            let kernel = random_psd(shape.p(), &mut rng);
            (st, SimKind::Ntk { kernel }, LimitTarget::None)
        }
    })
}

fn run_member(config: &ExperimentConfig, member: Member, out: &Path) -> Result<MemberOutcome, CliError> {
    let (initial, kind, limit) = prepare(config, &member)?;
    let shape = member.shape;
    let mut params = RunParams::new(config.dt, config.horizon, config.record_stride);
    params.limit = limit;
    if config.closed_form_check {
        params.snapshot_stride = Some((config.horizon / CLOSED_FORM_SAMPLES).max(1));
    }
    let trace = run(&kind, &initial, &shape, &member.schedule, &params)?;

    let closed_form_error = if config.closed_form_check {
        let times: Vec<f64> = trace.snapshots.iter().map(|(t, _)| *t).collect();
        let schedule = &member.schedule;
        let err = match &kind {
            SimKind::Unconstrained | SimKind::Regularized { .. } => {
                let d = decompose(&initial.pair(), &shape)?;
                let (l1, l2) = (member.lambda1, member.lambda2);
                compare_closed_form(&trace, |t| regularized_or_plain(&d, &shape, schedule, l1, l2, t), &times)?
            }
            SimKind::Anchored { lambda } => compare_closed_form(
                &trace,
                |t| Ok(HwPair::new(anchored_state(&initial.h, &initial.w, &shape, schedule, *lambda, t)?, initial.w.clone())),
                &times,
            )?,
            SimKind::Ntk { kernel } => {
                let scaled: DMatrix<f64> = kernel * schedule.ratio();
                let prop = NtkPropagator::new(&initial.h, &initial.w, &scaled, &shape)?;
                compare_closed_form(&trace, |t| prop.at(schedule.zeta(Rate::Prototypes, t)?), &times)?
            }
            SimKind::Spherical { .. } => unreachable!("rejected during validation"),
        };
        Some(err)
    } else {
        None
    };

    let dist = trace.column("dist_to_limit").unwrap_or_default();
    let decay_fit = fit_exponential_rate(&trace.times, &dist, Window::LatterHalf).ok();
    let norms: Vec<f64> = trace.rows.iter().map(|r| r.norm_z).collect();
    let growth = classify_growth(&trace.times, &norms, Window::LatterHalf).ok();
    let time_to_threshold = trace.times.iter().zip(&dist).find(|(_, d)| **d < ALIGNMENT_THRESHOLD).map(|(t, _)| *t);

    let csv = out.join(format!("run_{:03}.csv", member.index));
    write_file(&csv, &csv_text(&trace))?;
    Ok(MemberOutcome { member, csv, trace, decay_fit, growth, time_to_threshold, closed_form_error })
}

fn regularized_or_plain(
    d: &peel_core::Decomposition,
    shape: &peel_core::ProblemShape,
    schedule: &peel_core::Schedule,
    l1: f64,
    l2: f64,
    t: f64,
) -> peel_core::Result<HwPair> {
    if l1 == 0.0 && l2 == 0.0 {
        unconstrained_state(d, shape, schedule, t)
    } else {
        regularized_state(d, shape, schedule, l1, l2, t)
    }
}

pub fn csv_text(trace: &Trace) -> String {
    let mut out = MetricsRow::HEADER.join(",");
    out.push('\n');
    for row in &trace.rows {
        let vals = row.values();
        let _ = write!(out, "{}", vals[0]);
        for v in &vals[1..] {
            let _ = write!(out, ",{v:e}");
        }
        out.push('\n');
    }
    out
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn write_plots(out: &Path, outcomes: &[MemberOutcome]) -> Result<(), CliError> {
    for (column, log_y) in [("dist_to_limit", true), ("norm_Z", true), ("loss", false), ("within_class_variability", true)] {
        let ys: Vec<Vec<f64>> = outcomes.iter().map(|o| o.trace.column(column).unwrap_or_default()).collect();
        let series: Vec<Series<'_>> = outcomes
            .iter()
            .zip(&ys)
            .map(|(o, y)| Series { label: &o.member.label, xs: &o.trace.times, ys: y })
            .collect();
        write_file(&out.join(format!("plot_{column}.svg")), &line_chart(column, column, &series, log_y))?;
    }
    Ok(())
}

fn fit_json(fit: &Option<RateFit>) -> Value {
    match fit {
        Some(f) => json!({ "slope": f.slope, "intercept": f.intercept, "r_squared": f.r_squared, "points": f.points }),
        None => Value::Null,
    }
}

fn summary_json(config: &ExperimentConfig, outcomes: &[MemberOutcome]) -> Value {
    let runs: Vec<Value> = outcomes
        .iter()
        .map(|o| {
            let m = &o.member;
            let last = o.trace.rows.last();
            json!({
                "index": m.index,
                "label": m.label,
                "csv": o.csv.file_name().map(|f| f.to_string_lossy().into_owned()),
                "gamma": m.shape.gamma(),
                "lambda1": m.lambda1,
                "lambda2": m.lambda2,
                "s": m.schedule.ratio(),
                "eta2_at_0": m.schedule.eta(Rate::Prototypes, 0.0).ok(),
                "rescale_lr": m.rescale_lr,
                "lambda_star": m.shape.lambda_star(),
                "e1_dominated": m.shape.e1_dominated(),
                "rows": o.trace.rows.len(),
                "overflow": o.trace.overflow.map(|e| json!({ "step": e.step, "t": e.t })),
                "warnings": o.trace.warnings,
                "dist_decay_fit": fit_json(&o.decay_fit),
                "norm_growth": o.growth.map(|g| json!({
                    "classification": format!("{:?}", g.classification).to_lowercase(),
                    "fit": fit_json(&Some(g.fit)),
                })),
                "time_to_threshold": o.time_to_threshold,
                "final_dist_to_limit": last.map(|r| r.dist_to_limit),
                "final_norm_Z": last.map(|r| r.norm_z),
                "closed_form_max_relative_error": o.closed_form_error,
            })
        })
        .collect();
    json!({
        "regime": config.regime.name(),
        "seed": config.seed,
        "horizon": config.horizon,
        "dt": config.dt,
        "record_stride": config.record_stride,
        "shape": { "p": config.p, "C": config.classes, "N": config.per_class },
        "alignment_threshold": ALIGNMENT_THRESHOLD,
        "runs": runs,
    })
}
