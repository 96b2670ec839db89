//! Experiment configuration: a TOML document with the sections
//! `[experiment]`, `[shape]`, `[schedule]` and `[sweep]`. Unknown sections
//! and keys are rejected.

use std::path::PathBuf;

use peel_core::{ProblemShape, RateProfile, Schedule};
use toml::{Table, Value};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    Unconstrained,
    Regularized,
    Anchored,
    Spherical,
    Ntk,
}

impl Regime {
    pub fn name(self) -> &'static str {
        match self {
            Regime::Unconstrained => "unconstrained",
            Regime::Regularized => "regularized",
            Regime::Anchored => "anchored",
            Regime::Spherical => "spherical",
            Regime::Ntk => "ntk",
        }
    }
}

/// A trade-off value, possibly tied to the class count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GammaSpec {
    Value(f64),
    /// `1/(C−1)`.
    Balanced,
}

impl GammaSpec {
    pub fn resolve(self, classes: usize) -> f64 {
        match self {
            GammaSpec::Value(v) => v,
            GammaSpec::Balanced => 1.0 / (classes as f64 - 1.0),
        }
    }
}

/// A decay coefficient, possibly tied to the threshold `(1+γ)/(C√N)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DecaySpec {
    Value(f64),
    Star,
}

impl DecaySpec {
    pub fn resolve(self, shape: &ProblemShape) -> f64 {
        match self {
            DecaySpec::Value(v) => v,
            DecaySpec::Star => shape.lambda_star(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ScheduleKind {
    Constant,
    CosineAnnealing,
    PiecewiseTable,
}

#[derive(Debug, Clone, PartialEq)]
pub enum EtaSpec {
    Value(f64),
    Table(Vec<(f64, f64)>),
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SweepSpec {
    pub gamma_list: Option<Vec<GammaSpec>>,
    pub lambda: Option<Vec<DecaySpec>>,
    pub eta0: Option<Vec<f64>>,
    pub s: Option<Vec<f64>>,
    pub rescale_lr: Option<Vec<bool>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub regime: Regime,
    pub seed: u64,
    pub horizon: usize,
    pub dt: f64,
    pub record_stride: usize,
    pub rescale_lr: bool,
    pub closed_form_check: bool,
    pub output_dir: PathBuf,
    pub lambda: Option<DecaySpec>,
    pub lambda1: Option<DecaySpec>,
    pub lambda2: Option<DecaySpec>,
    pub p: usize,
    pub classes: usize,
    pub per_class: usize,
    pub gamma: GammaSpec,
    pub kind: ScheduleKind,
    pub eta0: EtaSpec,
    pub period: Option<f64>,
    pub s: f64,
    pub sweep: SweepSpec,
}

const EXPERIMENT_KEYS: &[&str] = &[
    "regime",
    "seed",
    "horizon",
    "dt",
    "record_stride",
    "rescale_lr",
    "closed_form_check",
    "output_dir",
    "lambda",
    "lambda1",
    "lambda2",
];
const SHAPE_KEYS: &[&str] = &["p", "C", "N", "gamma"];
const SCHEDULE_KEYS: &[&str] = &["kind", "eta0", "period", "s"];
const SWEEP_KEYS: &[&str] = &["gamma_list", "lambda", "eta0", "s", "rescale_lr"];

fn err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

struct Section<'a> {
    name: &'static str,
    table: Option<&'a Table>,
}

impl<'a> Section<'a> {
    fn new(root: &'a Table, name: &'static str, allowed: &[&str]) -> Result<Self, CliError> {
        let table = match root.get(name) {
            None => None,
            Some(Value::Table(t)) => Some(t),
            Some(_) => return Err(err(format!("[{name}] must be a section"))),
        };
        if let Some(t) = table {
            for key in t.keys() {
                if !allowed.contains(&key.as_str()) {
                    return Err(err(format!("unknown key \"{key}\" in [{name}]")));
                }
            }
        }
        Ok(Self { name, table })
    }

    fn get(&self, key: &str) -> Option<&'a Value> {
        self.table.and_then(|t| t.get(key))
    }

    fn mismatch(&self, key: &str, want: &str) -> CliError {
        err(format!("{}.{key}: expected {want}", self.name))
    }

    fn float(&self, key: &str) -> Result<Option<f64>, CliError> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => as_float(v).map(Some).ok_or_else(|| self.mismatch(key, "a number")),
        }
    }

    fn uint(&self, key: &str) -> Result<Option<u64>, CliError> {
        match self.get(key) {
            None => Ok(None),
            Some(Value::Integer(i)) if *i >= 0 => Ok(Some(*i as u64)),
            Some(_) => Err(self.mismatch(key, "a non-negative integer")),
        }
    }

    fn boolean(&self, key: &str) -> Result<Option<bool>, CliError> {
        match self.get(key) {
            None => Ok(None),
            Some(Value::Boolean(b)) => Ok(Some(*b)),
            Some(_) => Err(self.mismatch(key, "true or false")),
        }
    }

    fn string(&self, key: &str) -> Result<Option<&'a str>, CliError> {
        match self.get(key) {
            None => Ok(None),
            Some(Value::String(s)) => Ok(Some(s.as_str())),
            Some(_) => Err(self.mismatch(key, "a string")),
        }
    }

    fn list(&self, key: &str) -> Result<Option<&'a Vec<Value>>, CliError> {
        match self.get(key) {
            None => Ok(None),
            Some(Value::Array(a)) if !a.is_empty() => Ok(Some(a)),
            Some(_) => Err(self.mismatch(key, "a non-empty list")),
        }
    }
}

fn as_float(v: &Value) -> Option<f64> {
    match v {
        Value::Float(f) => Some(*f),
        Value::Integer(i) => Some(*i as f64),
        _ => None,
    }
}

fn parse_fraction(text: &str) -> Option<f64> {
    let (a, b) = text.split_once('/')?;
    let num: f64 = a.trim().parse().ok()?;
    let den: f64 = b.trim().parse().ok()?;
    (den != 0.0).then(|| num / den)
}

fn gamma_value(v: &Value) -> Option<GammaSpec> {
    if let Some(f) = as_float(v) {
        return Some(GammaSpec::Value(f));
    }
    let Value::String(s) = v else { return None };
    let compact: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    if compact == "1/(C-1)" {
        return Some(GammaSpec::Balanced);
    }
    parse_fraction(&compact).map(GammaSpec::Value)
}

fn decay_value(v: &Value) -> Option<DecaySpec> {
    if let Some(f) = as_float(v) {
        return Some(DecaySpec::Value(f));
    }
    match v {
        Value::String(s) if s == "star" => Some(DecaySpec::Star),
        _ => None,
    }
}

impl<'a> Section<'a> {
    fn gamma(&self, key: &str) -> Result<Option<GammaSpec>, CliError> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => gamma_value(v).map(Some).ok_or_else(|| self.mismatch(key, "a number, a fraction \"a/b\" or \"1/(C-1)\"")),
        }
    }

    fn decay(&self, key: &str) -> Result<Option<DecaySpec>, CliError> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => decay_value(v).map(Some).ok_or_else(|| self.mismatch(key, "a number or \"star\"")),
        }
    }

    fn typed_list<T>(&self, key: &str, want: &str, f: impl Fn(&Value) -> Option<T>) -> Result<Option<Vec<T>>, CliError> {
        match self.list(key)? {
            None => Ok(None),
            Some(items) => items.iter().map(|v| f(v).ok_or_else(|| self.mismatch(key, want))).collect::<Result<Vec<_>, _>>().map(Some),
        }
    }
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig, CliError> {
    let root: Table = toml::from_str(text).map_err(|e| err(format!("malformed config: {e}")))?;
    for key in root.keys() {
        if !["experiment", "shape", "schedule", "sweep"].contains(&key.as_str()) {
            return Err(err(format!("unknown section or key \"{key}\"")));
        }
    }
    let exp = Section::new(&root, "experiment", EXPERIMENT_KEYS)?;
    let shape = Section::new(&root, "shape", SHAPE_KEYS)?;
    let sched = Section::new(&root, "schedule", SCHEDULE_KEYS)?;
    let sweep = Section::new(&root, "sweep", SWEEP_KEYS)?;

    let regime = match exp.string("regime")? {
        None => return Err(err("missing required key experiment.regime")),
        Some("unconstrained") => Regime::Unconstrained,
        Some("regularized") => Regime::Regularized,
        Some("anchored") => Regime::Anchored,
        Some("spherical") => Regime::Spherical,
        Some("ntk") => Regime::Ntk,
        Some(other) => return Err(err(format!("unknown regime \"{other}\""))),
    };
    let kind = match sched.string("kind")? {
        None | Some("constant") => ScheduleKind::Constant,
        Some("cosine_annealing") => ScheduleKind::CosineAnnealing,
        Some("piecewise_table") => ScheduleKind::PiecewiseTable,
        Some(other) => return Err(err(format!("unknown schedule kind \"{other}\""))),
    };
    let eta0 = match (&kind, sched.get("eta0")) {
        (ScheduleKind::PiecewiseTable, Some(Value::Array(rows))) => {
            let mut table = Vec::new();
            for row in rows {
                let pair = match row {
                    Value::Array(p) if p.len() == 2 => (as_float(&p[0]), as_float(&p[1])),
                    _ => (None, None),
                };
                match pair {
                    (Some(t), Some(v)) => table.push((t, v)),
                    _ => return Err(sched.mismatch("eta0", "a list of [start, rate] pairs")),
                }
            }
            EtaSpec::Table(table)
        }
        (ScheduleKind::PiecewiseTable, _) => {
            return Err(err("schedule.eta0 must be a list of [start, rate] pairs for piecewise_table"))
        }
        _ => EtaSpec::Value(sched.float("eta0")?.unwrap_or(0.1)),
    };
    let period = sched.float("period")?;
    if kind == ScheduleKind::CosineAnnealing && period.is_none() {
        return Err(err("missing required key schedule.period for cosine_annealing"));
    }
    if kind != ScheduleKind::CosineAnnealing && period.is_some() {
        return Err(err("schedule.period only applies to cosine_annealing"));
    }

    let config = ExperimentConfig {
        regime,
        seed: exp.uint("seed")?.unwrap_or(0),
        horizon: exp.uint("horizon")?.unwrap_or(10_000) as usize,
        dt: exp.float("dt")?.unwrap_or(1.0),
        record_stride: exp.uint("record_stride")?.unwrap_or(10) as usize,
        rescale_lr: exp.boolean("rescale_lr")?.unwrap_or(false),
        closed_form_check: exp.boolean("closed_form_check")?.unwrap_or(false),
        output_dir: PathBuf::from(exp.string("output_dir")?.unwrap_or("out")),
        lambda: exp.decay("lambda")?,
        lambda1: exp.decay("lambda1")?,
        lambda2: exp.decay("lambda2")?,
        p: shape.uint("p")?.unwrap_or(512) as usize,
        classes: shape.uint("C")?.unwrap_or(100) as usize,
        per_class: shape.uint("N")?.unwrap_or(10) as usize,
        gamma: shape.gamma("gamma")?.unwrap_or(GammaSpec::Balanced),
        kind,
        eta0,
        period,
        s: sched.float("s")?.unwrap_or(1.0),
        sweep: SweepSpec {
            gamma_list: sweep.typed_list("gamma_list", "numbers or fractions", gamma_value)?,
            lambda: sweep.typed_list("lambda", "numbers or \"star\"", decay_value)?,
            eta0: sweep.typed_list("eta0", "numbers", as_float)?,
            s: sweep.typed_list("s", "numbers", as_float)?,
            rescale_lr: sweep.typed_list("rescale_lr", "booleans", |v| v.as_bool())?,
        },
    };
    config.validate()?;
    Ok(config)
}

/// One fully resolved run of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct Member {
    pub index: usize,
    pub shape: ProblemShape,
    pub schedule: Schedule,
    pub lambda1: f64,
    pub lambda2: f64,
    pub rescale_lr: bool,
    pub label: String,
}

impl ExperimentConfig {
    fn validate(&self) -> Result<(), CliError> {
        if self.horizon == 0 && self.closed_form_check {
            return Err(err("closed_form_check needs a positive horizon"));
        }
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(err("experiment.dt must be > 0"));
        }
        if self.record_stride == 0 {
            return Err(err("experiment.record_stride must be at least 1"));
        }
        let has_decay = self.lambda.is_some() || self.lambda1.is_some() || self.lambda2.is_some() || self.sweep.lambda.is_some();
        match self.regime {
            Regime::Unconstrained | Regime::Ntk | Regime::Spherical if has_decay => {
                return Err(err(format!("the {} regime takes no weight decay", self.regime.name())));
            }
            Regime::Regularized => {
                let split = self.lambda1.is_some() || self.lambda2.is_some();
                if self.lambda.is_some() && split {
                    return Err(err("give either lambda or lambda1/lambda2, not both"));
                }
                if self.sweep.lambda.is_some() && split {
                    return Err(err("a lambda sweep cannot be combined with lambda1/lambda2"));
                }
                if split && (self.lambda1.is_none() || self.lambda2.is_none()) {
                    return Err(err("regularized runs need both lambda1 and lambda2"));
                }
                if !has_decay {
                    return Err(err("missing required key experiment.lambda for the regularized regime"));
                }
            }
            Regime::Anchored => {
                if self.lambda1.is_some() || self.lambda2.is_some() {
                    return Err(err("the anchored regime uses experiment.lambda only"));
                }
                if self.lambda.is_none() && self.sweep.lambda.is_none() {
                    return Err(err("missing required key experiment.lambda for the anchored regime"));
                }
            }
            _ => {}
        }
        let rescale_given = self.rescale_lr || self.sweep.rescale_lr.is_some();
        if rescale_given && self.regime != Regime::Spherical {
            return Err(err("rescale_lr applies to the spherical regime only"));
        }
        if self.regime == Regime::Spherical {
            if self.closed_form_check {
                return Err(err("the spherical regime has no closed form to check against"));
            }
            if self.p + 1 < self.classes {
                return Err(err("the spherical regime anchors zero-mean simplex prototypes and needs p >= C-1"));
            }
        }
        self.members().map(|_| ())
    }

    /// Expands the sweep into runs; the product is taken in the order
    /// gamma, lambda, eta0, s, rescale_lr.
    pub fn members(&self) -> Result<Vec<Member>, CliError> {
        let gammas = self.sweep.gamma_list.clone().unwrap_or_else(|| vec![self.gamma]);
        let lambdas: Vec<Option<DecaySpec>> = match &self.sweep.lambda {
            Some(l) => l.iter().copied().map(Some).collect(),
            None => vec![self.lambda],
        };
        let etas: Vec<Option<f64>> = match &self.sweep.eta0 {
            Some(e) => e.iter().copied().map(Some).collect(),
            None => vec![None],
        };
        let ratios = self.sweep.s.clone().unwrap_or_else(|| vec![self.s]);
        let rescales = self.sweep.rescale_lr.clone().unwrap_or_else(|| vec![self.rescale_lr]);
        if etas.iter().any(|e| e.is_some()) && self.kind == ScheduleKind::PiecewiseTable {
            return Err(err("an eta0 sweep cannot be combined with a piecewise table"));
        }

        let mut out = Vec::new();
        for g in &gammas {
            let shape = ProblemShape::new(self.p, self.classes, self.per_class, g.resolve(self.classes))?;
            for lam in &lambdas {
                let (l1, l2) = match (lam, self.lambda1, self.lambda2) {
                    (Some(l), _, _) => (l.resolve(&shape), l.resolve(&shape)),
                    (None, Some(a), Some(b)) => (a.resolve(&shape), b.resolve(&shape)),
                    _ => (0.0, 0.0),
                };
                if !(l1 >= 0.0 && l2 >= 0.0 && l1.is_finite() && l2.is_finite()) {
                    return Err(err("weight decay must be finite and >= 0"));
                }
                for eta in &etas {
                    for &s in &ratios {
                        for &rescale in &rescales {
                            let schedule = self.schedule(*eta, s)?;
                            let mut label = format!("gamma={}", shape.gamma());
                            if self.regime == Regime::Regularized || self.regime == Regime::Anchored {
                                if l1 == l2 {
                                    label.push_str(&format!(" lambda={l1}"));
                                } else {
                                    label.push_str(&format!(" lambda1={l1} lambda2={l2}"));
                                }
                            }
                            if let Some(e) = eta {
                                label.push_str(&format!(" eta0={e}"));
                            }
                            if self.sweep.s.is_some() {
                                label.push_str(&format!(" s={s}"));
                            }
                            if self.regime == Regime::Spherical {
                                label.push_str(&format!(" rescale={rescale}"));
                            }
                            out.push(Member {
                                index: out.len(),
                                shape,
                                schedule,
                                lambda1: l1,
                                lambda2: l2,
                                rescale_lr: rescale,
                                label,
                            });
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    fn schedule(&self, eta_override: Option<f64>, s: f64) -> Result<Schedule, CliError> {
        let profile = match (&self.kind, &self.eta0) {
            (ScheduleKind::PiecewiseTable, EtaSpec::Table(t)) => RateProfile::Piecewise { segments: t.clone() },
            (ScheduleKind::Constant, EtaSpec::Value(v)) => RateProfile::Constant { eta: eta_override.unwrap_or(*v) },
            (ScheduleKind::CosineAnnealing, EtaSpec::Value(v)) => RateProfile::CosineAnnealing {
                eta0: eta_override.unwrap_or(*v),
                period: self.period.unwrap_or(1.0),
            },
            _ => return Err(err("schedule.eta0 does not match schedule.kind")),
        };
        Ok(Schedule::new(profile, s)?)
    }
}
