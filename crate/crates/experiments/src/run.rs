//! Parameter sweeps over analytic and Monte-Carlo engines.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Mutex;

use coopsense::config::PARAMETER_NAMES;
use coopsense::detection::{detection_curves, optimize_thresholds, DetectionCurves, EnumerationPolicy, SensorType};
use coopsense::localization::{
    localization_error_imperfect_type_a, localization_error_perfect, localization_error_type_b, FcType,
};
use coopsense::sim::{estimate_error, AbnormalitySlot, Hypothesis, Metric as SimMetric, Scenario};
use coopsense::{AnalysisError, ErrorEstimate, Provenance, SystemConfig, TailMode};
use rayon::prelude::*;
use thiserror::Error;

/// Analytic samples used when exact enumeration exceeds its budget.
pub const AUTO_SAMPLES: u64 = 20_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpecError {
    #[error("unknown parameter `{0}`")]
    UnknownParameter(String),
    #[error("bad sweep `{0}`: expected key=v1,v2,...")]
    BadSweep(String),
    #[error("unknown metric `{0}`")]
    UnknownMetric(String),
    #[error("bad {what} `{value}`")]
    BadValue { what: &'static str, value: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Engine {
    Analytic,
    MonteCarlo,
    Both,
}

impl FromStr for Engine {
    type Err = SpecError;
    fn from_str(s: &str) -> Result<Self, SpecError> {
        match s {
            "analytic" => Ok(Engine::Analytic),
            "mc" => Ok(Engine::MonteCarlo),
            "both" => Ok(Engine::Both),
            _ => Err(SpecError::BadValue {
                what: "engine",
                value: s.into(),
            }),
        }
    }
}

pub fn parse_policy(s: &str, seed: u64) -> Result<EnumerationPolicy, SpecError> {
    let bad = || SpecError::BadValue {
        what: "policy",
        value: s.into(),
    };
    match s.split_once(':') {
        None if s == "exact" => Ok(EnumerationPolicy::exact()),
        Some(("truncated", cap)) => Ok(EnumerationPolicy::Truncated {
            cap: cap.parse().map_err(|_| bad())?,
        }),
        Some(("sampled", n)) => Ok(EnumerationPolicy::Sampled {
            n: n.parse().map_err(|_| bad())?,
            seed,
        }),
        _ => Err(bad()),
    }
}

pub fn parse_tail(s: &str) -> Result<TailMode, SpecError> {
    match s {
        "exact" => Ok(TailMode::ExactPoisson),
        "gauss" => Ok(TailMode::GaussianApprox),
        _ => Err(SpecError::BadValue {
            what: "tail mode",
            value: s.into(),
        }),
    }
}

fn parse_sensor(s: &str) -> Option<SensorType> {
    match s {
        "memoryless" => Some(SensorType::Memoryless),
        "aggregate" => Some(SensorType::Aggregate),
        _ => None,
    }
}

/// Quantity evaluated at each sweep point.
#[derive(Debug, Clone, PartialEq)]
pub enum MetricKind {
    FalseAlarm(SensorType),
    MissDetection(SensorType),
    DetectionError(SensorType),
    /// Detection error minimized over `tau1 = 0..=N_s+1` and the given
    /// marker thresholds (`tau2` or `tau2_agg`). Also reports the minimizer.
    MinDetectionError {
        sensor_type: SensorType,
        tau2_grid: Vec<u64>,
    },
    /// Type-A localization error: perfect sensing when `delta = 0`.
    LocalizationTypeA,
    /// Closed-form upper bound on the imperfect type-A error.
    LocalizationBoundTypeA,
    LocalizationTypeB,
}

/// Default marker-threshold grid of the minimized detection error.
pub fn default_tau2_grid() -> Vec<u64> {
    vec![
        1, 2, 3, 4, 5, 6, 7, 8, 10, 12, 14, 16, 20, 25, 30, 40, 50, 60, 80, 100, 150, 200, 300,
    ]
}

impl MetricKind {
    pub fn name(&self) -> String {
        match self {
            MetricKind::FalseAlarm(st) => format!("P_FA/{st}"),
            MetricKind::MissDetection(st) => format!("P_MD/{st}"),
            MetricKind::DetectionError(st) => format!("P_e_D/{st}"),
            MetricKind::MinDetectionError { sensor_type, .. } => format!("min_P_e_D/{sensor_type}"),
            MetricKind::LocalizationTypeA => "P_e_L/type-a".into(),
            MetricKind::LocalizationBoundTypeA => "P_e_L_bound/type-a".into(),
            MetricKind::LocalizationTypeB => "P_e_L/type-b".into(),
        }
    }
}

impl FromStr for MetricKind {
    type Err = SpecError;
    fn from_str(s: &str) -> Result<Self, SpecError> {
        let unknown = || SpecError::UnknownMetric(s.into());
        let (head, tail) = s.split_once('/').ok_or_else(unknown)?;
        let sensor = || parse_sensor(tail).ok_or_else(unknown);
        match (head, tail) {
            ("P_FA", _) => Ok(MetricKind::FalseAlarm(sensor()?)),
            ("P_MD", _) => Ok(MetricKind::MissDetection(sensor()?)),
            ("P_e_D", _) => Ok(MetricKind::DetectionError(sensor()?)),
            ("min_P_e_D", _) => Ok(MetricKind::MinDetectionError {
                sensor_type: sensor()?,
                tau2_grid: default_tau2_grid(),
            }),
            ("P_e_L", "type-a") => Ok(MetricKind::LocalizationTypeA),
            ("P_e_L_bound", "type-a") => Ok(MetricKind::LocalizationBoundTypeA),
            ("P_e_L", "type-b") => Ok(MetricKind::LocalizationTypeB),
            _ => Err(unknown()),
        }
    }
}

/// One block of sweeps sharing overrides and metrics.
#[derive(Debug, Clone, PartialEq)]
pub struct Study {
    /// Applied to the base configuration before the sweep axes.
    pub overrides: Vec<(String, f64)>,
    /// Cartesian product, first axis outermost.
    pub axes: Vec<(String, Vec<f64>)>,
    pub metrics: Vec<MetricKind>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    /// Name written to the `preset` column.
    pub preset: String,
    pub base: SystemConfig,
    pub studies: Vec<Study>,
    pub engine: Engine,
    pub policy: EnumerationPolicy,
    pub tail_mode: TailMode,
    pub n_trials: u64,
    pub seed: u64,
    /// Extra `# ` lines written before the CSV header.
    pub notes: Vec<String>,
}

pub fn check_parameter(name: &str) -> Result<(), SpecError> {
    if PARAMETER_NAMES.contains(&name) {
        Ok(())
    } else {
        Err(SpecError::UnknownParameter(name.into()))
    }
}

/// Parses `key=v1,v2,...`.
pub fn parse_sweep(s: &str) -> Result<(String, Vec<f64>), SpecError> {
    let (key, values) = s.split_once('=').ok_or_else(|| SpecError::BadSweep(s.into()))?;
    let key = key.trim();
    check_parameter(key)?;
    let values = values
        .split(',')
        .map(|v| v.trim().parse::<f64>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|_| SpecError::BadSweep(s.into()))?;
    if values.is_empty() {
        return Err(SpecError::BadSweep(s.into()));
    }
    Ok((key.to_string(), values))
}

impl ExperimentSpec {
    pub fn check(&self) -> Result<(), SpecError> {
        for study in &self.studies {
            for (name, _) in &study.overrides {
                check_parameter(name)?;
            }
            for (name, _) in &study.axes {
                check_parameter(name)?;
            }
        }
        Ok(())
    }

    /// Swept parameter names over all studies, in order of first appearance.
    pub fn swept_parameters(&self) -> Vec<String> {
        let mut names: Vec<String> = Vec::new();
        for (name, _) in self.studies.iter().flat_map(|s| &s.axes) {
            if !names.contains(name) {
                names.push(name.clone());
            }
        }
        names
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub engine: &'static str,
    pub tail_mode: String,
    pub policy: String,
    /// One entry per swept parameter of the spec; `None` if not swept here.
    pub params: Vec<Option<f64>>,
    pub metric: String,
    pub value: Option<f64>,
    pub stderr: Option<f64>,
    pub n_trials: Option<u64>,
    pub residual_bound: Option<f64>,
    pub error: String,
}

impl Row {
    pub fn failed(&self) -> bool {
        self.value.is_none()
    }
}

/// Formats numbers the same way on every platform: plain decimal within
/// `[1e-4, 1e15)`, scientific notation outside.
pub fn format_number(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 {
        "0".into()
    } else if (1e-4..1e15).contains(&a) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

struct Point {
    params: Vec<Option<f64>>,
    config: Result<SystemConfig, String>,
    metric: MetricKind,
}

fn points(spec: &ExperimentSpec) -> Vec<Point> {
    let swept = spec.swept_parameters();
    let mut out = Vec::new();
    for study in &spec.studies {
        let mut base = spec.base.clone();
        let mut base_err = None;
        for (k, v) in &study.overrides {
            if let Err(e) = base.set(k, *v) {
                base_err = Some(e.to_string());
            }
        }
        let mut combos: Vec<Vec<(usize, f64)>> = vec![Vec::new()];
        for (name, values) in &study.axes {
            let col = swept.iter().position(|n| n == name).expect("collected above");
            combos = combos
                .into_iter()
                .flat_map(|c| {
                    values.iter().map(move |&v| {
                        let mut c = c.clone();
                        c.push((col, v));
                        c
                    })
                })
                .collect();
        }
        for combo in combos {
            let mut params = vec![None; swept.len()];
            let mut config = match &base_err {
                Some(e) => Err(e.clone()),
                None => Ok(base.clone()),
            };
            for &(col, v) in &combo {
                params[col] = Some(v);
                if let Ok(c) = &mut config {
                    if let Err(e) = c.set(&swept[col], v) {
                        config = Err(e.to_string());
                    }
                }
            }
            if let Ok(c) = &config {
                if let Err(e) = c.validate() {
                    config = Err(e.to_string());
                }
            }
            for metric in &study.metrics {
                out.push(Point {
                    params: params.clone(),
                    config: config.clone(),
                    metric: metric.clone(),
                });
            }
        }
    }
    out
}

/// Analytic result of one metric: labelled estimates plus the policy used.
struct AnalyticResult {
    values: Vec<(String, ErrorEstimate)>,
    policy: EnumerationPolicy,
}

type CurveCache = Mutex<HashMap<String, (DetectionCurves, EnumerationPolicy)>>;

/// Runs `f` with `policy`, retrying with a sampled policy when exact
/// enumeration is over budget.
fn with_fallback<T>(
    policy: EnumerationPolicy,
    seed: u64,
    f: impl Fn(EnumerationPolicy) -> Result<T, AnalysisError>,
) -> Result<(T, EnumerationPolicy), AnalysisError> {
    match f(policy) {
        Err(AnalysisError::OverBudget { .. }) if matches!(policy, EnumerationPolicy::Exact { .. }) => {
            let sampled = EnumerationPolicy::Sampled { n: AUTO_SAMPLES, seed };
            Ok((f(sampled)?, sampled))
        }
        other => other.map(|t| (t, policy)),
    }
}

fn curves(
    cache: &CurveCache,
    st: SensorType,
    spec: &ExperimentSpec,
    config: &SystemConfig,
) -> Result<(DetectionCurves, EnumerationPolicy), AnalysisError> {
    // every tau1 shares one set of curves
    let mut key_config = config.clone();
    key_config.tau1 = 0;
    let key = format!("{st:?}{key_config:?}");
    if let Some(c) = cache.lock().expect("cache lock").get(&key) {
        return Ok(c.clone());
    }
    let (c, policy) = with_fallback(spec.policy, spec.seed, |p| {
        detection_curves(st, spec.tail_mode, p, config)
    })?;
    cache.lock().expect("cache lock").insert(key, (c.clone(), policy));
    Ok((c, policy))
}

fn analytic(
    metric: &MetricKind,
    spec: &ExperimentSpec,
    config: &SystemConfig,
    cache: &CurveCache,
) -> Result<AnalyticResult, AnalysisError> {
    let name = metric.name();
    let tau1 = config.tau1 as usize;
    let one = |e: ErrorEstimate, policy| AnalyticResult {
        values: vec![(name.clone(), e)],
        policy,
    };
    match metric {
        MetricKind::FalseAlarm(st) | MetricKind::MissDetection(st) | MetricKind::DetectionError(st) => {
            let (c, policy) = curves(cache, *st, spec, config)?;
            let e = match metric {
                MetricKind::FalseAlarm(_) => c.false_alarm[tau1],
                MetricKind::MissDetection(_) => c.miss[tau1],
                _ => c.error_at(config.tau1, config.prior_h0),
            };
            Ok(one(e, policy))
        }
        MetricKind::MinDetectionError { sensor_type, tau2_grid } => {
            let tau1_grid: Vec<u32> = (0..=config.n_s + 1).collect();
            let (search, policy) = with_fallback(spec.policy, spec.seed, |p| {
                optimize_thresholds(*sensor_type, &tau1_grid, tau2_grid, spec.tail_mode, p, config)
            })?;
            Ok(AnalyticResult {
                values: vec![
                    (name, search.min_error),
                    (
                        format!("tau1_opt/{sensor_type}"),
                        threshold_value(search.best_tau1 as f64),
                    ),
                    (
                        format!("tau2_opt/{sensor_type}"),
                        threshold_value(search.best_tau2 as f64),
                    ),
                ],
                policy,
            })
        }
        MetricKind::LocalizationTypeA | MetricKind::LocalizationBoundTypeA => {
            if config.delta == 0.0 {
                let e = localization_error_perfect(spec.tail_mode, config)?;
                return Ok(one(e, spec.policy));
            }
            let (out, policy) = with_fallback(spec.policy, spec.seed, |p| {
                localization_error_imperfect_type_a(spec.tail_mode, p, config)
            })?;
            let e = match metric {
                MetricKind::LocalizationTypeA => out.error,
                _ => ErrorEstimate {
                    value: out.upper_bound,
                    ..ErrorEstimate::exact(0.0, Some(spec.tail_mode))
                },
            };
            Ok(one(e, policy))
        }
        MetricKind::LocalizationTypeB => {
            let (e, policy) = with_fallback(spec.policy, spec.seed, |p| localization_error_type_b(p, config))?;
            Ok(one(e, policy))
        }
    }
}

/// Threshold rows reuse the estimate layout; the value is not a probability.
fn threshold_value(value: f64) -> ErrorEstimate {
    ErrorEstimate {
        value,
        stderr: 0.0,
        n_trials: 0,
        provenance: Provenance::AnalyticExact,
        tail_mode: None,
    }
}

/// Monte-Carlo counterpart of `metric`, if any. `thresholds` carries the
/// analytic minimizer for the minimized detection error.
fn monte_carlo(
    metric: &MetricKind,
    spec: &ExperimentSpec,
    config: &SystemConfig,
    thresholds: Option<(u32, u64)>,
) -> Option<Result<ErrorEstimate, AnalysisError>> {
    let scenario = |st, fc| Scenario::new(Hypothesis::H1(AbnormalitySlot::Uniform), st, fc, spec.seed);
    let (m, sc, config) = match metric {
        MetricKind::FalseAlarm(st) => (SimMetric::FalseAlarm, scenario(*st, FcType::TypeA), config.clone()),
        MetricKind::MissDetection(st) => (SimMetric::MissDetection, scenario(*st, FcType::TypeA), config.clone()),
        MetricKind::DetectionError(st) => (SimMetric::DetectionError, scenario(*st, FcType::TypeA), config.clone()),
        MetricKind::MinDetectionError { sensor_type, .. } => {
            let (tau1, tau2) = thresholds?;
            let mut c = config.clone();
            c.tau1 = tau1;
            match sensor_type {
                SensorType::Memoryless => c.tau2 = tau2,
                SensorType::Aggregate => c.tau2_agg = Some(tau2),
            }
            (SimMetric::DetectionError, scenario(*sensor_type, FcType::TypeA), c)
        }
        MetricKind::LocalizationTypeA => (
            SimMetric::LocalizationError(FcType::TypeA),
            scenario(SensorType::Memoryless, FcType::TypeA),
            config.clone(),
        ),
        MetricKind::LocalizationBoundTypeA => return None,
        MetricKind::LocalizationTypeB => (
            SimMetric::LocalizationError(FcType::TypeB),
            scenario(SensorType::Memoryless, FcType::TypeB),
            config.clone(),
        ),
    };
    Some(estimate_error(m, &sc, spec.n_trials, &config))
}

/// Tolerance of the analytic/Monte-Carlo comparison of "both" runs.
pub const AGREEMENT_FLOOR: f64 = 0.01;

fn evaluate(point: &Point, spec: &ExperimentSpec, cache: &CurveCache) -> Vec<Row> {
    let tail = spec.tail_mode.to_string();
    let row = |engine, tail_mode: &str, policy: String, metric: String| Row {
        engine,
        tail_mode: tail_mode.to_string(),
        policy,
        params: point.params.clone(),
        metric,
        value: None,
        stderr: None,
        n_trials: None,
        residual_bound: None,
        error: String::new(),
    };
    let fill = |mut r: Row, e: &ErrorEstimate| {
        r.value = Some(e.value);
        r.stderr = Some(e.stderr);
        r.n_trials = Some(e.n_trials);
        r.residual_bound = Some(e.residual_bound());
        r
    };
    let name = point.metric.name();
    let config = match &point.config {
        Ok(c) => c,
        Err(e) => {
            let mut r = row("-", "-", "-".into(), name);
            r.error = format!("config: {e}");
            return vec![r];
        }
    };

    let mut rows = Vec::new();
    let mut thresholds = None;
    let mut reference = None;
    if matches!(spec.engine, Engine::Analytic | Engine::Both) {
        match analytic(&point.metric, spec, config, cache) {
            Ok(res) => {
                let policy = res.policy.label();
                if let MetricKind::MinDetectionError { .. } = point.metric {
                    thresholds = Some((res.values[1].1.value as u32, res.values[2].1.value as u64));
                }
                reference = Some(res.values[0].1);
                for (metric, e) in res.values {
                    rows.push(fill(row("analytic", &tail, policy.clone(), metric), &e));
                }
            }
            Err(e) => {
                let mut r = row("analytic", &tail, spec.policy.label(), name.clone());
                r.error = e.to_string();
                rows.push(r);
            }
        }
    }
    if matches!(spec.engine, Engine::MonteCarlo | Engine::Both) {
        if matches!(spec.engine, Engine::MonteCarlo) {
            if let MetricKind::MinDetectionError { .. } = point.metric {
                // the minimizer comes from the analytic search
                thresholds = analytic(&point.metric, spec, config, cache)
                    .ok()
                    .map(|res| (res.values[1].1.value as u32, res.values[2].1.value as u64));
            }
        }
        if let Some(result) = monte_carlo(&point.metric, spec, config, thresholds) {
            let base = row("mc", "-", "-".into(), name);
            match result {
                Ok(e) => {
                    let mut r = fill(base, &e);
                    if let (Engine::Both, Some(a)) = (spec.engine, reference) {
                        if !a.agrees_with(&e, AGREEMENT_FLOOR) {
                            let msg = format!(
                                "mismatch: |analytic - mc| = {} exceeds max({AGREEMENT_FLOOR}, 4 stderr)",
                                format_number((a.value - e.value).abs())
                            );
                            if let Some(first) = rows.first_mut() {
                                first.error = msg.clone();
                            }
                            r.error = msg;
                        }
                    }
                    rows.push(r);
                }
                Err(e) => {
                    let mut r = base;
                    r.error = e.to_string();
                    rows.push(r);
                }
            }
        }
    }
    rows
}

/// Evaluates every sweep point; rows follow sweep order.
pub fn run_experiment(spec: &ExperimentSpec) -> Vec<Row> {
    let cache = CurveCache::default();
    let pts = points(spec);
    pts.par_iter()
        .map(|p| evaluate(p, spec, &cache))
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect()
}

/// Renders rows as CSV, preceded by `# ` metadata lines.
pub fn to_csv(spec: &ExperimentSpec, rows: &[Row]) -> Result<String, csv::Error> {
    let mut out = String::new();
    out.push_str(&format!("# coopsense {}\n", env!("CARGO_PKG_VERSION")));
    out.push_str(&format!(
        "# preset={} engine={} policy={} tail={} trials={} seed={}\n",
        spec.preset,
        spec.engine,
        spec.policy.label(),
        spec.tail_mode,
        spec.n_trials,
        spec.seed
    ));
    for note in &spec.notes {
        out.push_str(&format!("# {note}\n"));
    }

    let swept = spec.swept_parameters();
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["preset", "engine", "tail_mode", "policy"];
    header.extend(swept.iter().map(String::as_str));
    header.extend(["metric_name", "value", "stderr", "n_trials", "residual_bound", "error"]);
    w.write_record(&header)?;
    let opt = |x: Option<f64>| x.map(format_number).unwrap_or_default();
    for r in rows {
        let mut rec = vec![
            spec.preset.clone(),
            r.engine.into(),
            r.tail_mode.clone(),
            r.policy.clone(),
        ];
        rec.extend(r.params.iter().map(|&p| opt(p)));
        rec.push(r.metric.clone());
        rec.push(opt(r.value));
        rec.push(opt(r.stderr));
        rec.push(r.n_trials.map(|n| n.to_string()).unwrap_or_default());
        rec.push(opt(r.residual_bound));
        rec.push(r.error.clone());
        w.write_record(&rec)?;
    }
    let bytes = w.into_inner().map_err(|e| e.into_error())?;
    out.push_str(&String::from_utf8(bytes).expect("CSV of UTF-8 fields"));
    Ok(out)
}

impl fmt::Display for Engine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Engine::Analytic => "analytic",
            Engine::MonteCarlo => "mc",
            Engine::Both => "both",
        })
    }
}
