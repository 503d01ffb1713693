//! Experiment driver for `coopsense`: configuration files, bundled presets,
//! parameter sweeps over the analytic and Monte-Carlo engines, CSV output.

pub mod config_file;
pub mod presets;
pub mod run;

use std::path::PathBuf;

pub use config_file::{load_config, parse_config, ConfigFileError, REFERENCE_CONFIG};
pub use presets::{list_presets, preset, Preset, PRESET_NAMES};
pub use run::{
    format_number, parse_policy, parse_sweep, parse_tail, run_experiment, to_csv, Engine, ExperimentSpec, MetricKind,
    Row, SpecError, Study,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum BuildError {
    #[error(transparent)]
    Config(#[from] ConfigFileError),
    #[error(transparent)]
    Spec(#[from] SpecError),
    #[error("unknown preset `{0}`; see `coopsense presets`")]
    UnknownPreset(String),
    #[error("give --config, --preset or both")]
    NothingToRun,
}

/// Options of `coopsense run`.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub config: Option<PathBuf>,
    pub preset: Option<String>,
    pub sweeps: Vec<String>,
    pub metrics: Vec<String>,
    pub engine: Option<String>,
    pub policy: Option<String>,
    pub tail: Option<String>,
    pub trials: Option<u64>,
    pub seed: u64,
}

/// Metric of a run without preset or `--metric`.
pub const DEFAULT_METRIC: &str = "P_e_D/memoryless";

/// Assembles the experiment. With a preset, the base configuration is the
/// `--config` file if given and the bundled parameter set otherwise; the
/// preset's overrides apply on top, and `--sweep` axes replace or extend
/// the preset's axes.
pub fn build_spec(opts: &RunOptions) -> Result<ExperimentSpec, BuildError> {
    let base = match &opts.config {
        Some(path) => load_config(path)?,
        None if opts.preset.is_some() => parse_config(REFERENCE_CONFIG)?,
        None => return Err(BuildError::NothingToRun),
    };
    let sweeps = opts
        .sweeps
        .iter()
        .map(|s| parse_sweep(s))
        .collect::<Result<Vec<_>, _>>()?;
    let metrics = opts
        .metrics
        .iter()
        .map(|m| m.parse::<MetricKind>())
        .collect::<Result<Vec<_>, _>>()?;

    let (name, mut studies, engine, policy, trials, notes) = match &opts.preset {
        Some(name) => {
            let p = preset(name).ok_or_else(|| BuildError::UnknownPreset(name.clone()))?;
            (
                p.name.to_string(),
                p.studies,
                p.engine,
                p.policy.to_string(),
                p.n_trials,
                p.notes,
            )
        }
        None => (
            "custom".to_string(),
            vec![Study {
                overrides: vec![],
                axes: vec![],
                metrics: vec![DEFAULT_METRIC.parse()?],
            }],
            Engine::Analytic,
            "exact".to_string(),
            20_000,
            vec![],
        ),
    };
    for study in &mut studies {
        for (key, values) in &sweeps {
            match study.axes.iter_mut().find(|(k, _)| k == key) {
                Some(axis) => axis.1 = values.clone(),
                None => study.axes.push((key.clone(), values.clone())),
            }
        }
        if !metrics.is_empty() {
            study.metrics = metrics.clone();
        }
    }

    let engine = match &opts.engine {
        Some(e) => e.parse()?,
        None => engine,
    };
    let policy = parse_policy(opts.policy.as_deref().unwrap_or(&policy), opts.seed)?;
    let tail_mode = parse_tail(opts.tail.as_deref().unwrap_or("exact"))?;
    let spec = ExperimentSpec {
        preset: name,
        base,
        studies,
        engine,
        policy,
        tail_mode,
        n_trials: opts.trials.unwrap_or(trials),
        seed: opts.seed,
        notes,
    };
    spec.check()?;
    Ok(spec)
}
