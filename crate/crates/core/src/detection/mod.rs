//! Closed-form detection error probabilities.
//!
//! The fusion center counts active sensors `N_T = N_1 + N_2` and raises an
//! alarm when `N_T >= tau1`. `N_1` is the number of marker sources (the
//! multinomial vector `R`), `N_2` the number of sensors activated only by
//! markers, binomial given `R`.

mod activation;
mod source;

pub use activation::{marker_activation_prob, ActivationModel, SensorType};
pub use source::{
    enumerate_source_vectors, slot_probs_h0, slot_probs_h1, source_vector_count, source_vector_ln_pmf,
    source_vector_pmf, EnumerationPolicy, MultinomialSampler, SlotHypothesis, SlotProbs, SourceStream, SourceVector,
    SourceVectors, DEFAULT_EXACT_BUDGET,
};

pub(crate) use source::{expect_over_sources, Expectation};

use rayon::prelude::*;

use crate::config::SystemConfig;
use crate::estimate::{ErrorEstimate, Provenance};
use crate::tail::TailMode;
use crate::AnalysisError;

fn provenance(policy: EnumerationPolicy, residual: f64) -> Provenance {
    match policy {
        EnumerationPolicy::Exact { .. } => Provenance::AnalyticExact,
        EnumerationPolicy::Truncated { cap } => Provenance::AnalyticTruncated {
            cap,
            residual_bound: residual,
        },
        EnumerationPolicy::Sampled { .. } => Provenance::AnalyticSampled,
    }
}

pub(crate) fn estimate_from(
    value: f64,
    stderr: f64,
    samples: u64,
    residual: f64,
    policy: EnumerationPolicy,
    tail_mode: Option<TailMode>,
) -> ErrorEstimate {
    ErrorEstimate {
        value: value.clamp(0.0, 1.0),
        stderr,
        n_trials: samples,
        provenance: provenance(policy, residual),
        tail_mode,
    }
}

/// False-alarm and miss-detection probabilities for every `tau1` in
/// `0..=N_s+1` at once; the source-vector sum is shared by all thresholds.
#[derive(Debug, Clone)]
pub struct DetectionCurves {
    pub false_alarm: Vec<ErrorEstimate>,
    pub miss: Vec<ErrorEstimate>,
}

impl DetectionCurves {
    /// `P(H0) P_FA + P(H1) P_MD` at `tau1`.
    pub fn error_at(&self, tau1: u32, prior_h0: f64) -> ErrorEstimate {
        combine(&self.false_alarm[tau1 as usize], &self.miss[tau1 as usize], prior_h0)
    }

    /// Smallest-`tau1` minimizer of the detection error.
    pub fn best(&self, prior_h0: f64) -> (u32, ErrorEstimate) {
        let mut best = (0, self.error_at(0, prior_h0));
        for tau1 in 1..self.false_alarm.len() as u32 {
            let e = self.error_at(tau1, prior_h0);
            if e.value < best.1.value {
                best = (tau1, e);
            }
        }
        best
    }
}

fn combine(fa: &ErrorEstimate, md: &ErrorEstimate, prior_h0: f64) -> ErrorEstimate {
    let p1 = 1.0 - prior_h0;
    let provenance = match (fa.provenance, md.provenance) {
        (
            Provenance::AnalyticTruncated { cap, residual_bound: a },
            Provenance::AnalyticTruncated { residual_bound: b, .. },
        ) => Provenance::AnalyticTruncated {
            cap,
            residual_bound: prior_h0 * a + p1 * b,
        },
        (p, _) => p,
    };
    ErrorEstimate {
        value: (prior_h0 * fa.value + p1 * md.value).clamp(0.0, 1.0),
        stderr: ((prior_h0 * fa.stderr).powi(2) + (p1 * md.stderr).powi(2)).sqrt(),
        n_trials: fa.n_trials.max(md.n_trials),
        provenance,
        tail_mode: fa.tail_mode,
    }
}

/// Computes [`DetectionCurves`] with the marker threshold of `model`.
pub fn detection_curves_with(
    model: &ActivationModel,
    policy: EnumerationPolicy,
    config: &SystemConfig,
) -> Result<DetectionCurves, AnalysisError> {
    let k = model.geometry.k;
    let dim = config.n_s as usize + 2;
    let tail = Some(model.tail_mode);
    let seed_stream = |s: u64| s;

    let h0 = expect_over_sources(
        config,
        &slot_probs_h0(config),
        policy,
        None,
        seed_stream(0),
        dim,
        |r, out| model.alarm_tail(r, out),
    )?;
    let false_alarm = (0..dim)
        .map(|t| estimate_from(h0.mean[t], h0.stderr[t], h0.samples, h0.residual, policy, tail))
        .collect();

    let per_slot: Vec<Expectation> = (1..=k)
        .into_par_iter()
        .map(|j| {
            expect_over_sources(
                config,
                &slot_probs_h1(j, config),
                policy,
                None,
                seed_stream(j as u64),
                dim,
                |r, out| {
                    model.alarm_tail(r, out);
                    out.iter_mut().for_each(|x| *x = 1.0 - *x);
                },
            )
        })
        .collect::<Result<_, _>>()?;
    let kf = k as f64;
    let miss = (0..dim)
        .map(|t| {
            let value = per_slot.iter().map(|e| e.mean[t]).sum::<f64>() / kf;
            let stderr = per_slot.iter().map(|e| e.stderr[t].powi(2)).sum::<f64>().sqrt() / kf;
            let residual = per_slot.iter().map(|e| e.residual).sum::<f64>() / kf;
            let samples = per_slot.iter().map(|e| e.samples).sum();
            estimate_from(value, stderr, samples, residual, policy, tail)
        })
        .collect();
    Ok(DetectionCurves { false_alarm, miss })
}

pub fn detection_curves(
    sensor_type: SensorType,
    tail_mode: TailMode,
    policy: EnumerationPolicy,
    config: &SystemConfig,
) -> Result<DetectionCurves, AnalysisError> {
    let model = ActivationModel::new(config, sensor_type, tail_mode)?;
    detection_curves_with(&model, policy, config)
}

/// `P(N_T >= tau1 | H0)` at the configured `tau1`.
pub fn false_alarm_prob(
    sensor_type: SensorType,
    tail_mode: TailMode,
    policy: EnumerationPolicy,
    config: &SystemConfig,
) -> Result<ErrorEstimate, AnalysisError> {
    Ok(detection_curves(sensor_type, tail_mode, policy, config)?.false_alarm[config.tau1 as usize])
}

/// `P(N_T < tau1 | H1)` averaged over a uniformly placed abnormality.
pub fn miss_detection_prob(
    sensor_type: SensorType,
    tail_mode: TailMode,
    policy: EnumerationPolicy,
    config: &SystemConfig,
) -> Result<ErrorEstimate, AnalysisError> {
    Ok(detection_curves(sensor_type, tail_mode, policy, config)?.miss[config.tau1 as usize])
}

pub fn detection_error_prob(
    sensor_type: SensorType,
    tail_mode: TailMode,
    policy: EnumerationPolicy,
    config: &SystemConfig,
) -> Result<ErrorEstimate, AnalysisError> {
    Ok(detection_curves(sensor_type, tail_mode, policy, config)?.error_at(config.tau1, config.prior_h0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfacePoint {
    pub tau1: u32,
    /// `tau2` for memoryless sensors, `tau2_agg` for aggregate ones.
    pub tau2: u64,
    pub error: ErrorEstimate,
}

#[derive(Debug, Clone)]
pub struct ThresholdSearch {
    pub best_tau1: u32,
    pub best_tau2: u64,
    pub min_error: ErrorEstimate,
    /// Row-major over the `tau2` grid, then the `tau1` grid.
    pub surface: Vec<SurfacePoint>,
}

/// Exhaustive search of the detection error over a `(tau1, tau2)` grid.
/// Ties go to the smallest `tau1`, then the smallest `tau2`.
pub fn optimize_thresholds(
    sensor_type: SensorType,
    tau1_grid: &[u32],
    tau2_grid: &[u64],
    tail_mode: TailMode,
    policy: EnumerationPolicy,
    config: &SystemConfig,
) -> Result<ThresholdSearch, AnalysisError> {
    if tau1_grid.is_empty() || tau2_grid.is_empty() {
        return Err(AnalysisError::Unsupported("empty threshold grid".into()));
    }
    if let Some(&bad) = tau1_grid.iter().find(|&&t| t > config.n_s + 1) {
        return Err(AnalysisError::Unsupported(format!("tau1 = {bad} outside [0, N_s + 1]")));
    }
    let base = ActivationModel::new(config, sensor_type, tail_mode)?;
    let curves: Vec<DetectionCurves> = tau2_grid
        .par_iter()
        .map(|&tau2| detection_curves_with(&base.clone().with_threshold(tau2), policy, config))
        .collect::<Result<_, _>>()?;

    let mut surface = Vec::with_capacity(tau1_grid.len() * tau2_grid.len());
    for (&tau2, c) in tau2_grid.iter().zip(&curves) {
        for &tau1 in tau1_grid {
            surface.push(SurfacePoint {
                tau1,
                tau2,
                error: c.error_at(tau1, config.prior_h0),
            });
        }
    }
    let best = surface
        .iter()
        .min_by(|a, b| {
            a.error
                .value
                .total_cmp(&b.error.value)
                .then(a.tau1.cmp(&b.tau1))
                .then(a.tau2.cmp(&b.tau2))
        })
        .copied()
        .expect("non-empty grid");
    Ok(ThresholdSearch {
        best_tau1: best.tau1,
        best_tau2: best.tau2,
        min_error: best.error,
        surface,
    })
}
