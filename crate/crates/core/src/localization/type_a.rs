//! Type-A fusion center: thresholds on the marker count.

use rayon::prelude::*;

use crate::config::SystemConfig;
use crate::detection::{estimate_from, expect_over_sources, slot_probs_h1, EnumerationPolicy};
use crate::estimate::ErrorEstimate;
use crate::geometry::{build_geometry, Geometry};
use crate::localization::thresholds::{fc_marker_mean, optimal_thresholds_type_a, ThresholdVector};
use crate::numeric::{binomial_pmf, CompensatedSum};
use crate::tail::{interval_prob, TailMode};
use crate::AnalysisError;

/// Type-A error given that exactly `r` sensors released, all in slot `j_star`,
/// and the thresholds `thresholds`.
pub fn single_slot_error(
    r: u32,
    j_star: usize,
    thresholds: &ThresholdVector,
    tail_mode: TailMode,
    config: &SystemConfig,
    geometry: &Geometry,
) -> f64 {
    let mean = f64::from(r) * config.m * geometry.mu_fc(j_star) + geometry.lambda_fc;
    let hit = interval_prob(thresholds.gamma(j_star - 1), thresholds.gamma(j_star), mean, tail_mode);
    (1.0 - hit).clamp(0.0, 1.0)
}

/// `P(R = r | R >= 1)` for `R ~ Binomial(n_s, p)`, indexed by `r = 0..=n_s`.
fn positive_binomial(n_s: u32, p: f64) -> Vec<f64> {
    let mut pmf = binomial_pmf(u64::from(n_s), p);
    let mass = 1.0 - pmf[0];
    pmf[0] = 0.0;
    pmf.iter_mut().for_each(|x| *x /= mass);
    pmf
}

fn threshold_table(config: &SystemConfig, geometry: &Geometry) -> Result<Vec<ThresholdVector>, AnalysisError> {
    (1..=config.n_s)
        .map(|r| optimal_thresholds_type_a(r, config, geometry))
        .collect()
}

/// Perfect-sensing type-A error with caller-supplied thresholds per `r_{J*}`.
/// Only direct activations release, so `r_{J*} ~ Binomial(N_s, alpha)`
/// conditioned on at least one detection; `delta` is ignored.
pub fn localization_error_perfect_with<F>(
    thresholds: F,
    tail_mode: TailMode,
    config: &SystemConfig,
) -> Result<ErrorEstimate, AnalysisError>
where
    F: Fn(u32) -> Result<ThresholdVector, AnalysisError>,
{
    config.validate()?;
    if config.alpha <= 0.0 {
        return Err(AnalysisError::Unsupported(
            "alpha = 0: the abnormality is never sensed, localization undefined".into(),
        ));
    }
    let geometry = build_geometry(config)?;
    let k = geometry.k;
    let weights = positive_binomial(config.n_s, config.alpha);
    let mut total = CompensatedSum::new();
    for r in 1..=config.n_s {
        let w = weights[r as usize];
        if w == 0.0 {
            continue;
        }
        let gamma = thresholds(r)?;
        if gamma.k() != k {
            return Err(AnalysisError::Unsupported(format!(
                "{} thresholds for K = {k}",
                gamma.k()
            )));
        }
        for j in 1..=k {
            total.add(w * single_slot_error(r, j, &gamma, tail_mode, config, &geometry));
        }
    }
    Ok(ErrorEstimate::exact(total.value() / k as f64, Some(tail_mode)))
}

/// Perfect-sensing type-A error with the optimal thresholds for each `r_{J*}`.
pub fn localization_error_perfect(tail_mode: TailMode, config: &SystemConfig) -> Result<ErrorEstimate, AnalysisError> {
    config.validate_for_localization()?;
    let geometry = build_geometry(config)?;
    localization_error_perfect_with(|r| optimal_thresholds_type_a(r, config, &geometry), tail_mode, config)
}

/// Imperfect-sensing type-A error and its closed-form upper bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImperfectTypeA {
    pub error: ErrorEstimate,
    /// `(1/K) sum_j E[1 - p_N3(0) (1 - e(r_j, j))]`, with `p_N3(0)` the
    /// probability that no false activation happens outside slot `j`.
    pub upper_bound: f64,
}

/// Type-A error when sensors can fire falsely. The FC only knows the number
/// of released sensors `sum r_i` and uses the single-slot optimal thresholds
/// for that count.
pub fn localization_error_imperfect_type_a(
    tail_mode: TailMode,
    policy: EnumerationPolicy,
    config: &SystemConfig,
) -> Result<ImperfectTypeA, AnalysisError> {
    config.validate_for_localization()?;
    let geometry = build_geometry(config)?;
    let k = geometry.k;
    let table = threshold_table(config, &geometry)?;

    let per_slot = (1..=k)
        .into_par_iter()
        .map(|j| {
            expect_over_sources(
                config,
                &slot_probs_h1(j, config),
                policy,
                Some(j),
                j as u64,
                1,
                |r, out| {
                    let gamma = &table[r.total() as usize - 1];
                    let mean = fc_marker_mean(r, config, &geometry);
                    let hit = interval_prob(gamma.gamma(j - 1), gamma.gamma(j), mean, tail_mode);
                    out[0] = (1.0 - hit).clamp(0.0, 1.0);
                },
            )
        })
        .collect::<Result<Vec<_>, _>>()?;
    let kf = k as f64;
    let value = per_slot.iter().map(|e| e.mean[0]).sum::<f64>() / kf;
    let stderr = per_slot.iter().map(|e| e.stderr[0].powi(2)).sum::<f64>().sqrt() / kf;
    let residual = per_slot.iter().map(|e| e.residual).sum::<f64>() / kf;
    let samples = per_slot.iter().map(|e| e.samples).sum();
    let error = estimate_from(value, stderr, samples, residual, policy, Some(tail_mode));

    let mut bound = CompensatedSum::new();
    let n_s = f64::from(config.n_s);
    for j in 1..=k {
        let p_j = slot_probs_h1(j, config).at(j);
        let weights = positive_binomial(config.n_s, p_j);
        for r in 1..=config.n_s {
            let w = weights[r as usize];
            if w == 0.0 {
                continue;
            }
            let others = n_s * (k as f64 - 1.0) - f64::from(r) * (k - j) as f64;
            let clean = (1.0 - config.delta).powf(others);
            let e = single_slot_error(r, j, &table[r as usize - 1], tail_mode, config, &geometry);
            bound.add(w * (1.0 - clean * (1.0 - e)));
        }
    }
    Ok(ImperfectTypeA {
        error,
        upper_bound: (bound.value() / kf).min(1.0),
    })
}
