//! Type-B fusion center: exact storage levels give the source vector.

use rayon::prelude::*;

use crate::config::SystemConfig;
use crate::detection::{estimate_from, expect_over_sources, slot_probs_h1, EnumerationPolicy, SourceVector};
use crate::estimate::ErrorEstimate;
use crate::AnalysisError;

/// Relative tolerance under which two log-likelihoods count as tied.
const TIE_TOLERANCE: f64 = 1e-12;

fn require_sources(r: &SourceVector) -> Result<(), AnalysisError> {
    if r.total() == 0 {
        return Err(AnalysisError::Unsupported(
            "no marker sources: nothing to localize".into(),
        ));
    }
    Ok(())
}

/// `a * b` with `0 * (-inf) = 0`.
fn weighted(a: f64, b: f64) -> f64 {
    if a == 0.0 {
        0.0
    } else {
        a * b
    }
}

/// Maximum-likelihood slot of the abnormality given the source vector.
/// The log-likelihood of `J* = m`, up to a constant, is
/// `r_m ln(1 + alpha/delta) + (N_s - sum_{i<=m} r_i) ln(1 - alpha/(1-delta))`.
/// Ties go to the largest `m`.
pub fn ml_decide_type_b(r: &SourceVector, config: &SystemConfig) -> Result<usize, AnalysisError> {
    require_sources(r)?;
    if config.delta <= 0.0 {
        return Err(AnalysisError::Unsupported(
            "delta = 0: read the slot from storage levels instead".into(),
        ));
    }
    let gain = (config.alpha / config.delta).ln_1p();
    let loss = (-config.alpha / (1.0 - config.delta)).ln_1p();
    let n_s = f64::from(config.n_s);
    let mut best = (0, f64::NEG_INFINITY);
    let mut seen = 0.0;
    for m in 1..=r.len() {
        let r_m = f64::from(r.at(m));
        seen += r_m;
        let ll = weighted(r_m, gain) + weighted(n_s - seen, loss);
        let tol = TIE_TOLERANCE * ll.abs().max(best.1.abs()).max(1.0);
        if best.1 == f64::NEG_INFINITY || ll >= best.1 - tol {
            best = (m, ll.max(best.1));
        }
    }
    Ok(best.0)
}

/// Latest slot holding the most marker sources.
pub fn argmax_decide_type_b(r: &SourceVector) -> Result<usize, AnalysisError> {
    require_sources(r)?;
    let top = *r.counts().iter().max().expect("non-empty");
    Ok(r.counts().iter().rposition(|&x| x == top).expect("max exists") + 1)
}

/// `(1 + alpha/delta) (1 - alpha/(1-delta))^(N_s - 1) > 1`, under which the ML
/// rule reduces to [`argmax_decide_type_b`].
pub fn argmax_equivalence_condition(config: &SystemConfig) -> bool {
    let gain = (config.alpha / config.delta).ln_1p();
    let loss = (-config.alpha / (1.0 - config.delta)).ln_1p();
    gain + weighted(f64::from(config.n_s) - 1.0, loss) > 0.0
}

/// Type-B decision: storage levels reveal the slot exactly without sensor
/// noise, so the argmax is used at `delta = 0` and the ML rule otherwise.
pub fn decide_type_b(r: &SourceVector, config: &SystemConfig) -> Result<usize, AnalysisError> {
    if config.delta == 0.0 {
        argmax_decide_type_b(r)
    } else {
        ml_decide_type_b(r, config)
    }
}

/// `P(ML slot != J*)` averaged over a uniform `J*`, given at least one
/// sensor sensed the abnormality at `J*`.
pub fn localization_error_type_b(
    policy: EnumerationPolicy,
    config: &SystemConfig,
) -> Result<ErrorEstimate, AnalysisError> {
    config.validate_for_localization()?;
    if config.delta == 0.0 {
        return Ok(ErrorEstimate::exact(0.0, None));
    }
    let k = config.slot_count();
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
                    let decided = ml_decide_type_b(r, config).expect("conditioned on r_j >= 1");
                    out[0] = if decided == j { 0.0 } else { 1.0 };
                },
            )
        })
        .collect::<Result<Vec<_>, _>>()?;
    let kf = k as f64;
    let value = per_slot.iter().map(|e| e.mean[0]).sum::<f64>() / kf;
    let stderr = per_slot.iter().map(|e| e.stderr[0].powi(2)).sum::<f64>().sqrt() / kf;
    let residual = per_slot.iter().map(|e| e.residual).sum::<f64>() / kf;
    let samples = per_slot.iter().map(|e| e.samples).sum();
    Ok(estimate_from(value, stderr, samples, residual, policy, None))
}
