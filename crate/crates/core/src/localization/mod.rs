//! Localization of the abnormality to one of the `K` subregions.
//!
//! A sensor activated by sensing in slot `j` empties its storage at the end of
//! the slot and recharges at rate `beta` until it reaches the fusion center at
//! `KT`, so its level on arrival is `min(M, beta (K - j) T)`. A type-A fusion
//! center only sees which storages are not full plus one marker-count sample;
//! a type-B fusion center reads the exact levels.

mod thresholds;
mod type_a;
mod type_b;

pub use thresholds::{decide_subregion_type_a, fc_marker_mean, optimal_thresholds_type_a, ThresholdVector};
pub use type_a::{
    localization_error_imperfect_type_a, localization_error_perfect, localization_error_perfect_with,
    single_slot_error, ImperfectTypeA,
};
pub use type_b::{
    argmax_decide_type_b, argmax_equivalence_condition, decide_type_b, localization_error_type_b, ml_decide_type_b,
};

use std::fmt;

use crate::config::SystemConfig;
use crate::detection::SourceVector;
use crate::AnalysisError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FcType {
    /// Full/not-full storage states and a marker-count sample.
    TypeA,
    /// Exact storage levels.
    TypeB,
}

impl fmt::Display for FcType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FcType::TypeA => "type-a",
            FcType::TypeB => "type-b",
        })
    }
}

/// Storage level on arrival at the fusion center of a sensor that released
/// in `activation_slot`.
pub fn storage_level(activation_slot: usize, config: &SystemConfig) -> f64 {
    let k = config.slot_count();
    debug_assert!(activation_slot >= 1 && activation_slot <= k);
    let recharged = config.production_rate() * (k - activation_slot) as f64 * config.t;
    recharged.min(config.m)
}

/// Activation slot encoded by a storage level below capacity.
pub fn storage_to_slot(level: f64, config: &SystemConfig) -> Result<usize, AnalysisError> {
    if !(level >= 0.0) {
        return Err(AnalysisError::Unsupported(format!("negative storage level {level}")));
    }
    if level >= config.m {
        return Err(AnalysisError::Unsupported(format!(
            "storage level {level} is full: the sensor never released markers"
        )));
    }
    let k = config.slot_count();
    let elapsed = level / (config.production_rate() * config.t);
    let slot = (k as f64 - elapsed).round();
    if slot < 1.0 || slot > k as f64 {
        return Err(AnalysisError::Unsupported(format!(
            "storage level {level} maps outside slots 1..={k}"
        )));
    }
    Ok(slot as usize)
}

/// What the fusion center reads from the absorbed sensors.
#[derive(Debug, Clone, PartialEq)]
pub struct StorageReadout {
    pub levels: Vec<f64>,
    pub flags: Vec<bool>,
}

impl StorageReadout {
    /// Number of sensors whose storage is not full, i.e. marker sources.
    pub fn released(&self, config: &SystemConfig) -> u32 {
        self.levels.iter().filter(|&&b| b < config.m).count() as u32
    }

    /// Number of active sensors `N_T`.
    pub fn active(&self) -> u32 {
        self.flags.iter().filter(|&&f| f).count() as u32
    }

    /// Source vector recovered from the exact levels.
    pub fn source_vector(&self, config: &SystemConfig) -> Result<SourceVector, AnalysisError> {
        let mut counts = vec![0u32; config.slot_count()];
        for &level in self.levels.iter().filter(|&&b| b < config.m) {
            counts[storage_to_slot(level, config)? - 1] += 1;
        }
        Ok(SourceVector::new(counts))
    }
}
