//! Quantities derived from a validated [`SystemConfig`]: slot count, sampling
//! instants and the marker hit-probability kernel.
//!
//! Time line: slot `i` (1-based) spans `[(i-1)T, iT)`. A sensor activated
//! during slot `j` releases its markers at `jT`; the `i`-th sampling instant
//! is `iT + T_d`, so markers from slot `j` are seen after `(i-j)T + T_d`
//! seconds by every sample with `i >= j`.

use std::f64::consts::PI;

use crate::config::{ConfigError, SystemConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct Geometry {
    /// Number of slots (and subregions) between injection and the fusion center.
    pub k: usize,
    /// Length of one subregion, `vT`, m.
    pub subregion_len: f64,
    /// `t_s^i = iT + T_d` for `i = 1..=K`.
    pub sampling_times: Vec<f64>,
    /// `V_FC / V_s`.
    pub fc_scale: f64,
    /// Marker noise mean seen by the fusion center.
    pub lambda_fc: f64,
    /// Sensor-side hit probability indexed by lag `i - j`, `0..K`.
    mu_sensor: Vec<f64>,
}

/// Validates `config` and derives its geometry.
pub fn build_geometry(config: &SystemConfig) -> Result<Geometry, ConfigError> {
    config.validate()?;
    let k = config.slot_count();
    let sampling_times = (1..=k).map(|i| i as f64 * config.t + config.t_d).collect();
    let fc_scale = config.v_fc / config.v_s;
    let mu_sensor = (0..k).map(|lag| hit_prob_for_lag(lag, config.v_s, config)).collect();
    Ok(Geometry {
        k,
        subregion_len: config.v * config.t,
        sampling_times,
        fc_scale,
        lambda_fc: fc_scale * config.lambda,
        mu_sensor,
    })
}

fn hit_prob_for_lag(lag: usize, receiver_volume: f64, config: &SystemConfig) -> f64 {
    let elapsed = lag as f64 * config.t + config.t_d;
    receiver_volume / (4.0 * PI * config.a_c * config.a_c) / (4.0 * PI * config.d * elapsed).sqrt()
}

/// Probability that one marker released at the end of slot `release_slot` is
/// inside a receiver of volume `receiver_volume` at sampling instant
/// `sample_slot`.
///
/// # Panics
///
/// If `sample_slot < release_slot` or either index is 0: markers cannot be
/// sampled before they are released.
pub fn marker_hit_prob(release_slot: usize, sample_slot: usize, receiver_volume: f64, config: &SystemConfig) -> f64 {
    assert!(
        release_slot >= 1 && sample_slot >= release_slot,
        "marker sampled before release: j={release_slot}, i={sample_slot}"
    );
    hit_prob_for_lag(sample_slot - release_slot, receiver_volume, config)
}

impl Geometry {
    /// `mu_{j i}` for the sensor volume, `1 <= j <= i <= K`.
    pub fn mu_sensor(&self, release_slot: usize, sample_slot: usize) -> f64 {
        debug_assert!(release_slot >= 1 && sample_slot >= release_slot && sample_slot <= self.k);
        self.mu_sensor[sample_slot - release_slot]
    }

    /// `mu'_{j K}`: hit probability at the fusion center sample for markers
    /// released at the end of slot `release_slot`.
    pub fn mu_fc(&self, release_slot: usize) -> f64 {
        debug_assert!(release_slot >= 1 && release_slot <= self.k);
        self.fc_scale * self.mu_sensor[self.k - release_slot]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn reference_region_has_ten_slots() {
        let g = build_geometry(&SystemConfig::reference_defaults()).unwrap();
        assert_eq!(g.k, 10);
        assert_eq!(g.sampling_times[0], 5700.0);
        assert!(g.sampling_times.windows(2).all(|w| w[1] > w[0]));
        assert_eq!(g.fc_scale, 1.0);
        assert_eq!(g.lambda_fc, 5.0);
    }

    #[test]
    fn single_slot_region() {
        let mut cfg = SystemConfig::reference_defaults();
        cfg.x_fc = cfg.x_0 + cfg.v * cfg.t;
        assert_eq!(build_geometry(&cfg).unwrap().k, 1);
    }

    #[test]
    fn hit_probability_hand_values() {
        let cfg = SystemConfig::reference_defaults();
        // (1e-9 / (4 pi 0.05^2)) * (4 pi 1e-6 * 2700)^(-1/2)
        let direct = 1e-9 / (4.0 * PI * 0.0025) / (4.0 * PI * 1e-6 * 2700.0_f64).sqrt();
        assert!(rel(direct, 1.7281e-7) < 1e-4);
        assert!(rel(marker_hit_prob(1, 1, cfg.v_s, &cfg), 1.7281e-7) < 1e-4);
        assert!(rel(marker_hit_prob(1, 2, cfg.v_s, &cfg), 1.1894e-7) < 1e-4);
    }

    #[test]
    fn fc_volume_scales_linearly() {
        let mut cfg = SystemConfig::reference_defaults();
        cfg.v_fc = 3e-9;
        let g = build_geometry(&cfg).unwrap();
        assert!((g.lambda_fc - 3.0 * cfg.lambda).abs() < 1e-12);
        for j in 1..=g.k {
            let direct = marker_hit_prob(j, g.k, cfg.v_fc, &cfg);
            assert!(rel(g.mu_fc(j), direct) < 1e-12);
            assert!(rel(g.mu_fc(j), 3.0 * g.mu_sensor(j, g.k)) < 1e-12);
        }
    }

    #[test]
    fn hit_probability_decreases_with_lag() {
        let g = build_geometry(&SystemConfig::reference_defaults()).unwrap();
        for i in 2..=g.k {
            assert!(g.mu_sensor(1, i) < g.mu_sensor(1, i - 1));
        }
        for j in 2..=g.k {
            assert!(g.mu_fc(j) > g.mu_fc(j - 1));
        }
    }

    #[test]
    #[should_panic(expected = "before release")]
    fn sampling_before_release_panics() {
        marker_hit_prob(3, 2, 1e-9, &SystemConfig::reference_defaults());
    }
}
