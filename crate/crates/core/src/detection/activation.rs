//! Cooperative activation of sensors by markers.

use std::fmt;

use crate::config::SystemConfig;
use crate::detection::source::SourceVector;
use crate::geometry::{build_geometry, Geometry};
use crate::numeric::binomial_pmf;
use crate::tail::{count_tail, TailMode};
use crate::ConfigError;

/// How a sensor turns marker samples into an activation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SensorType {
    /// Activates when a single sample reaches `tau2`.
    Memoryless,
    /// Activates when the running sum of samples reaches `tau2_agg`.
    Aggregate,
}

impl fmt::Display for SensorType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SensorType::Memoryless => "memoryless",
            SensorType::Aggregate => "aggregate",
        })
    }
}

/// Precomputed per-config constants for evaluating activation probabilities.
#[derive(Debug, Clone)]
pub struct ActivationModel {
    pub geometry: Geometry,
    pub sensor_type: SensorType,
    pub tail_mode: TailMode,
    n_s: u32,
    markers: f64,
    lambda: f64,
    threshold: u64,
}

impl ActivationModel {
    pub fn new(config: &SystemConfig, sensor_type: SensorType, tail_mode: TailMode) -> Result<Self, ConfigError> {
        let geometry = build_geometry(config)?;
        let threshold = match sensor_type {
            SensorType::Memoryless => config.tau2,
            SensorType::Aggregate => config.aggregate_threshold(),
        };
        Ok(ActivationModel {
            geometry,
            sensor_type,
            tail_mode,
            n_s: config.n_s,
            markers: config.m,
            lambda: config.lambda,
            threshold,
        })
    }

    pub fn with_threshold(mut self, threshold: u64) -> Self {
        self.threshold = threshold;
        self
    }

    pub fn threshold(&self) -> u64 {
        self.threshold
    }

    /// Mean marker count of the `i`-th sample (1-based):
    /// `sum_{j<=i} r_j M mu_ji + lambda`.
    pub fn sample_mean(&self, r: &SourceVector, i: usize) -> f64 {
        let signal: f64 = (1..=i)
            .map(|j| f64::from(r.at(j)) * self.geometry.mu_sensor(j, i))
            .sum();
        signal * self.markers + self.lambda
    }

    /// Probability that a sensor whose own sensing never fired is activated
    /// by markers before reaching the fusion center.
    pub fn activation_prob(&self, r: &SourceVector) -> f64 {
        let k = self.geometry.k;
        match self.sensor_type {
            SensorType::Memoryless => {
                let stay_inactive: f64 = (1..=k)
                    .map(|i| 1.0 - count_tail(self.threshold, self.sample_mean(r, i), self.tail_mode))
                    .product();
                1.0 - stay_inactive
            }
            SensorType::Aggregate => {
                let total: f64 = (1..=k).map(|i| self.sample_mean(r, i)).sum();
                count_tail(self.threshold, total, self.tail_mode)
            }
        }
    }

    /// Writes `P(N_T >= tau1 | R = r)` for `tau1 = 0..=N_s+1` into `out`.
    /// `N_T = n_1 + N_2` with `N_2 ~ Binomial(N_s - n_1, P_active)`.
    pub fn alarm_tail(&self, r: &SourceVector, out: &mut [f64]) {
        let n_s = self.n_s as usize;
        debug_assert_eq!(out.len(), n_s + 2);
        let n1 = r.total() as usize;
        let pmf = binomial_pmf((n_s - n1) as u64, self.activation_prob(r));
        out[n_s + 1] = 0.0;
        let mut acc = 0.0;
        for tau in (0..=n_s).rev() {
            if tau >= n1 {
                acc += pmf[tau - n1];
            }
            out[tau] = acc.min(1.0);
        }
        out[0] = 1.0;
    }
}

/// Probability that an otherwise inactive sensor is activated by markers.
pub fn marker_activation_prob(
    r: &SourceVector,
    sensor_type: SensorType,
    tail_mode: TailMode,
    config: &SystemConfig,
) -> Result<f64, ConfigError> {
    Ok(ActivationModel::new(config, sensor_type, tail_mode)?.activation_prob(r))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detection::source::SourceVectors;
    use proptest::prelude::*;

    fn desk() -> SystemConfig {
        let mut c = SystemConfig::reference_defaults();
        c.n_s = 6;
        c.x_fc = 300.0;
        c.lambda = 2.0;
        c.tau2 = 8;
        c.tau2_agg = Some(40);
        c
    }

    #[test]
    fn noise_only_closed_form() {
        let c = desk();
        let q = count_tail(c.tau2, c.lambda, TailMode::ExactPoisson);
        let want = 1.0 - (1.0 - q).powi(5);
        let got = marker_activation_prob(
            &SourceVector::zeros(5),
            SensorType::Memoryless,
            TailMode::ExactPoisson,
            &c,
        )
        .unwrap();
        assert!((got - want).abs() < 1e-15);
        let agg = marker_activation_prob(
            &SourceVector::zeros(5),
            SensorType::Aggregate,
            TailMode::ExactPoisson,
            &c,
        )
        .unwrap();
        assert!((agg - count_tail(40, 10.0, TailMode::ExactPoisson)).abs() < 1e-15);
    }

    #[test]
    fn markers_without_payload_change_nothing() {
        let mut c = desk();
        c.m = 0.0;
        for st in [SensorType::Memoryless, SensorType::Aggregate] {
            let model = ActivationModel::new(&c, st, TailMode::ExactPoisson).unwrap();
            let base = model.activation_prob(&SourceVector::zeros(5));
            for r in SourceVectors::new(5, 6) {
                assert_eq!(model.activation_prob(&r), base);
            }
        }
    }

    #[test]
    fn no_noise_no_sources_never_activates() {
        let mut c = desk();
        c.lambda = 0.0;
        for st in [SensorType::Memoryless, SensorType::Aggregate] {
            assert_eq!(
                marker_activation_prob(&SourceVector::zeros(5), st, TailMode::ExactPoisson, &c).unwrap(),
                0.0
            );
        }
    }

    #[test]
    fn alarm_tail_shape() {
        let c = desk();
        let model = ActivationModel::new(&c, SensorType::Memoryless, TailMode::ExactPoisson).unwrap();
        let mut out = vec![0.0; 8];
        let r = SourceVector::new(vec![0, 2, 0, 1, 0]);
        model.alarm_tail(&r, &mut out);
        assert_eq!(out[0], 1.0);
        assert!((out[3] - 1.0).abs() < 1e-12);
        assert_eq!(out[7], 0.0);
        assert!(out.windows(2).all(|w| w[1] <= w[0] + 1e-15));
    }

    proptest! {
        #[test]
        fn activation_monotone(
            r in proptest::collection::vec(0u32..3, 5),
            m in 0.0f64..5e7, dm in 0.0f64..5e7,
            lambda in 0.0f64..10.0, dl in 0.0f64..5.0,
            tau in 1u64..30,
            gauss in any::<bool>(),
        ) {
            let mode = if gauss { TailMode::GaussianApprox } else { TailMode::ExactPoisson };
            let r = SourceVector::new(r);
            for st in [SensorType::Memoryless, SensorType::Aggregate] {
                let mut c = desk();
                c.m = m;
                c.lambda = lambda;
                let at = |c: &SystemConfig, tau: u64| {
                    ActivationModel::new(c, st, mode).unwrap().with_threshold(tau).activation_prob(&r)
                };
                let base = at(&c, tau);
                let mut more_m = c.clone();
                more_m.m = m + dm;
                let mut more_l = c.clone();
                more_l.lambda = lambda + dl;
                prop_assert!(at(&more_m, tau) + 1e-12 >= base);
                prop_assert!(at(&more_l, tau) + 1e-12 >= base);
                prop_assert!(at(&c, tau + 1) <= base + 1e-12);
            }
        }
    }
}
