//! Physical and protocol parameters of one sensory region.

use thiserror::Error;

/// Optional fluid properties used only by the advisory flow-regime check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowCheck {
    /// Fluid density, kg/m³.
    pub rho: f64,
    /// Dynamic viscosity, Pa·s.
    pub eta: f64,
    /// Equivalent channel diameter, m.
    pub d_e: f64,
    /// Minimum release-to-receive distance of markers, m.
    pub delta_x: f64,
}

/// Every parameter of one sensory region, in SI units.
///
/// Field names follow the keys of the configuration file format so that a
/// sweep axis can address any of them by name (see [`SystemConfig::set`]).
#[derive(Debug, Clone, PartialEq)]
pub struct SystemConfig {
    /// Flow velocity, m/s.
    pub v: f64,
    /// Channel radius, m.
    pub a_c: f64,
    /// Marker diffusion coefficient, m²/s.
    pub d: f64,
    /// Slot duration, s.
    pub t: f64,
    /// Sampling shift after each slot boundary, s.
    pub t_d: f64,
    /// Injection point, m.
    pub x_0: f64,
    /// Fusion-center location, m.
    pub x_fc: f64,
    /// Number of injected sensors.
    pub n_s: u32,
    /// Probability that a sensor passing the abnormality is activated by it.
    pub alpha: f64,
    /// Per-slot false-activation probability.
    pub delta: f64,
    /// Mean marker-noise count in one sensor sampling volume.
    pub lambda: f64,
    /// Sensor sampling volume, m³.
    pub v_s: f64,
    /// Fusion-center sampling volume, m³.
    pub v_fc: f64,
    /// Storage capacity, molecules.
    pub m: f64,
    /// Marker production rate, molecules/s. `None` derives it from `m` and `k_s`.
    pub beta: Option<f64>,
    /// Slots needed to fill an empty storage. `None` means `K + 1`.
    pub k_s: Option<u32>,
    /// Fusion-center threshold on the number of active sensors.
    pub tau1: u32,
    /// Memoryless sensor threshold on one marker sample.
    pub tau2: u64,
    /// Aggregate sensor threshold on the summed samples. `None` means `K * tau2`.
    pub tau2_agg: Option<u64>,
    /// Prior probability of no abnormality.
    pub prior_h0: f64,
    pub flow_check: Option<FlowCheck>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("invalid `{field}`: {reason}")]
    Invalid { field: &'static str, reason: String },
    #[error("unknown parameter `{0}`")]
    UnknownKey(String),
    #[error("bad value for `{key}`: {reason}")]
    BadValue { key: String, reason: String },
}

impl ConfigError {
    fn invalid(field: &'static str, reason: impl Into<String>) -> Self {
        ConfigError::Invalid {
            field,
            reason: reason.into(),
        }
    }
}

/// Names accepted by [`SystemConfig::set`] and by the configuration file.
pub const PARAMETER_NAMES: &[&str] = &[
    "v", "a_c", "D", "T", "T_d", "x_0", "x_FC", "N_s", "alpha", "delta", "lambda", "V_s", "V_FC", "M", "beta", "K_s",
    "tau1", "tau2", "tau2_agg", "prior_h0", "rho", "eta", "d_e", "delta_x",
];

impl SystemConfig {
    /// The reference parameter set: 20 sensors over a
    /// 600 m region sliced into 50-minute slots.
    pub fn reference_defaults() -> Self {
        SystemConfig {
            v: 0.02,
            a_c: 0.05,
            d: 1e-6,
            t: 3000.0,
            t_d: 2700.0,
            x_0: 0.0,
            x_fc: 600.0,
            n_s: 20,
            alpha: 0.3,
            delta: 0.002,
            lambda: 5.0,
            v_s: 1e-9,
            v_fc: 1e-9,
            m: 1e7,
            beta: None,
            k_s: None,
            tau1: 1,
            tau2: 20,
            tau2_agg: None,
            prior_h0: 0.1,
            flow_check: None,
        }
    }

    /// Number of slots the sensors need to reach the fusion center.
    pub fn slot_count(&self) -> usize {
        let ratio = (self.x_fc - self.x_0) / (self.v * self.t);
        // absorb rounding of v*T so that an exact multiple is not pushed up a slot
        let k = (ratio * (1.0 - 1e-12)).ceil();
        k.max(1.0) as usize
    }

    pub fn storage_slots(&self) -> u32 {
        self.k_s.unwrap_or(self.slot_count() as u32 + 1)
    }

    pub fn production_rate(&self) -> f64 {
        self.beta
            .unwrap_or_else(|| self.m / (f64::from(self.storage_slots()) * self.t))
    }

    pub fn aggregate_threshold(&self) -> u64 {
        self.tau2_agg.unwrap_or(self.tau2 * self.slot_count() as u64)
    }

    /// Checks every invariant that does not depend on the use case.
    pub fn validate(&self) -> Result<(), ConfigError> {
        fn positive(field: &'static str, x: f64) -> Result<(), ConfigError> {
            if x.is_finite() && x > 0.0 {
                Ok(())
            } else {
                Err(ConfigError::invalid(field, format!("must be > 0, got {x}")))
            }
        }
        fn probability(field: &'static str, x: f64) -> Result<(), ConfigError> {
            if (0.0..=1.0).contains(&x) {
                Ok(())
            } else {
                Err(ConfigError::invalid(field, format!("must lie in [0, 1], got {x}")))
            }
        }

        positive("v", self.v)?;
        positive("a_c", self.a_c)?;
        positive("D", self.d)?;
        positive("T", self.t)?;
        positive("V_s", self.v_s)?;
        positive("V_FC", self.v_fc)?;
        if !(self.t_d > 0.0 && self.t_d < self.t) {
            return Err(ConfigError::invalid(
                "T_d",
                format!("must satisfy 0 < T_d < T, got T_d={} T={}", self.t_d, self.t),
            ));
        }
        if !(self.x_fc > self.x_0) || !self.x_0.is_finite() || !self.x_fc.is_finite() {
            return Err(ConfigError::invalid(
                "x_FC",
                format!("must exceed x_0, got x_FC={} x_0={}", self.x_fc, self.x_0),
            ));
        }
        if self.n_s == 0 {
            return Err(ConfigError::invalid("N_s", "at least one sensor is required"));
        }
        probability("alpha", self.alpha)?;
        probability("delta", self.delta)?;
        probability("prior_h0", self.prior_h0)?;
        if self.alpha + self.delta > 1.0 + 1e-15 {
            return Err(ConfigError::invalid(
                "alpha",
                format!("alpha + delta must not exceed 1, got {}", self.alpha + self.delta),
            ));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(ConfigError::invalid("lambda", "must be finite and >= 0"));
        }
        if !(self.m >= 0.0 && self.m.is_finite()) {
            return Err(ConfigError::invalid("M", "must be finite and >= 0"));
        }
        if let Some(beta) = self.beta {
            positive("beta", beta)?;
        }
        let k = self.slot_count();
        if let Some(k_s) = self.k_s {
            if (k_s as usize) < k {
                return Err(ConfigError::invalid(
                    "K_s",
                    format!("K_s >= K is required, got K_s={k_s} K={k}"),
                ));
            }
        }
        if self.tau1 > self.n_s + 1 {
            return Err(ConfigError::invalid(
                "tau1",
                format!("must lie in [0, N_s + 1], got {}", self.tau1),
            ));
        }
        if let Some(fc) = &self.flow_check {
            positive("rho", fc.rho)?;
            positive("eta", fc.eta)?;
            positive("d_e", fc.d_e)?;
            positive("delta_x", fc.delta_x)?;
        }
        Ok(())
    }

    /// Extra invariant for storage-based localization: a sensor that released
    /// its markers must still be below capacity when it reaches the fusion center.
    pub fn validate_for_localization(&self) -> Result<(), ConfigError> {
        self.validate()?;
        let k = self.slot_count() as f64;
        let recharge = self.production_rate() * k * self.t;
        if !(self.m > recharge) {
            return Err(ConfigError::invalid(
                "M",
                format!("localization needs M > beta*K*T, got M={} beta*K*T={recharge}", self.m),
            ));
        }
        Ok(())
    }

    /// Sets one parameter by its configuration-file name. Integer parameters
    /// accept any numeral that is an exact non-negative integer (`2e1` is 20).
    pub fn set(&mut self, key: &str, value: f64) -> Result<(), ConfigError> {
        let bad = |reason: &str| ConfigError::BadValue {
            key: key.to_string(),
            reason: reason.to_string(),
        };
        let as_int = |x: f64| -> Result<u64, ConfigError> {
            if x.is_finite() && x >= 0.0 && x.fract() == 0.0 && x <= u32::MAX as f64 * 4.0 {
                Ok(x as u64)
            } else {
                Err(bad("expected a non-negative integer"))
            }
        };
        if !value.is_finite() {
            return Err(bad("not a finite number"));
        }
        match key {
            "v" => self.v = value,
            "a_c" => self.a_c = value,
            "D" => self.d = value,
            "T" => self.t = value,
            "T_d" => self.t_d = value,
            "x_0" => self.x_0 = value,
            "x_FC" => self.x_fc = value,
            "N_s" => self.n_s = to_u32(as_int(value)?).ok_or_else(|| bad("too large"))?,
            "alpha" => self.alpha = value,
            "delta" => self.delta = value,
            "lambda" => self.lambda = value,
            "V_s" => self.v_s = value,
            "V_FC" => self.v_fc = value,
            "M" => self.m = value,
            "beta" => self.beta = Some(value),
            "K_s" => self.k_s = Some(to_u32(as_int(value)?).ok_or_else(|| bad("too large"))?),
            "tau1" => self.tau1 = to_u32(as_int(value)?).ok_or_else(|| bad("too large"))?,
            "tau2" => self.tau2 = as_int(value)?,
            "tau2_agg" => self.tau2_agg = Some(as_int(value)?),
            "prior_h0" => self.prior_h0 = value,
            "rho" | "eta" | "d_e" | "delta_x" => {
                let fc = self.flow_check.get_or_insert(FlowCheck {
                    rho: f64::NAN,
                    eta: f64::NAN,
                    d_e: f64::NAN,
                    delta_x: f64::NAN,
                });
                match key {
                    "rho" => fc.rho = value,
                    "eta" => fc.eta = value,
                    "d_e" => fc.d_e = value,
                    _ => fc.delta_x = value,
                }
            }
            _ => return Err(ConfigError::UnknownKey(key.to_string())),
        }
        Ok(())
    }
}

fn to_u32(x: u64) -> Option<u32> {
    u32::try_from(x).ok()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_defaults_are_valid() {
        let cfg = SystemConfig::reference_defaults();
        cfg.validate().unwrap();
        cfg.validate_for_localization().unwrap();
        assert_eq!(cfg.slot_count(), 10);
    }

    #[test]
    fn storage_slots_boundary() {
        let mut cfg = SystemConfig::reference_defaults();
        cfg.k_s = Some(10);
        assert!(cfg.validate().is_ok());
        cfg.k_s = Some(11);
        assert!(cfg.validate().is_ok());
        cfg.k_s = Some(9);
        let err = cfg.validate().unwrap_err();
        assert!(err.to_string().contains("K_s >= K"), "{err}");
    }

    #[test]
    fn zero_sampling_shift_rejected() {
        let mut cfg = SystemConfig::reference_defaults();
        cfg.t_d = 0.0;
        assert!(matches!(cfg.validate(), Err(ConfigError::Invalid { field: "T_d", .. })));
    }

    #[test]
    fn alpha_plus_delta_bounded() {
        let mut cfg = SystemConfig::reference_defaults();
        cfg.alpha = 0.999;
        cfg.delta = 0.002;
        assert!(matches!(
            cfg.validate(),
            Err(ConfigError::Invalid { field: "alpha", .. })
        ));
    }

    #[test]
    fn localization_needs_spare_capacity() {
        let mut cfg = SystemConfig::reference_defaults();
        cfg.k_s = Some(10);
        // M == beta*K*T exactly
        assert!(cfg.validate_for_localization().is_err());
        cfg.k_s = Some(12);
        assert!(cfg.validate_for_localization().is_ok());
    }

    #[test]
    fn set_rejects_fractional_integers_and_unknown_keys() {
        let mut cfg = SystemConfig::reference_defaults();
        assert!(cfg.set("N_s", 2.5).is_err());
        cfg.set("N_s", 2e1).unwrap();
        assert_eq!(cfg.n_s, 20);
        assert!(matches!(cfg.set("lamda", 1.0), Err(ConfigError::UnknownKey(_))));
        for name in PARAMETER_NAMES {
            let mut c = SystemConfig::reference_defaults();
            c.set(name, 1.0).unwrap();
        }
    }
}
