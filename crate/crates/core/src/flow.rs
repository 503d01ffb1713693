//! Advisory check of the laminar, cross-section-uniform flow assumptions.

use crate::config::SystemConfig;

/// Reynolds number above which the flow is no longer treated as laminar.
pub const LAMINAR_REYNOLDS_LIMIT: f64 = 2300.0;

/// Factor by which `D * delta_x` must exceed `v * a_c^2`.
pub const DISPERSION_MARGIN: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FlowReport {
    /// No fluid properties were configured.
    Unchecked,
    Checked {
        reynolds: f64,
        laminar_ok: bool,
        /// `v * a_c^2 / (D * delta_x)`; small means markers spread across the
        /// cross-section before they are sampled.
        dispersion_ratio: f64,
        dispersion_ok: bool,
    },
}

/// Never fails; the result is informational only.
pub fn validate_flow_regime(config: &SystemConfig) -> FlowReport {
    let Some(fc) = config.flow_check else {
        return FlowReport::Unchecked;
    };
    let reynolds = fc.rho * config.v * fc.d_e / fc.eta;
    let dispersion_ratio = config.v * config.a_c * config.a_c / (config.d * fc.delta_x);
    FlowReport::Checked {
        reynolds,
        laminar_ok: reynolds < LAMINAR_REYNOLDS_LIMIT,
        dispersion_ratio,
        dispersion_ok: dispersion_ratio * DISPERSION_MARGIN < 1.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::FlowCheck;

    fn water(v: f64) -> SystemConfig {
        let mut cfg = SystemConfig::reference_defaults();
        cfg.v = v;
        cfg.flow_check = Some(FlowCheck {
            rho: 1000.0,
            eta: 1e-3,
            d_e: 0.1,
            delta_x: 600.0,
        });
        cfg
    }

    #[test]
    fn slow_water_is_laminar() {
        match validate_flow_regime(&water(0.02)) {
            FlowReport::Checked {
                reynolds,
                laminar_ok,
                dispersion_ok,
                ..
            } => {
                assert!((reynolds - 2000.0).abs() < 1e-9);
                assert!(laminar_ok);
                // 0.02 * 0.0025 = 5e-5 against 1e-6 * 600 = 6e-4: ratio 0.083
                assert!(dispersion_ok);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn fast_water_is_turbulent() {
        match validate_flow_regime(&water(1.0)) {
            FlowReport::Checked {
                reynolds,
                laminar_ok,
                dispersion_ok,
                ..
            } => {
                assert!((reynolds - 100_000.0).abs() < 1e-6);
                assert!(!laminar_ok);
                assert!(!dispersion_ok);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn missing_fluid_properties() {
        assert_eq!(
            validate_flow_regime(&SystemConfig::reference_defaults()),
            FlowReport::Unchecked
        );
    }
}
