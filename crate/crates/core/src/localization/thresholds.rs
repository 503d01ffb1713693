use crate::config::SystemConfig;
use crate::detection::SourceVector;
use crate::geometry::Geometry;
use crate::AnalysisError;

/// Decision thresholds `0 = gamma_0 < gamma_1 < ... < gamma_{K-1} < gamma_K = inf`
/// on the fusion-center marker count.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdVector(Vec<f64>);

impl ThresholdVector {
    /// Builds a vector from the `K - 1` interior thresholds.
    pub fn from_interior(interior: &[f64]) -> Result<Self, AnalysisError> {
        let mut gamma = Vec::with_capacity(interior.len() + 2);
        gamma.push(0.0);
        gamma.extend_from_slice(interior);
        gamma.push(f64::INFINITY);
        if gamma.windows(2).any(|w| !(w[0] < w[1])) || interior.iter().any(|g| !g.is_finite()) {
            return Err(AnalysisError::Unsupported(format!(
                "thresholds must be finite and strictly increasing from 0: {interior:?}"
            )));
        }
        Ok(ThresholdVector(gamma))
    }

    /// Number of hypotheses `K`.
    pub fn k(&self) -> usize {
        self.0.len() - 1
    }

    /// `gamma_j` for `j = 0..=K`.
    pub fn gamma(&self, j: usize) -> f64 {
        self.0[j]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Subregion `j` with `gamma_{j-1} <= z < gamma_j`.
pub fn decide_subregion_type_a(z: f64, thresholds: &ThresholdVector) -> usize {
    let interior = &thresholds.0[1..thresholds.0.len() - 1];
    interior.partition_point(|&g| g <= z) + 1
}

/// Mean of the fusion-center marker count, `sum_i r_i M mu'_iK + lambda'`.
pub fn fc_marker_mean(r: &SourceVector, config: &SystemConfig, geometry: &Geometry) -> f64 {
    let signal: f64 = (1..=geometry.k).map(|i| f64::from(r.at(i)) * geometry.mu_fc(i)).sum();
    signal * config.m + geometry.lambda_fc
}

/// Thresholds at which adjacent Gaussian hypotheses `N(a_j, a_j)` and
/// `N(a_{j+1}, a_{j+1})` have equal density, with
/// `a_j = r_active M mu'_jK + lambda'`. These minimize the error of the
/// Gaussian-approximated rule when all `r_active` sources sit in one slot.
pub fn optimal_thresholds_type_a(
    r_active: u32,
    config: &SystemConfig,
    geometry: &Geometry,
) -> Result<ThresholdVector, AnalysisError> {
    if r_active == 0 {
        return Err(AnalysisError::Unsupported(
            "thresholds need at least one marker source".into(),
        ));
    }
    let strength = f64::from(r_active) * config.m;
    let mean = |j: usize| strength * geometry.mu_fc(j) + geometry.lambda_fc;
    let interior: Vec<f64> = (1..geometry.k)
        .map(|j| {
            let (a, b) = (mean(j), mean(j + 1));
            let gap = strength * (geometry.mu_fc(j + 1) - geometry.mu_fc(j));
            // ln(b/a) / (b - a) via ln_1p keeps precision when the means are close
            let log_ratio = (gap / a).ln_1p();
            (a * b * (log_ratio / gap + 1.0)).sqrt()
        })
        .collect();
    ThresholdVector::from_interior(&interior)
}
