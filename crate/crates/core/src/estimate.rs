//! Error probabilities together with how they were obtained.

use std::fmt;

use crate::tail::TailMode;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Provenance {
    /// Closed form summed over every source vector.
    AnalyticExact,
    /// Closed form summed over source vectors with at most `cap` marker
    /// sources; the omitted probability mass is at most `residual_bound`.
    AnalyticTruncated { cap: u32, residual_bound: f64 },
    /// Closed form averaged over sampled source vectors.
    AnalyticSampled,
    /// End-to-end Monte-Carlo simulation.
    MonteCarlo,
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Provenance::AnalyticExact => f.write_str("analytic-exact"),
            Provenance::AnalyticTruncated { cap, .. } => write!(f, "analytic-truncated:{cap}"),
            Provenance::AnalyticSampled => f.write_str("analytic-sampled"),
            Provenance::MonteCarlo => f.write_str("monte-carlo"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorEstimate {
    pub value: f64,
    /// Zero for exact and truncated analytic values.
    pub stderr: f64,
    /// Number of sampled source vectors or simulated trials; 0 when analytic.
    pub n_trials: u64,
    pub provenance: Provenance,
    /// `None` for Monte-Carlo estimates, which always draw exact Poisson counts.
    pub tail_mode: Option<TailMode>,
}

impl ErrorEstimate {
    pub fn exact(value: f64, tail_mode: Option<TailMode>) -> Self {
        ErrorEstimate {
            value: value.clamp(0.0, 1.0),
            stderr: 0.0,
            n_trials: 0,
            provenance: Provenance::AnalyticExact,
            tail_mode,
        }
    }

    /// Binomial-frequency estimate `errors / n` with stderr `sqrt(p(1-p)/n)`.
    pub fn monte_carlo(errors: u64, n: u64) -> Self {
        let (value, stderr) = if n == 0 {
            (0.0, 0.0)
        } else {
            let p = errors as f64 / n as f64;
            (p, (p * (1.0 - p) / n as f64).sqrt())
        };
        ErrorEstimate {
            value,
            stderr,
            n_trials: n,
            provenance: Provenance::MonteCarlo,
            tail_mode: None,
        }
    }

    pub fn residual_bound(&self) -> f64 {
        match self.provenance {
            Provenance::AnalyticTruncated { residual_bound, .. } => residual_bound,
            _ => 0.0,
        }
    }

    /// Cross-validation rule: the two estimates differ by at most
    /// `max(floor, 4 * combined stderr)` plus any truncation residual.
    pub fn agrees_with(&self, other: &ErrorEstimate, floor: f64) -> bool {
        let stderr = (self.stderr.powi(2) + other.stderr.powi(2)).sqrt();
        let slack = self.residual_bound() + other.residual_bound();
        (self.value - other.value).abs() <= floor.max(4.0 * stderr) + slack
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn monte_carlo_stderr() {
        let e = ErrorEstimate::monte_carlo(25, 100);
        assert_eq!(e.value, 0.25);
        assert!((e.stderr - (0.25f64 * 0.75 / 100.0).sqrt()).abs() < 1e-15);
        let z = ErrorEstimate::monte_carlo(0, 1000);
        assert_eq!((z.value, z.stderr), (0.0, 0.0));
    }

    #[test]
    fn agreement_rule() {
        let a = ErrorEstimate::exact(0.100, None);
        let b = ErrorEstimate::monte_carlo(1090, 10_000);
        assert!(a.agrees_with(&b, 0.01));
        let c = ErrorEstimate::monte_carlo(1200, 10_000);
        assert!(!a.agrees_with(&c, 0.01));
    }
}
