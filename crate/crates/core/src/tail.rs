//! Tail probabilities of marker counts.

use statrs::function::gamma::gamma_lr;
use std::f64::consts::SQRT_2;
use std::fmt;

/// How the upper tail of a Poisson marker count is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TailMode {
    /// Exact Poisson upper tail.
    ExactPoisson,
    /// `Q((threshold - mean) / sqrt(mean))`, the normal approximation with
    /// variance equal to the mean and no continuity correction.
    GaussianApprox,
}

impl fmt::Display for TailMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TailMode::ExactPoisson => "exact",
            TailMode::GaussianApprox => "gauss",
        })
    }
}

/// Standard normal upper tail `P(N(0,1) > x)`.
pub fn gaussian_tail_q(x: f64) -> f64 {
    0.5 * libm::erfc(x / SQRT_2)
}

/// `P(Y >= threshold)` for `Y ~ Poisson(mean)`.
pub fn count_tail(threshold: u64, mean: f64, mode: TailMode) -> f64 {
    tail_at(threshold as f64, mean, mode)
}

/// Same as [`count_tail`] for a real-valued threshold. The exact mode compares
/// the integer count against `ceil(threshold)`; the Gaussian mode treats the
/// count as continuous.
pub fn tail_at(threshold: f64, mean: f64, mode: TailMode) -> f64 {
    debug_assert!(mean >= 0.0, "negative Poisson mean {mean}");
    if threshold <= 0.0 {
        return 1.0;
    }
    if threshold == f64::INFINITY {
        return 0.0;
    }
    if mean <= 0.0 {
        return 0.0;
    }
    match mode {
        TailMode::ExactPoisson => {
            // P(Y >= k) = P(k, mean), the regularized lower incomplete gamma
            gamma_lr(threshold.ceil(), mean).clamp(0.0, 1.0)
        }
        TailMode::GaussianApprox => gaussian_tail_q((threshold - mean) / mean.sqrt()),
    }
}

/// `P(lo <= Y < hi)` with the conventions of [`tail_at`].
pub fn interval_prob(lo: f64, hi: f64, mean: f64, mode: TailMode) -> f64 {
    (tail_at(lo, mean, mode) - tail_at(hi, mean, mode)).max(0.0)
}
