//! Small numerical helpers shared by the analytic modules.

use statrs::function::factorial::ln_factorial;

/// Neumaier compensated sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

impl std::iter::FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = CompensatedSum::new();
        for x in iter {
            s.add(x);
        }
        s
    }
}

/// `ln C(n, k)`.
pub fn ln_binomial(n: u64, k: u64) -> f64 {
    ln_factorial(n) - ln_factorial(k) - ln_factorial(n - k)
}

/// `x * ln(p)` with the convention `0 * ln 0 = 0`.
pub fn xlogp(x: u64, p: f64) -> f64 {
    if x == 0 {
        0.0
    } else {
        x as f64 * p.ln()
    }
}

/// Probability mass function of `Binomial(n, p)` for `k = 0..=n`.
pub fn binomial_pmf(n: u64, p: f64) -> Vec<f64> {
    let q = 1.0 - p;
    (0..=n)
        .map(|k| {
            if p <= 0.0 {
                return if k == 0 { 1.0 } else { 0.0 };
            }
            if q <= 0.0 {
                return if k == n { 1.0 } else { 0.0 };
            }
            (ln_binomial(n, k) + xlogp(k, p) + xlogp(n - k, q)).exp()
        })
        .collect()
}

/// `P(Binomial(n, p) >= k)`.
pub fn binomial_upper_tail(n: u64, p: f64, k: u64) -> f64 {
    if k == 0 {
        return 1.0;
    }
    if k > n {
        return 0.0;
    }
    binomial_pmf(n, p)[k as usize..]
        .iter()
        .copied()
        .collect::<CompensatedSum>()
        .value()
        .min(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let mut s = CompensatedSum::new();
        s.add(1.0);
        for _ in 0..1000 {
            s.add(1e-17);
        }
        s.add(-1.0);
        assert!((s.value() - 1e-14).abs() < 1e-20);
    }

    #[test]
    fn binomial_pmf_sums_to_one() {
        for (n, p) in [(0, 0.3), (1, 0.0), (7, 1.0), (20, 0.37)] {
            let total: f64 = binomial_pmf(n, p).iter().sum();
            assert!((total - 1.0).abs() < 1e-12);
        }
        assert!((binomial_pmf(2, 0.5)[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn binomial_tail_edges() {
        assert_eq!(binomial_upper_tail(5, 0.2, 0), 1.0);
        assert_eq!(binomial_upper_tail(5, 0.2, 6), 0.0);
        assert!((binomial_upper_tail(3, 0.5, 2) - 0.5).abs() < 1e-15);
    }
}
