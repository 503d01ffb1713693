//! Marker source vectors and their multinomial law.
//!
//! `r_i` counts the sensors whose own sensing fired (directly at the
//! abnormality or falsely) during slot `i`; these are exactly the sensors that
//! release markers. The remaining `N_s - sum(r)` sensors form category `K+1`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use statrs::function::factorial::ln_factorial;

use crate::config::SystemConfig;
use crate::numeric::{binomial_upper_tail, xlogp, CompensatedSum};
use crate::AnalysisError;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SourceVector(Vec<u32>);

impl SourceVector {
    pub fn new(counts: Vec<u32>) -> Self {
        SourceVector(counts)
    }

    pub fn zeros(k: usize) -> Self {
        SourceVector(vec![0; k])
    }

    /// Entries `r_1..r_K`.
    pub fn counts(&self) -> &[u32] {
        &self.0
    }

    /// Number of marker sources `n_1 = sum(r)`.
    pub fn total(&self) -> u32 {
        self.0.iter().sum()
    }

    /// `r_slot` for a 1-based slot.
    pub fn at(&self, slot: usize) -> u32 {
        self.0[slot - 1]
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_valid_for(&self, n_s: u32) -> bool {
        self.total() <= n_s
    }
}

impl From<Vec<u32>> for SourceVector {
    fn from(v: Vec<u32>) -> Self {
        SourceVector(v)
    }
}

/// Which law generated the slot probabilities.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlotHypothesis {
    H0,
    /// Abnormality in slot `j_star` (1-based).
    H1 {
        j_star: usize,
    },
}

/// Category probabilities `p_1..p_{K+1}` of the multinomial source law.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotProbs {
    p: Vec<f64>,
    pub hypothesis: SlotHypothesis,
}

impl SlotProbs {
    /// All `K + 1` probabilities, the last one being "never fired".
    pub fn probs(&self) -> &[f64] {
        &self.p
    }

    /// `p_i` for a 1-based category `1..=K+1`.
    pub fn at(&self, i: usize) -> f64 {
        self.p[i - 1]
    }

    pub fn k(&self) -> usize {
        self.p.len() - 1
    }

    pub fn never_fired(&self) -> f64 {
        self.p[self.p.len() - 1]
    }
}

/// No abnormality: a sensor first fires falsely in slot `i` with probability
/// `delta (1 - delta)^(i-1)`.
pub fn slot_probs_h0(config: &SystemConfig) -> SlotProbs {
    let k = config.slot_count();
    let d = config.delta;
    let mut p: Vec<f64> = (1..=k).map(|i| d * (1.0 - d).powi(i as i32 - 1)).collect();
    p.push((1.0 - d).powi(k as i32));
    SlotProbs {
        p,
        hypothesis: SlotHypothesis::H0,
    }
}

/// Abnormality in slot `j_star`: at that slot a sensor is activated directly
/// with probability `alpha` or falsely with probability `delta`, the two
/// outcomes being exclusive.
///
/// # Panics
///
/// If `j_star` is outside `1..=K`.
pub fn slot_probs_h1(j_star: usize, config: &SystemConfig) -> SlotProbs {
    let k = config.slot_count();
    assert!((1..=k).contains(&j_star), "abnormality slot {j_star} outside 1..={k}");
    let (a, d) = (config.alpha, config.delta);
    let survive = (1.0 - a - d).max(0.0);
    let mut p: Vec<f64> = (1..=k)
        .map(|i| {
            if i < j_star {
                d * (1.0 - d).powi(i as i32 - 1)
            } else if i == j_star {
                (a + d) * (1.0 - d).powi(j_star as i32 - 1)
            } else {
                d * survive * (1.0 - d).powi(i as i32 - 2)
            }
        })
        .collect();
    p.push(survive * (1.0 - d).powi(k as i32 - 1));
    SlotProbs {
        p,
        hypothesis: SlotHypothesis::H1 { j_star },
    }
}

/// `ln Pr{R = r}`; `-inf` when `r` puts sensors in an impossible category.
pub fn source_vector_ln_pmf(r: &SourceVector, probs: &SlotProbs, n_s: u32) -> f64 {
    debug_assert_eq!(r.len(), probs.k());
    let total = r.total();
    debug_assert!(total <= n_s);
    let rest = n_s - total;
    let mut ln = ln_factorial(u64::from(n_s)) - ln_factorial(u64::from(rest));
    for (&ri, &pi) in r.counts().iter().zip(probs.probs()) {
        if ri > 0 && pi <= 0.0 {
            return f64::NEG_INFINITY;
        }
        ln += xlogp(u64::from(ri), pi) - ln_factorial(u64::from(ri));
    }
    if rest > 0 && probs.never_fired() <= 0.0 {
        return f64::NEG_INFINITY;
    }
    ln + xlogp(u64::from(rest), probs.never_fired())
}

/// Multinomial probability of the source vector, computed in log space.
pub fn source_vector_pmf(r: &SourceVector, probs: &SlotProbs, config: &SystemConfig) -> Result<f64, AnalysisError> {
    if r.len() != probs.k() {
        return Err(AnalysisError::Unsupported(format!(
            "source vector has {} entries, expected K={}",
            r.len(),
            probs.k()
        )));
    }
    if !r.is_valid_for(config.n_s) {
        return Err(AnalysisError::Unsupported(format!(
            "source vector holds {} sensors but only N_s={} exist",
            r.total(),
            config.n_s
        )));
    }
    Ok(source_vector_ln_pmf(r, probs, config.n_s).exp())
}

/// Default cap on the number of vectors an exact enumeration may visit.
pub const DEFAULT_EXACT_BUDGET: u64 = 5_000_000;

/// How the sum over source vectors is realized.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnumerationPolicy {
    /// Every vector with `sum(r) <= N_s`.
    Exact { budget: u64 },
    /// Every vector with `sum(r) <= cap`, plus a bound on the omitted mass.
    Truncated { cap: u32 },
    /// `n` i.i.d. draws from the multinomial.
    Sampled { n: u64, seed: u64 },
}

impl EnumerationPolicy {
    pub fn exact() -> Self {
        EnumerationPolicy::Exact {
            budget: DEFAULT_EXACT_BUDGET,
        }
    }

    pub fn label(&self) -> String {
        match self {
            EnumerationPolicy::Exact { .. } => "exact".to_string(),
            EnumerationPolicy::Truncated { cap } => format!("truncated:{cap}"),
            EnumerationPolicy::Sampled { n, .. } => format!("sampled:{n}"),
        }
    }
}

/// `C(n + k, k)`: the number of vectors with `k` entries summing to at most `n`.
pub fn source_vector_count(n: u32, k: usize) -> u128 {
    let mut c: u128 = 1;
    for i in 1..=k as u128 {
        c = c.saturating_mul(u128::from(n) + i) / i;
    }
    c
}

/// All `K`-entry vectors with `sum <= cap`, ordered by total and, within one
/// total, by decreasing first entry.
#[derive(Debug, Clone)]
pub struct SourceVectors {
    current: Vec<u32>,
    total: u32,
    cap: u32,
    done: bool,
}

impl SourceVectors {
    pub fn new(k: usize, cap: u32) -> Self {
        SourceVectors {
            current: vec![0; k],
            total: 0,
            cap,
            done: k == 0,
        }
    }

    fn advance(&mut self) {
        let k = self.current.len();
        // rightmost position before the last one holding a unit that can move right
        if let Some(i) = (0..k.saturating_sub(1)).rev().find(|&i| self.current[i] > 0) {
            let tail: u32 = self.current[i + 1..].iter().sum();
            self.current[i] -= 1;
            for c in &mut self.current[i + 1..] {
                *c = 0;
            }
            self.current[i + 1] = tail + 1;
        } else if self.total < self.cap {
            self.total += 1;
            self.current.iter_mut().for_each(|c| *c = 0);
            self.current[0] = self.total;
        } else {
            self.done = true;
        }
    }
}

impl Iterator for SourceVectors {
    type Item = SourceVector;

    fn next(&mut self) -> Option<SourceVector> {
        if self.done {
            return None;
        }
        let out = SourceVector(self.current.clone());
        self.advance();
        Some(out)
    }
}

/// A stream of source vectors realizing an [`EnumerationPolicy`].
pub enum SourceStream {
    Enumerated(SourceVectors),
    Sampled(Box<SampledSources>),
}

impl Iterator for SourceStream {
    type Item = SourceVector;

    fn next(&mut self) -> Option<SourceVector> {
        match self {
            SourceStream::Enumerated(it) => it.next(),
            SourceStream::Sampled(it) => it.next(),
        }
    }
}

/// Lazily draws source vectors from the multinomial law.
pub struct SampledSources {
    sampler: MultinomialSampler,
    rng: ChaCha8Rng,
    remaining: u64,
}

impl Iterator for SampledSources {
    type Item = SourceVector;

    fn next(&mut self) -> Option<SourceVector> {
        if self.remaining == 0 {
            return None;
        }
        self.remaining -= 1;
        Some(self.sampler.draw(&mut self.rng))
    }
}

/// Streams the vectors selected by `policy`. Sampled streams draw from `probs`.
pub fn enumerate_source_vectors(
    config: &SystemConfig,
    probs: &SlotProbs,
    policy: EnumerationPolicy,
) -> Result<SourceStream, AnalysisError> {
    let k = config.slot_count();
    match policy {
        EnumerationPolicy::Exact { budget } => {
            let count = source_vector_count(config.n_s, k);
            if count > u128::from(budget) {
                return Err(AnalysisError::OverBudget { count, budget });
            }
            Ok(SourceStream::Enumerated(SourceVectors::new(k, config.n_s)))
        }
        EnumerationPolicy::Truncated { cap } => {
            Ok(SourceStream::Enumerated(SourceVectors::new(k, cap.min(config.n_s))))
        }
        EnumerationPolicy::Sampled { n, seed } => Ok(SourceStream::Sampled(Box::new(SampledSources {
            sampler: MultinomialSampler::new(probs, config.n_s),
            rng: ChaCha8Rng::seed_from_u64(seed),
            remaining: n,
        }))),
    }
}

/// Draws `R` by sequential conditional binomials.
#[derive(Debug, Clone)]
pub struct MultinomialSampler {
    p: Vec<f64>,
    n_s: u32,
}

impl MultinomialSampler {
    pub fn new(probs: &SlotProbs, n_s: u32) -> Self {
        MultinomialSampler {
            p: probs.probs()[..probs.k()].to_vec(),
            n_s,
        }
    }

    pub fn draw<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> SourceVector {
        let mut left = u64::from(self.n_s);
        let mut mass = 1.0;
        let counts = self
            .p
            .iter()
            .map(|&pi| {
                if left == 0 || pi <= 0.0 {
                    mass -= pi;
                    return 0;
                }
                let cond = (pi / mass).clamp(0.0, 1.0);
                mass -= pi;
                let x = Binomial::new(left, cond).expect("valid binomial").sample(rng);
                left -= x;
                x as u32
            })
            .collect();
        SourceVector(counts)
    }
}

/// Result of averaging a vector-valued function of `R`.
#[derive(Debug, Clone)]
pub(crate) struct Expectation {
    pub mean: Vec<f64>,
    pub stderr: Vec<f64>,
    /// Upper bound on the probability mass left out by truncation.
    pub residual: f64,
    /// Number of sampled vectors; 0 when enumerated.
    pub samples: u64,
}

const SAMPLE_BATCH: u64 = 1024;

/// `E[f(R)]` under `probs`, optionally conditioned on `R_slot >= 1`.
///
/// `f` writes `dim` values into the provided buffer. Enumerated sums use
/// compensated accumulation; sampled estimates run in fixed-size batches with
/// one RNG stream per batch so the result does not depend on thread count.
pub(crate) fn expect_over_sources<F>(
    config: &SystemConfig,
    probs: &SlotProbs,
    policy: EnumerationPolicy,
    require_slot: Option<usize>,
    stream: u64,
    dim: usize,
    f: F,
) -> Result<Expectation, AnalysisError>
where
    F: Fn(&SourceVector, &mut [f64]) + Sync,
{
    let n_s = config.n_s;
    let k = config.slot_count();
    let condition_mass = match require_slot {
        Some(slot) => 1.0 - (1.0 - probs.at(slot)).powi(n_s as i32),
        None => 1.0,
    };
    if condition_mass <= 0.0 {
        return Err(AnalysisError::Unsupported(
            "conditioning event has zero probability".to_string(),
        ));
    }
    let keep = |r: &SourceVector| require_slot.is_none_or(|s| r.at(s) > 0);

    match policy {
        EnumerationPolicy::Exact { .. } | EnumerationPolicy::Truncated { .. } => {
            let (cap, residual) = match policy {
                EnumerationPolicy::Exact { budget } => {
                    let count = source_vector_count(n_s, k);
                    if count > u128::from(budget) {
                        return Err(AnalysisError::OverBudget { count, budget });
                    }
                    (n_s, 0.0)
                }
                EnumerationPolicy::Truncated { cap } => {
                    let cap = cap.min(n_s);
                    // sum(R) ~ Binomial(N_s, 1 - p_{K+1})
                    let omitted = binomial_upper_tail(u64::from(n_s), 1.0 - probs.never_fired(), u64::from(cap) + 1);
                    (cap, (omitted / condition_mass).min(1.0))
                }
                EnumerationPolicy::Sampled { .. } => unreachable!(),
            };
            let mut sums = vec![CompensatedSum::new(); dim];
            let mut buf = vec![0.0; dim];
            for r in SourceVectors::new(k, cap).filter(|r| keep(r)) {
                let w = source_vector_ln_pmf(&r, probs, n_s).exp();
                if w == 0.0 {
                    continue;
                }
                f(&r, &mut buf);
                for (s, &x) in sums.iter_mut().zip(&buf) {
                    s.add(w * x);
                }
            }
            Ok(Expectation {
                mean: sums.iter().map(|s| s.value() / condition_mass).collect(),
                stderr: vec![0.0; dim],
                residual,
                samples: 0,
            })
        }
        EnumerationPolicy::Sampled { n, seed } => {
            if n == 0 {
                return Err(AnalysisError::Unsupported("sampled policy with n = 0".into()));
            }
            let sampler = MultinomialSampler::new(probs, n_s);
            let batches = n.div_ceil(SAMPLE_BATCH);
            let partial: Vec<(Vec<CompensatedSum>, Vec<CompensatedSum>)> = (0..batches)
                .into_par_iter()
                .map(|b| {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    rng.set_stream((stream << 32) | b);
                    let size = SAMPLE_BATCH.min(n - b * SAMPLE_BATCH);
                    let mut s1 = vec![CompensatedSum::new(); dim];
                    let mut s2 = vec![CompensatedSum::new(); dim];
                    let mut buf = vec![0.0; dim];
                    for _ in 0..size {
                        let r = loop {
                            let r = sampler.draw(&mut rng);
                            if keep(&r) {
                                break r;
                            }
                        };
                        f(&r, &mut buf);
                        for d in 0..dim {
                            s1[d].add(buf[d]);
                            s2[d].add(buf[d] * buf[d]);
                        }
                    }
                    (s1, s2)
                })
                .collect();
            let nf = n as f64;
            let mut mean = vec![0.0; dim];
            let mut stderr = vec![0.0; dim];
            for d in 0..dim {
                let s1: CompensatedSum = partial.iter().map(|(a, _)| a[d].value()).collect();
                let s2: CompensatedSum = partial.iter().map(|(_, b)| b[d].value()).collect();
                let m = s1.value() / nf;
                let var = if n > 1 {
                    ((s2.value() - nf * m * m) / (nf - 1.0)).max(0.0)
                } else {
                    0.0
                };
                mean[d] = m;
                stderr[d] = (var / nf).sqrt();
            }
            Ok(Expectation {
                mean,
                stderr,
                residual: 0.0,
                samples: n,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(n_s: u32, k: usize, delta: f64) -> SystemConfig {
        let mut c = SystemConfig::reference_defaults();
        c.n_s = n_s;
        c.x_fc = c.x_0 + k as f64 * c.v * c.t;
        c.delta = delta;
        c
    }

    #[test]
    fn h0_probabilities() {
        let p = slot_probs_h0(&cfg(5, 4, 0.0));
        assert_eq!(p.probs(), &[0.0, 0.0, 0.0, 0.0, 1.0]);
        let p = slot_probs_h0(&cfg(5, 4, 0.002));
        assert!((p.at(2) - 0.001996).abs() < 1e-15);
        assert!((p.probs().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn h1_probabilities() {
        let mut c = cfg(10, 5, 0.002);
        c.alpha = 0.3;
        let p = slot_probs_h1(3, &c);
        assert!((p.at(3) - 0.302 * 0.998 * 0.998).abs() < 1e-12);
        assert!((p.at(3) - 0.300793).abs() < 1e-6);
        assert!((p.probs().iter().sum::<f64>() - 1.0).abs() < 1e-12);

        c.alpha = 0.0;
        let h0 = slot_probs_h0(&c);
        let h1 = slot_probs_h1(4, &c);
        for i in 1..4 {
            assert_eq!(h1.at(i), h0.at(i));
        }
        assert!((h1.probs().iter().sum::<f64>() - 1.0).abs() < 1e-12);

        c.alpha = 0.8;
        c.delta = 0.0;
        let h1 = slot_probs_h1(2, &c);
        assert_eq!(h1.probs(), &[0.0, 0.8, 0.0, 0.0, 0.0, 1.0 - 0.8]);
    }

    #[test]
    fn pmf_small_cases() {
        let mut c = cfg(2, 1, 0.5);
        c.alpha = 0.0;
        let p = slot_probs_h0(&c);
        let v = source_vector_pmf(&SourceVector::new(vec![1]), &p, &c).unwrap();
        assert!((v - 0.5).abs() < 1e-15);

        let c = cfg(6, 5, 0.0);
        let p = slot_probs_h0(&c);
        assert_eq!(source_vector_pmf(&SourceVector::zeros(5), &p, &c).unwrap(), 1.0);
        assert!(source_vector_pmf(&SourceVector::new(vec![7, 0, 0, 0, 0]), &p, &c).is_err());
    }

    #[test]
    fn enumeration_order_and_count() {
        let all: Vec<Vec<u32>> = SourceVectors::new(2, 2).map(|r| r.counts().to_vec()).collect();
        assert_eq!(
            all,
            vec![vec![0, 0], vec![1, 0], vec![0, 1], vec![2, 0], vec![1, 1], vec![0, 2]]
        );
        assert_eq!(SourceVectors::new(5, 6).count(), 462);
        assert_eq!(source_vector_count(6, 5), 462);
        assert_eq!(source_vector_count(20, 10), 30_045_015);
        let only: Vec<_> = SourceVectors::new(4, 0).collect();
        assert_eq!(only, vec![SourceVector::zeros(4)]);
        let single: Vec<_> = SourceVectors::new(1, 3).map(|r| r.total()).collect();
        assert_eq!(single, vec![0, 1, 2, 3]);
    }

    #[test]
    fn enumeration_is_duplicate_free() {
        let all: std::collections::HashSet<_> = SourceVectors::new(4, 5).collect();
        assert_eq!(all.len() as u128, source_vector_count(5, 4));
    }

    #[test]
    fn exact_pmf_sums_to_one() {
        let mut c = cfg(5, 4, 0.05);
        c.alpha = 0.3;
        for probs in [slot_probs_h0(&c), slot_probs_h1(2, &c)] {
            let total: CompensatedSum = SourceVectors::new(4, 5)
                .map(|r| source_vector_pmf(&r, &probs, &c).unwrap())
                .collect();
            assert!((total.value() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn over_budget_exact_is_refused() {
        let c = SystemConfig::reference_defaults();
        let probs = slot_probs_h0(&c);
        let err = enumerate_source_vectors(&c, &probs, EnumerationPolicy::Exact { budget: 1000 });
        assert!(matches!(err, Err(AnalysisError::OverBudget { .. })));
    }

    #[test]
    fn truncation_residual_bounds_omitted_mass() {
        let mut c = cfg(6, 5, 0.08);
        c.alpha = 0.4;
        for probs in [slot_probs_h0(&c), slot_probs_h1(3, &c)] {
            for cap in 0..6 {
                let kept = expect_over_sources(
                    &c,
                    &probs,
                    EnumerationPolicy::Truncated { cap },
                    None,
                    0,
                    1,
                    |_, out| out[0] = 1.0,
                )
                .unwrap();
                let omitted = 1.0 - kept.mean[0];
                assert!(
                    kept.residual + 1e-12 >= omitted,
                    "cap {cap}: {} < {omitted}",
                    kept.residual
                );
                assert!((kept.residual - omitted).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn sampled_mean_is_reproducible() {
        let mut c = cfg(6, 5, 0.05);
        c.alpha = 0.3;
        let probs = slot_probs_h1(2, &c);
        let policy = EnumerationPolicy::Sampled { n: 5000, seed: 9 };
        let run = || expect_over_sources(&c, &probs, policy, None, 3, 1, |r, out| out[0] = r.total() as f64).unwrap();
        let (a, b) = (run(), run());
        assert_eq!(a.mean, b.mean);
        let want: f64 = (1.0 - probs.never_fired()) * 6.0;
        assert!((a.mean[0] - want).abs() < 4.0 * a.stderr[0] + 1e-9);
    }

    #[test]
    fn sampled_stream_draws_valid_vectors() {
        let c = cfg(6, 5, 0.2);
        let probs = slot_probs_h0(&c);
        let stream = enumerate_source_vectors(&c, &probs, EnumerationPolicy::Sampled { n: 200, seed: 1 }).unwrap();
        let draws: Vec<_> = stream.collect();
        assert_eq!(draws.len(), 200);
        assert!(draws.iter().all(|r| r.is_valid_for(6) && r.len() == 5));
    }
}
