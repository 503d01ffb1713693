//! Discrete-time Monte-Carlo simulation of the sensor network.
//!
//! Every trial is driven by its own ChaCha8 stream: the generator is seeded
//! with the scenario seed and switched to stream `(domain << 48) | trial`,
//! so results do not depend on how trials are spread over threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;

use crate::config::SystemConfig;
use crate::detection::{SensorType, SourceVector};
use crate::estimate::ErrorEstimate;
use crate::geometry::{build_geometry, Geometry};
use crate::localization::{
    argmax_decide_type_b, decide_subregion_type_a, decide_type_b, optimal_thresholds_type_a, storage_level, FcType,
    StorageReadout, ThresholdVector,
};
use crate::AnalysisError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AbnormalitySlot {
    Fixed(usize),
    /// Drawn uniformly from `1..=K` in every trial.
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Hypothesis {
    H0,
    H1(AbnormalitySlot),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Scenario {
    pub hypothesis: Hypothesis,
    pub sensor_type: SensorType,
    pub fc_type: FcType,
    pub seed: u64,
}

impl Scenario {
    pub fn new(hypothesis: Hypothesis, sensor_type: SensorType, fc_type: FcType, seed: u64) -> Self {
        Scenario {
            hypothesis,
            sensor_type,
            fc_type,
            seed,
        }
    }

    fn with_hypothesis(self, hypothesis: Hypothesis) -> Self {
        Scenario { hypothesis, ..self }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cause {
    None,
    Direct,
    SensorNoise,
    Marker,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensorRecord {
    pub flag: bool,
    pub cause: Cause,
    /// Slot of the activation that set the flag; for a sensor that sensed
    /// after being activated by markers, the sensing slot.
    pub activation_slot: Option<usize>,
    pub storage_level: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    pub sensors: Vec<SensorRecord>,
    /// Marker sources per slot.
    pub sources: SourceVector,
    pub n_total_active: u32,
    pub n_released: u32,
    pub z_fc: u64,
    pub alarm: bool,
    /// `None` when nothing was released or the configuration cannot
    /// localize (`M <= beta K T`).
    pub localization: Option<usize>,
    pub j_star: Option<usize>,
}

impl TrialOutcome {
    pub fn readout(&self) -> StorageReadout {
        StorageReadout {
            levels: self.sensors.iter().map(|s| s.storage_level).collect(),
            flags: self.sensors.iter().map(|s| s.flag).collect(),
        }
    }

    pub fn direct_count(&self) -> u32 {
        self.sensors.iter().filter(|s| s.cause == Cause::Direct).count() as u32
    }
}

/// Precomputed constants shared by all trials of one configuration.
#[derive(Debug, Clone)]
pub struct Simulator {
    config: SystemConfig,
    geometry: Geometry,
    /// Type-A thresholds indexed by released count minus one; empty when the
    /// configuration cannot localize.
    thresholds: Vec<ThresholdVector>,
}

fn poisson<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    let dist = Poisson::new(mean).expect("finite Poisson mean below the sampler limit");
    dist.sample(rng) as u64
}

impl Simulator {
    pub fn new(config: &SystemConfig) -> Result<Self, AnalysisError> {
        config.validate()?;
        let geometry = build_geometry(config)?;
        let thresholds = if config.validate_for_localization().is_ok() {
            (1..=config.n_s)
                .map(|r| optimal_thresholds_type_a(r, config, &geometry))
                .collect::<Result<_, _>>()?
        } else {
            Vec::new()
        };
        Ok(Simulator {
            config: config.clone(),
            geometry,
            thresholds,
        })
    }

    pub fn config(&self) -> &SystemConfig {
        &self.config
    }

    pub fn can_localize(&self) -> bool {
        !self.thresholds.is_empty()
    }

    /// Generator for trial `index` in stream domain `domain`.
    pub fn trial_rng(seed: u64, domain: u64, index: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream((domain << 48) | index);
        rng
    }

    /// Runs one trial with randomness drawn from `rng` only.
    pub fn run_trial<R: Rng + ?Sized>(&self, scenario: &Scenario, rng: &mut R) -> TrialOutcome {
        let c = &self.config;
        let k = self.geometry.k;
        let n_s = c.n_s as usize;
        let j_star = match scenario.hypothesis {
            Hypothesis::H0 => None,
            Hypothesis::H1(AbnormalitySlot::Fixed(j)) => {
                assert!((1..=k).contains(&j), "abnormality slot {j} outside 1..={k}");
                Some(j)
            }
            Hypothesis::H1(AbnormalitySlot::Uniform) => Some(rng.random_range(1..=k)),
        };
        let threshold = match scenario.sensor_type {
            SensorType::Memoryless => c.tau2,
            SensorType::Aggregate => c.aggregate_threshold(),
        };

        let mut sensed: Vec<Option<(usize, Cause)>> = vec![None; n_s];
        let mut marker_slot: Vec<Option<usize>> = vec![None; n_s];
        let mut running = vec![0u64; n_s];
        let mut sources = vec![0u32; k];

        for i in 1..=k {
            for s in sensed.iter_mut().filter(|s| s.is_none()) {
                let u: f64 = rng.random();
                let cause = if Some(i) == j_star {
                    if u < c.alpha {
                        Some(Cause::Direct)
                    } else if u < c.alpha + c.delta {
                        Some(Cause::SensorNoise)
                    } else {
                        None
                    }
                } else if u < c.delta {
                    Some(Cause::SensorNoise)
                } else {
                    None
                };
                if let Some(cause) = cause {
                    *s = Some((i, cause));
                    sources[i - 1] += 1;
                }
            }

            let signal: f64 = (1..=i)
                .map(|j| f64::from(sources[j - 1]) * self.geometry.mu_sensor(j, i))
                .sum();
            let mean = signal * c.m + c.lambda;
            for n in 0..n_s {
                if sensed[n].is_some() || marker_slot[n].is_some() {
                    continue;
                }
                let y = poisson(mean, rng);
                let fires = match scenario.sensor_type {
                    SensorType::Memoryless => y >= threshold,
                    SensorType::Aggregate => {
                        running[n] += y;
                        running[n] >= threshold
                    }
                };
                if fires {
                    marker_slot[n] = Some(i);
                }
            }
        }

        let fc_signal: f64 = (1..=k)
            .map(|j| f64::from(sources[j - 1]) * self.geometry.mu_fc(j))
            .sum();
        let z_fc = poisson(fc_signal * c.m + self.geometry.lambda_fc, rng);

        let sensors: Vec<SensorRecord> = (0..n_s)
            .map(|n| match (sensed[n], marker_slot[n]) {
                (Some((slot, cause)), _) => SensorRecord {
                    flag: true,
                    cause,
                    activation_slot: Some(slot),
                    storage_level: storage_level(slot, c),
                },
                (None, Some(slot)) => SensorRecord {
                    flag: true,
                    cause: Cause::Marker,
                    activation_slot: Some(slot),
                    storage_level: c.m,
                },
                (None, None) => SensorRecord {
                    flag: false,
                    cause: Cause::None,
                    activation_slot: None,
                    storage_level: c.m,
                },
            })
            .collect();

        let sources = SourceVector::new(sources);
        let n_released = sources.total();
        let n_total_active = sensors.iter().filter(|s| s.flag).count() as u32;
        let mut outcome = TrialOutcome {
            sensors,
            sources,
            n_total_active,
            n_released,
            z_fc,
            alarm: n_total_active >= c.tau1,
            localization: None,
            j_star,
        };
        outcome.localization = self.localize(&outcome, scenario.fc_type);
        outcome
    }

    /// Fusion-center localization from what the given FC type can read.
    fn localize(&self, outcome: &TrialOutcome, fc_type: FcType) -> Option<usize> {
        if !self.can_localize() {
            return None;
        }
        let readout = outcome.readout();
        let released = readout.released(&self.config);
        if released == 0 {
            return None;
        }
        match fc_type {
            FcType::TypeA => Some(decide_subregion_type_a(
                outcome.z_fc as f64,
                &self.thresholds[released as usize - 1],
            )),
            FcType::TypeB => {
                let r = readout.source_vector(&self.config).ok()?;
                decide_type_b(&r, &self.config).ok()
            }
        }
    }

    /// Runs trials `0..n` in parallel; element `t` is trial `t`.
    pub fn run_trials(&self, scenario: &Scenario, domain: u64, n: u64) -> Vec<TrialOutcome> {
        (0..n)
            .into_par_iter()
            .map(|t| self.run_trial(scenario, &mut Self::trial_rng(scenario.seed, domain, t)))
            .collect()
    }

    /// Counts `(events, kept)` over `n` trials, where `f` maps a trial to
    /// `None` (discarded) or whether the error event happened.
    fn count<F>(&self, scenario: &Scenario, domain: u64, n: u64, f: F) -> (u64, u64)
    where
        F: Fn(&TrialOutcome) -> Option<bool> + Sync,
    {
        (0..n)
            .into_par_iter()
            .map(|t| {
                let outcome = self.run_trial(scenario, &mut Self::trial_rng(scenario.seed, domain, t));
                match f(&outcome) {
                    Some(true) => (1, 1),
                    Some(false) => (0, 1),
                    None => (0, 0),
                }
            })
            .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    FalseAlarm,
    MissDetection,
    /// `P(H0) P_FA + P(H1) P_MD` from separate H0 and H1 runs.
    DetectionError,
    /// `P(decided slot != J*)` over trials with at least one marker source in
    /// slot `J*`.
    LocalizationError(FcType),
}

const DOMAIN_H0: u64 = 0;
const DOMAIN_H1: u64 = 1;

/// Monte-Carlo estimate of `metric` over `n_trials` trials. False alarms use
/// H0 and the other metrics H1; the scenario's own hypothesis picks the
/// abnormality slot, defaulting to uniform.
pub fn estimate_error(
    metric: Metric,
    scenario: &Scenario,
    n_trials: u64,
    config: &SystemConfig,
) -> Result<ErrorEstimate, AnalysisError> {
    if n_trials == 0 {
        return Err(AnalysisError::Unsupported("n_trials must be at least 1".into()));
    }
    let sim = Simulator::new(config)?;
    let h0 = scenario.with_hypothesis(Hypothesis::H0);
    let h1 = match scenario.hypothesis {
        Hypothesis::H0 => scenario.with_hypothesis(Hypothesis::H1(AbnormalitySlot::Uniform)),
        Hypothesis::H1(_) => *scenario,
    };
    let frequency = |(errors, kept): (u64, u64)| ErrorEstimate::monte_carlo(errors, kept);
    match metric {
        Metric::FalseAlarm => Ok(frequency(sim.count(&h0, DOMAIN_H0, n_trials, |o| Some(o.alarm)))),
        Metric::MissDetection => Ok(frequency(sim.count(&h1, DOMAIN_H1, n_trials, |o| Some(!o.alarm)))),
        Metric::DetectionError => {
            let fa = frequency(sim.count(&h0, DOMAIN_H0, n_trials, |o| Some(o.alarm)));
            let md = frequency(sim.count(&h1, DOMAIN_H1, n_trials, |o| Some(!o.alarm)));
            let p0 = config.prior_h0;
            Ok(ErrorEstimate {
                value: p0 * fa.value + (1.0 - p0) * md.value,
                stderr: ((p0 * fa.stderr).powi(2) + ((1.0 - p0) * md.stderr).powi(2)).sqrt(),
                n_trials: 2 * n_trials,
                ..fa
            })
        }
        Metric::LocalizationError(fc_type) => {
            config.validate_for_localization()?;
            let h1 = Scenario { fc_type, ..h1 };
            Ok(frequency(sim.count(&h1, DOMAIN_H1, n_trials, |o| {
                let j = o.j_star.expect("H1 trial");
                (o.sources.at(j) > 0).then(|| o.localization != Some(j))
            })))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecisionRule {
    /// Thresholds on the FC marker count, optimal for the released count.
    TypeAThresholds,
    /// ML on the source vector read from storage levels.
    TypeBMl,
    /// Latest slot with the most sources.
    TypeBArgmax,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecisionCheck {
    /// One estimate per rule, in the order given.
    pub errors: Vec<(DecisionRule, ErrorEstimate)>,
    pub retained: u64,
    pub discarded: u64,
}

impl DecisionCheck {
    pub fn discard_rate(&self) -> f64 {
        self.discarded as f64 / (self.retained + self.discarded).max(1) as f64
    }
}

/// Evaluates several decision rules on the same simulated H1 trials. Trials
/// without any direct activation are discarded.
pub fn ground_truth_decision_check(
    scenario: &Scenario,
    rules: &[DecisionRule],
    n_trials: u64,
    config: &SystemConfig,
) -> Result<DecisionCheck, AnalysisError> {
    config.validate_for_localization()?;
    let sim = Simulator::new(config)?;
    let scenario = match scenario.hypothesis {
        Hypothesis::H0 => scenario.with_hypothesis(Hypothesis::H1(AbnormalitySlot::Uniform)),
        Hypothesis::H1(_) => *scenario,
    };
    let per_trial: Vec<Option<Vec<bool>>> = (0..n_trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = Simulator::trial_rng(scenario.seed, DOMAIN_H1, t);
            let o = sim.run_trial(&scenario, &mut rng);
            if o.direct_count() == 0 {
                return None;
            }
            let j = o.j_star.expect("H1 trial");
            let readout = o.readout();
            let r = readout.source_vector(config).expect("levels below capacity decode");
            let released = readout.released(config) as usize;
            Some(
                rules
                    .iter()
                    .map(|rule| {
                        let decided = match rule {
                            DecisionRule::TypeAThresholds => {
                                decide_subregion_type_a(o.z_fc as f64, &sim.thresholds[released - 1])
                            }
                            DecisionRule::TypeBMl => decide_type_b(&r, config).expect("sources present"),
                            DecisionRule::TypeBArgmax => argmax_decide_type_b(&r).expect("sources present"),
                        };
                        decided != j
                    })
                    .collect(),
            )
        })
        .collect();
    let retained = per_trial.iter().flatten().count() as u64;
    let errors = rules
        .iter()
        .enumerate()
        .map(|(idx, &rule)| {
            let wrong = per_trial.iter().flatten().filter(|e| e[idx]).count() as u64;
            (rule, ErrorEstimate::monte_carlo(wrong, retained))
        })
        .collect();
    Ok(DecisionCheck {
        errors,
        retained,
        discarded: n_trials - retained,
    })
}
