//! Monte Carlo harness for the ordered counting rule.
//!
//! Trial `i` draws everything from its own ChaCha20 stream keyed by
//! `(master_seed, i)`, in a fixed order: hypothesis, sensor positions,
//! observation noise. Aggregates are exact integer sums, so a run gives the
//! same summary whatever the thread count or scheduling.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fusion::{counting_rule, threshold_from_local_pfa, FusionConfig, LocalDetector};
use crate::ordering::{lr_schedule_and_run, run_ordered_fusion, Crossing, LrRun, StoppedRun};
use crate::sensor_field::{
    generate_observations, sample_field, Hypothesis, ObservationVector, RoiConfig, SensorField, SignalModel,
};
use crate::stat_math::Probability;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExperimentConfig {
    pub n_sensors: usize,
    pub roi: RoiConfig,
    pub model: SignalModel,
    pub local_pfa: Probability,
    pub system_pfa: Probability,
    /// Fraction of trials with the target present.
    pub likelihood_r: Probability,
    pub n_trials: u64,
    pub master_seed: u64,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_sensors == 0 {
            return Err(Error::config("n_sensors", "must be >= 1"));
        }
        if self.n_trials == 0 {
            return Err(Error::config("n_trials", "must be >= 1"));
        }
        if !self.local_pfa.is_interior() {
            return Err(Error::config("local_pfa", format!("must lie in (0, 1), got {}", self.local_pfa)));
        }
        if !self.system_pfa.is_interior() {
            return Err(Error::config("system_pfa", format!("must lie in (0, 1), got {}", self.system_pfa)));
        }
        Ok(())
    }
}

/// Random stream for one trial.
pub fn trial_rng(master_seed: u64, trial_index: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(master_seed);
    rng.set_stream(trial_index);
    rng
}

/// Everything drawn for one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialData {
    pub hypothesis: Hypothesis,
    pub field: SensorField,
    pub observations: ObservationVector,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrialRecord {
    pub trial_index: u64,
    pub hypothesis: Hypothesis,
    pub stopped: StoppedRun,
    pub full_count_decision: Hypothesis,
    pub transmissions_saved: usize,
}

/// A validated configuration with its local and count thresholds resolved.
#[derive(Debug, Clone, Copy)]
pub struct Experiment {
    config: ExperimentConfig,
    detector: LocalDetector,
    fusion: FusionConfig,
}

impl Experiment {
    pub fn new(config: ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let detector = threshold_from_local_pfa(config.local_pfa)?;
        let fusion = FusionConfig::new(config.n_sensors, &detector, config.system_pfa)?;
        Ok(Experiment {
            config,
            detector,
            fusion,
        })
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.config
    }

    pub fn detector(&self) -> &LocalDetector {
        &self.detector
    }

    pub fn threshold(&self) -> f64 {
        self.fusion.threshold()
    }

    pub fn trial_data(&self, trial_index: u64) -> Result<TrialData> {
        let c = &self.config;
        if trial_index >= c.n_trials {
            return Err(Error::domain(format!(
                "trial index {trial_index} out of range for {} trials",
                c.n_trials
            )));
        }
        let mut rng = trial_rng(c.master_seed, trial_index);
        let hypothesis = if rng.random::<f64>() < c.likelihood_r.value() {
            Hypothesis::H1
        } else {
            Hypothesis::H0
        };
        // Positions are drawn under H0 too so every trial has the same stream layout.
        let field = sample_field(c.n_sensors, &c.roi, &mut rng)?;
        let observations = generate_observations(&field, &c.roi, &c.model, hypothesis, &mut rng)?;
        Ok(TrialData {
            hypothesis,
            field,
            observations,
        })
    }

    pub fn run_trial(&self, trial_index: u64) -> Result<TrialRecord> {
        let data = self.trial_data(trial_index)?;
        let t = self.threshold();
        let (_, decisions, stopped) = run_ordered_fusion(&data.observations, &self.detector, t)?;
        Ok(TrialRecord {
            trial_index,
            hypothesis: data.hypothesis,
            stopped,
            full_count_decision: counting_rule(&decisions, t),
            transmissions_saved: stopped.transmissions_saved(self.config.n_sensors),
        })
    }

    /// Likelihood-ratio ordering baseline on the same trial data.
    pub fn run_lr_trial(&self, trial_index: u64, prior_p: Probability) -> Result<(TrialData, LrRun)> {
        let data = self.trial_data(trial_index)?;
        let amplitudes = data.field.distance_oracle(&self.config.roi).amplitudes(&self.config.model);
        let run = lr_schedule_and_run(&data.observations, &amplitudes, prior_p, self.config.n_sensors)?;
        Ok((data, run))
    }

    pub fn monte_carlo(&self) -> Result<AntsSummary> {
        let acc = (0..self.config.n_trials)
            .into_par_iter()
            .map(|i| self.run_trial(i).map_err(|e| trial_error(i, e)))
            .try_fold(Tally::default, |mut acc, rec| {
                acc.add(&rec?);
                Ok::<_, Error>(acc)
            })
            .try_reduce(Tally::default, |a, b| Ok(a.merge(b)))?;
        Ok(acc.summarize())
    }
}

fn trial_error(index: u64, e: Error) -> Error {
    Error::Trial {
        index,
        source: Box::new(e),
    }
}

pub fn run_trial(config: &ExperimentConfig, trial_index: u64) -> Result<TrialRecord> {
    Experiment::new(*config)?.run_trial(trial_index)
}

pub fn monte_carlo(config: &ExperimentConfig) -> Result<AntsSummary> {
    Experiment::new(*config)?.monte_carlo()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
struct Tally {
    trials: u64,
    saved: u64,
    saved_sq: u128,
    h1_trials: u64,
    h1_detections: u64,
    h0_trials: u64,
    h0_false_alarms: u64,
    upper: u64,
    lower: u64,
    exhausted: u64,
    mismatches: u64,
}

impl Tally {
    fn add(&mut self, r: &TrialRecord) {
        let saved = r.transmissions_saved as u64;
        self.trials += 1;
        self.saved += saved;
        self.saved_sq += u128::from(saved) * u128::from(saved);
        let said_h1 = r.stopped.decision == Hypothesis::H1;
        match r.hypothesis {
            Hypothesis::H1 => {
                self.h1_trials += 1;
                self.h1_detections += u64::from(said_h1);
            }
            Hypothesis::H0 => {
                self.h0_trials += 1;
                self.h0_false_alarms += u64::from(said_h1);
            }
        }
        match r.stopped.crossing {
            Crossing::Upper => self.upper += 1,
            Crossing::Lower => self.lower += 1,
            Crossing::Exhausted => self.exhausted += 1,
        }
        self.mismatches += u64::from(r.stopped.decision != r.full_count_decision);
    }

    fn merge(self, o: Tally) -> Tally {
        Tally {
            trials: self.trials + o.trials,
            saved: self.saved + o.saved,
            saved_sq: self.saved_sq + o.saved_sq,
            h1_trials: self.h1_trials + o.h1_trials,
            h1_detections: self.h1_detections + o.h1_detections,
            h0_trials: self.h0_trials + o.h0_trials,
            h0_false_alarms: self.h0_false_alarms + o.h0_false_alarms,
            upper: self.upper + o.upper,
            lower: self.lower + o.lower,
            exhausted: self.exhausted + o.exhausted,
            mismatches: self.mismatches + o.mismatches,
        }
    }

    fn summarize(&self) -> AntsSummary {
        let n = self.trials as f64;
        let ants_mean = self.saved as f64 / n;
        let ants_stderr = if self.trials > 1 {
            // n * sum(x^2) - sum(x)^2 is exact in integers
            let t = u128::from(self.trials);
            let s = u128::from(self.saved);
            let num = t * self.saved_sq - s * s;
            let var = num as f64 / (n * (n - 1.0));
            (var / n).sqrt()
        } else {
            0.0
        };
        let ratio = |num: u64, den: u64| {
            (den > 0).then(|| Probability::new(num as f64 / den as f64).expect("count ratio"))
        };
        AntsSummary {
            n_trials: self.trials,
            ants_mean,
            ants_stderr,
            empirical_pd: ratio(self.h1_detections, self.h1_trials),
            empirical_pfa: ratio(self.h0_false_alarms, self.h0_trials),
            h1_trials: self.h1_trials,
            h0_trials: self.h0_trials,
            upper_count: self.upper,
            lower_count: self.lower,
            exhausted_count: self.exhausted,
            equivalence_mismatches: self.mismatches,
        }
    }
}

/// Aggregates over all trials of one configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AntsSummary {
    pub n_trials: u64,
    pub ants_mean: f64,
    pub ants_stderr: f64,
    /// Detection frequency over H1 trials; `None` if there were none.
    pub empirical_pd: Option<Probability>,
    /// False-alarm frequency over H0 trials; `None` if there were none.
    pub empirical_pfa: Option<Probability>,
    pub h1_trials: u64,
    pub h0_trials: u64,
    pub upper_count: u64,
    pub lower_count: u64,
    pub exhausted_count: u64,
    /// Trials where the ordered decision differed from the full count. Always 0.
    pub equivalence_mismatches: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SweepAxis {
    NSensors,
    P0,
    LocalPfa,
    LikelihoodR,
}

impl SweepAxis {
    pub const ALL: [SweepAxis; 4] = [
        SweepAxis::NSensors,
        SweepAxis::P0,
        SweepAxis::LocalPfa,
        SweepAxis::LikelihoodR,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::NSensors => "n_sensors",
            SweepAxis::P0 => "p0",
            SweepAxis::LocalPfa => "local_pfa",
            SweepAxis::LikelihoodR => "likelihood_r",
        }
    }

    /// `base` with this axis set to `value`.
    pub fn apply(self, base: &ExperimentConfig, value: f64) -> Result<ExperimentConfig> {
        let mut c = *base;
        match self {
            SweepAxis::NSensors => {
                if !(value >= 1.0 && value.fract() == 0.0 && value <= usize::MAX as f64) {
                    return Err(Error::config("n_sensors", format!("{value} is not a positive integer")));
                }
                c.n_sensors = value as usize;
            }
            SweepAxis::P0 => c.model = c.model.with_p0(value)?,
            SweepAxis::LocalPfa => {
                c.local_pfa = Probability::open(value).map_err(|e| Error::config("local_pfa", e.to_string()))?
            }
            SweepAxis::LikelihoodR => {
                c.likelihood_r =
                    Probability::new(value).map_err(|e| Error::config("likelihood_r", e.to_string()))?
            }
        }
        Ok(c)
    }
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SweepAxis::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| {
                let valid: Vec<&str> = SweepAxis::ALL.iter().map(|a| a.name()).collect();
                Error::config("axis", format!("unknown axis `{s}`; valid axes: {}", valid.join(", ")))
            })
    }
}

/// Seed for sweep cell `cell`; cell 0 keeps the base seed.
pub fn cell_seed(master_seed: u64, cell: usize) -> u64 {
    master_seed.wrapping_add((cell as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub axis_value: f64,
    pub config: ExperimentConfig,
    pub summary: AntsSummary,
}

/// One Monte Carlo run per value, in the order given.
pub fn sweep(base: &ExperimentConfig, axis: SweepAxis, values: &[f64]) -> Result<Vec<SweepRow>> {
    if values.is_empty() {
        return Err(Error::config("values", "sweep needs at least one value"));
    }
    values
        .iter()
        .enumerate()
        .map(|(cell, &v)| {
            let mut config = axis.apply(base, v)?;
            config.master_seed = cell_seed(base.master_seed, cell);
            let summary = monte_carlo(&config)?;
            Ok(SweepRow {
                axis_value: v,
                config,
                summary,
            })
        })
        .collect()
}
