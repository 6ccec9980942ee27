//! Ordered transmission of binary decisions with early stopping at the
//! fusion center.
//!
//! Sensor `i` transmits at time `1 / |z_i - tau|`, so the most confident
//! sensors report first. After each arrival the fusion center checks
//!
//! * upper: `sum_k > T` — the remaining sensors cannot pull the count back
//!   to `T`, decide H1;
//! * lower: `sum_k < T - (N - k)` — even if every remaining sensor reports 1
//!   the count stays below `T`, decide H0;
//!
//! and broadcasts a stop on the feedback channel when either holds. Both
//! conditions only fire when the full count would give the same answer, so
//! the decision always matches [`crate::fusion::counting_rule`].

use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::fusion::{local_decide, LocalDetector};
use crate::sensor_field::{Hypothesis, ObservationVector};
use crate::stat_math::Probability;

/// Arrival order of the sensors at the fusion center.
#[derive(Debug, Clone, PartialEq)]
pub struct TransmissionSchedule {
    order: Vec<usize>,
    times: Vec<f64>,
}

impl TransmissionSchedule {
    /// Sensor indices, earliest transmitter first.
    pub fn order(&self) -> &[usize] {
        &self.order
    }

    /// Transmission time of each sensor, indexed by sensor.
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    /// Reorders per-sensor values into arrival order.
    pub fn arrange<T: Copy>(&self, per_sensor: &[T]) -> Vec<T> {
        self.order.iter().map(|&i| per_sensor[i]).collect()
    }
}

// Ascending time, then ascending index. Infinite times sort last.
fn order_by_time(times: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..times.len()).collect();
    order.sort_by(|&a, &b| times[a].total_cmp(&times[b]).then(a.cmp(&b)));
    order
}

/// Schedules each sensor at `1 / |z_i - tau|`.
///
/// A sensor with `z_i == tau` gets an infinite time and goes last.
pub fn schedule(observations: &ObservationVector, det: &LocalDetector) -> TransmissionSchedule {
    let times: Vec<f64> = observations
        .values()
        .iter()
        .map(|&z| 1.0 / (z - det.tau()).abs())
        .collect();
    let order = order_by_time(&times);
    TransmissionSchedule { order, times }
}

/// Which stopping condition ended a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Crossing {
    Upper,
    Lower,
    /// Every sensor transmitted without either condition firing.
    Exhausted,
}

/// Outcome of one ordered counting-rule run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StoppedRun {
    pub k_transmitted: usize,
    pub decision: Hypothesis,
    pub crossing: Crossing,
    pub partial_sum: usize,
}

impl StoppedRun {
    pub fn transmissions_saved(&self, n: usize) -> usize {
        n - self.k_transmitted
    }
}

/// Consumes decisions in arrival order until a stopping condition fires.
pub fn run_ordered_counting(ordered_decisions: &[bool], n: usize, t: f64) -> Result<StoppedRun> {
    if n == 0 {
        return Err(Error::domain("sensor count must be >= 1"));
    }
    if ordered_decisions.len() != n {
        return Err(Error::domain(format!(
            "expected {n} decisions, got {}",
            ordered_decisions.len()
        )));
    }

    let mut sum = 0usize;
    for (i, &d) in ordered_decisions.iter().enumerate() {
        let k = i + 1;
        sum += usize::from(d);
        let count = sum as f64;
        if count > t {
            return Ok(StoppedRun {
                k_transmitted: k,
                decision: Hypothesis::H1,
                crossing: Crossing::Upper,
                partial_sum: sum,
            });
        }
        if count < t - (n - k) as f64 {
            return Ok(StoppedRun {
                k_transmitted: k,
                decision: Hypothesis::H0,
                crossing: Crossing::Lower,
                partial_sum: sum,
            });
        }
    }

    // Only reachable when the full count equals t exactly.
    Ok(StoppedRun {
        k_transmitted: n,
        decision: if sum as f64 > t { Hypothesis::H1 } else { Hypothesis::H0 },
        crossing: Crossing::Exhausted,
        partial_sum: sum,
    })
}

/// Local decisions, schedule, and ordered run for one observation vector.
pub fn run_ordered_fusion(
    observations: &ObservationVector,
    det: &LocalDetector,
    t: f64,
) -> Result<(TransmissionSchedule, Vec<bool>, StoppedRun)> {
    let decisions: Vec<bool> = observations.values().iter().map(|&z| local_decide(z, det)).collect();
    let sched = schedule(observations, det);
    let run = run_ordered_counting(&sched.arrange(&decisions), decisions.len(), t)?;
    Ok((sched, decisions, run))
}

/// Lower bounds on the average number of transmissions saved.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AntsBounds {
    /// Target present, upper threshold fires: `(N - ceil T) r`.
    pub upper_case_bound: f64,
    /// Target absent, lower threshold fires: `ceil T (1 - r)`.
    pub lower_case_bound: f64,
    pub combined: f64,
    pub likelihood_r: Probability,
}

/// `r` is the fraction of trials with the target present. It characterizes
/// savings only and never enters a detector.
pub fn ants_bounds(n: usize, t: f64, r: Probability) -> Result<AntsBounds> {
    if t.is_nan() || t >= n as f64 {
        return Err(Error::domain(format!("threshold {t} must be below the sensor count {n}")));
    }
    // A non-positive threshold behaves like ceil T = 0: the lower case never fires.
    let ceil_t = t.ceil().max(0.0);
    let r_val = r.value();
    let upper_case_bound = (n as f64 - ceil_t) * r_val;
    let lower_case_bound = ceil_t * (1.0 - r_val);
    Ok(AntsBounds {
        upper_case_bound,
        lower_case_bound,
        combined: upper_case_bound + lower_case_bound,
        likelihood_r: r,
    })
}

/// Outcome of the likelihood-ratio ordering baseline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LrRun {
    pub k_transmitted: usize,
    pub decision: Hypothesis,
    pub crossing: Crossing,
    pub partial_sum: f64,
}

/// Gaussian mean-shift log-likelihood ratio `s z - s^2 / 2`.
#[inline]
pub fn gaussian_llr(z: f64, amplitude: f64) -> f64 {
    amplitude * z - 0.5 * amplitude * amplitude
}

/// Ordered transmission of unquantized log-likelihood ratios against the
/// Bayes threshold `ln((1 - p) / p)`.
///
/// Sensors report in descending `|ln L|`. After `k` arrivals the remaining
/// `N - k` ratios are each bounded by `|ln L_[k]|`, giving the slack used in
/// both stopping conditions. At `k = N` this is the unconstrained Bayes test;
/// equality decides H0.
///
/// The amplitudes are ground truth and must come from
/// [`crate::sensor_field::DistanceOracle`].
pub fn lr_schedule_and_run(
    observations: &ObservationVector,
    true_amplitudes: &[f64],
    prior_p: Probability,
    n: usize,
) -> Result<LrRun> {
    if !prior_p.is_interior() {
        return Err(Error::domain(format!("prior {prior_p} must lie in (0, 1)")));
    }
    if observations.len() != n || true_amplitudes.len() != n {
        return Err(Error::domain(format!(
            "expected {n} observations and amplitudes, got {} and {}",
            observations.len(),
            true_amplitudes.len()
        )));
    }

    let p = prior_p.value();
    let threshold = ((1.0 - p) / p).ln();
    let llr: Vec<f64> = observations
        .values()
        .iter()
        .zip(true_amplitudes)
        .map(|(&z, &s)| gaussian_llr(z, s))
        .collect();

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| match llr[b].abs().total_cmp(&llr[a].abs()) {
        Ordering::Equal => a.cmp(&b),
        o => o,
    });

    let mut sum = 0.0;
    for (i, &idx) in order.iter().enumerate() {
        let k = i + 1;
        sum += llr[idx];
        let slack = (n - k) as f64 * llr[idx].abs();
        if sum > threshold + slack {
            return Ok(LrRun {
                k_transmitted: k,
                decision: Hypothesis::H1,
                crossing: Crossing::Upper,
                partial_sum: sum,
            });
        }
        if sum < threshold - slack {
            return Ok(LrRun {
                k_transmitted: k,
                decision: Hypothesis::H0,
                crossing: Crossing::Lower,
                partial_sum: sum,
            });
        }
    }

    Ok(LrRun {
        k_transmitted: n,
        decision: Hypothesis::H0,
        crossing: Crossing::Exhausted,
        partial_sum: sum,
    })
}
