//! Local threshold detectors, the counting rule, its Gaussian-approximation
//! operating characteristics, and the Chair–Varshney baseline.

use std::f64::consts::PI;

use log::warn;

use crate::error::{Error, Result};
use crate::sensor_field::{Hypothesis, RoiConfig, SignalModel};
use crate::stat_math::{gaussian_tail, integrate, q_inverse, Probability, QuadratureSpec};

/// Identical threshold `tau` shared by every sensor, with `Q(tau) = local_pfa`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalDetector {
    tau: f64,
    local_pfa: Probability,
}

impl LocalDetector {
    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn local_pfa(&self) -> Probability {
        self.local_pfa
    }
}

pub fn threshold_from_local_pfa(local_pfa: Probability) -> Result<LocalDetector> {
    if !local_pfa.is_interior() {
        return Err(Error::domain(format!("local pfa must lie in (0, 1), got {local_pfa}")));
    }
    Ok(LocalDetector {
        tau: q_inverse(local_pfa)?,
        local_pfa,
    })
}

/// Detection probability of a sensor at distance `d` from the target.
pub fn local_pd(det: &LocalDetector, model: &SignalModel, d: f64) -> Result<Probability> {
    if d.is_nan() || d < 0.0 {
        return Err(Error::domain(format!("distance must be >= 0, got {d}")));
    }
    Ok(pd_at(det, model, d))
}

#[inline]
fn pd_at(det: &LocalDetector, model: &SignalModel, d: f64) -> Probability {
    Probability::new(gaussian_tail(det.tau - model.amplitude_unchecked(d)).clamp(0.0, 1.0))
        .expect("clamped")
}

/// Strict exceedance; `z == tau` decides 0.
#[inline]
pub fn local_decide(z: f64, det: &LocalDetector) -> bool {
    z > det.tau
}

/// Global decision from a full set of local decisions: H1 iff the count exceeds `t`.
pub fn counting_rule(decisions: &[bool], t: f64) -> Hypothesis {
    let count = decisions.iter().filter(|&&d| d).count();
    if count as f64 > t {
        Hypothesis::H1
    } else {
        Hypothesis::H0
    }
}

/// Count threshold meeting `system_pfa` under the large-`n` Gaussian approximation.
pub fn system_threshold(n: usize, local_pfa: Probability, system_pfa: Probability) -> Result<f64> {
    if n == 0 {
        return Err(Error::domain("sensor count must be >= 1"));
    }
    if !local_pfa.is_interior() || !system_pfa.is_interior() {
        return Err(Error::domain("false-alarm probabilities must lie in (0, 1)"));
    }
    let n = n as f64;
    let p = local_pfa.value();
    Ok(q_inverse(system_pfa)? * (n * p * (1.0 - p)).sqrt() + n * p)
}

pub fn system_pfa_approx(n: usize, local_pfa: Probability, t: f64) -> Result<Probability> {
    if n == 0 {
        return Err(Error::domain("sensor count must be >= 1"));
    }
    let n = n as f64;
    let p = local_pfa.value();
    Ok(gaussian_ratio_tail(t - n * p, n * p * (1.0 - p)))
}

// Q(num / sqrt(var)), with the zero-variance limit resolved by the sign of num.
fn gaussian_ratio_tail(num: f64, var: f64) -> Probability {
    let v = if var > 0.0 {
        gaussian_tail(num / var.sqrt())
    } else if num < 0.0 {
        1.0
    } else {
        0.0
    };
    Probability::new(v.clamp(0.0, 1.0)).expect("clamped")
}

/// Sensor count, system false-alarm target, and the count threshold it implies.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FusionConfig {
    n_sensors: usize,
    system_pfa: Probability,
    system_threshold_t: f64,
}

impl FusionConfig {
    pub fn new(n_sensors: usize, det: &LocalDetector, system_pfa: Probability) -> Result<Self> {
        let t = system_threshold(n_sensors, det.local_pfa, system_pfa)?;
        if t <= 0.0 {
            warn!("count threshold T = {t} <= 0: any single local detection decides H1");
        }
        Ok(FusionConfig {
            n_sensors,
            system_pfa,
            system_threshold_t: t,
        })
    }

    pub fn n_sensors(&self) -> usize {
        self.n_sensors
    }

    pub fn system_pfa(&self) -> Probability {
        self.system_pfa
    }

    pub fn threshold(&self) -> f64 {
        self.system_threshold_t
    }
}

/// Average-sensor statistics and the resulting system detection probability.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TheoryCurves {
    /// Local pd at the ROI corner.
    pub gamma: Probability,
    pub pd_bar: Probability,
    pub sigma_bar_sq: f64,
    pub system_pd: Probability,
}

pub fn theory_curves(
    det: &LocalDetector,
    model: &SignalModel,
    roi: &RoiConfig,
    n: usize,
    t: f64,
) -> Result<TheoryCurves> {
    theory_curves_with(det, model, roi, n, t, &QuadratureSpec::default())
}

/// [`theory_curves`] with an explicit quadrature tolerance.
///
/// The inscribed disc of radius `b/2` is integrated radially; the remaining
/// `1 - pi/4` of the square is assigned the corner detection probability
/// `gamma`. This requires the target at the ROI centre.
pub fn theory_curves_with(
    det: &LocalDetector,
    model: &SignalModel,
    roi: &RoiConfig,
    n: usize,
    t: f64,
    spec: &QuadratureSpec,
) -> Result<TheoryCurves> {
    if n == 0 {
        return Err(Error::domain("sensor count must be >= 1"));
    }
    if !roi.target_is_centered() {
        return Err(Error::Unsupported(
            "theoretical curves assume the target at the ROI centre".into(),
        ));
    }
    let b = roi.side_b();
    let half = b / 2.0;
    let pd = |r: f64| pd_at(det, model, r).value();

    let gamma = pd(std::f64::consts::SQRT_2 * half);
    let corner = 1.0 - PI / 4.0;
    let disc_weight = 2.0 * PI / (b * b);

    let disc_mean = integrate(|r| pd(r) * r, 0.0, half, spec)?;
    let disc_var = integrate(
        |r| {
            let p = pd(r);
            (1.0 - p) * p * r
        },
        0.0,
        half,
        spec,
    )?;

    let pd_bar = disc_weight * disc_mean + corner * gamma;
    let sigma_bar_sq = disc_weight * disc_var + corner * gamma * (1.0 - gamma);
    let n = n as f64;
    let system_pd = gaussian_ratio_tail(t - n * pd_bar, n * sigma_bar_sq);

    Ok(TheoryCurves {
        gamma: Probability::new(gamma)?,
        pd_bar: Probability::new(pd_bar.clamp(0.0, 1.0))?,
        sigma_bar_sq,
        system_pd,
    })
}

/// Chair–Varshney log-likelihood fusion statistic.
///
/// Needs each sensor's true `pd_i`, i.e. knowledge of its distance to the
/// target; obtain those through [`crate::sensor_field::DistanceOracle`].
pub fn chair_varshney(decisions: &[bool], pd_list: &[Probability], local_pfa: Probability) -> Result<f64> {
    if decisions.len() != pd_list.len() {
        return Err(Error::domain(format!(
            "{} decisions but {} detection probabilities",
            decisions.len(),
            pd_list.len()
        )));
    }
    if !local_pfa.is_interior() {
        return Err(Error::domain(format!("local pfa {local_pfa} makes the log ratio singular")));
    }
    let pfa = local_pfa.value();
    decisions
        .iter()
        .zip(pd_list)
        .enumerate()
        .map(|(i, (&d, &pd))| {
            if !pd.is_interior() {
                return Err(Error::domain(format!("pd of sensor {i} is {pd}; log ratio singular")));
            }
            let pd = pd.value();
            Ok(if d {
                (pd / pfa).ln()
            } else {
                ((1.0 - pd) / (1.0 - pfa)).ln()
            })
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(v: f64) -> Probability {
        Probability::new(v).unwrap()
    }

    fn det(pfa: f64) -> LocalDetector {
        threshold_from_local_pfa(p(pfa)).unwrap()
    }

    fn model(p0: f64) -> SignalModel {
        SignalModel::new(p0, 0.02, 2.0).unwrap()
    }

    #[test]
    fn local_thresholds() {
        assert_eq!(det(0.5).tau(), 0.0);
        assert!((det(1e-3).tau() - 3.090232).abs() < 1e-6);
        assert!((det(1e-4).tau() - 3.719016).abs() < 1e-6);
        assert!(threshold_from_local_pfa(p(0.0)).is_err());
        assert!(threshold_from_local_pfa(p(1.0)).is_err());
    }

    #[test]
    fn local_pd_examples() {
        // Unrounded tau reduces exactly to the local pfa.
        let exact = det(1e-3);
        let v = local_pd(&exact, &model(0.0), 12.0).unwrap().value();
        assert!((v / 1e-3 - 1.0).abs() < 1e-6);

        // tau rounded to six decimals sits 1.03e-6 (relative) above 1e-3 (mpmath).
        let d = LocalDetector {
            tau: 3.090232,
            local_pfa: p(1e-3),
        };
        let v = local_pd(&d, &model(0.0), 12.0).unwrap().value();
        assert!((v - 1.000001030895095e-3).abs() < 1e-15);

        let v = local_pd(&d, &model(1e6), 0.0).unwrap().value();
        assert!(v > 1.0 - 1e-12);

        // mpmath: Q(3.090232 - sqrt(100/3)) = 0.99635470234...
        let v = local_pd(&d, &model(100.0), 10.0).unwrap().value();
        assert!((v - 0.996354702342073).abs() < 1e-12, "{v}");

        assert!(local_pd(&d, &model(1.0), -1.0).is_err());
    }

    #[test]
    fn local_decide_is_strict() {
        let d = det(1e-3);
        assert!(local_decide(d.tau() + 0.1, &d));
        assert!(!local_decide(d.tau() - 0.1, &d));
        assert!(!local_decide(d.tau(), &d));
    }

    #[test]
    fn counting_rule_examples() {
        assert_eq!(counting_rule(&[true, true, false], 1.5), Hypothesis::H1);
        assert_eq!(counting_rule(&[true, false, false], 1.5), Hypothesis::H0);
        assert_eq!(counting_rule(&[false; 7], 0.0), Hypothesis::H0);
        // sum equal to an integral threshold decides H0
        assert_eq!(counting_rule(&[true, true, false], 2.0), Hypothesis::H0);
        // non-positive threshold: any detection wins
        assert_eq!(counting_rule(&[false, true], -0.3), Hypothesis::H1);
    }

    #[test]
    fn system_threshold_examples() {
        // mpmath references
        let t = system_threshold(100, p(1e-3), p(1e-3)).unwrap();
        assert!((t - 1.076728527809911).abs() < 1e-9, "{t}");
        let t = system_threshold(50, p(1e-4), p(1e-3)).unwrap();
        assert!((t - 0.223501496019051).abs() < 1e-9, "{t}");
        let t = system_threshold(40, p(0.01), p(0.5)).unwrap();
        assert_eq!(t, 40.0 * 0.01);
    }

    #[test]
    fn system_pfa_round_trip() {
        let t = system_threshold(100, p(1e-3), p(1e-3)).unwrap();
        let back = system_pfa_approx(100, p(1e-3), t).unwrap().value();
        assert!((back - 1e-3).abs() < 1e-9 * 1e-3 * 1e3, "{back}");
        assert_eq!(system_pfa_approx(100, p(1e-3), 0.1).unwrap().value(), 0.5);
    }

    #[test]
    fn fusion_config_tracks_threshold() {
        let d = det(1e-3);
        let c = FusionConfig::new(100, &d, p(1e-3)).unwrap();
        assert_eq!(c.threshold(), system_threshold(100, p(1e-3), p(1e-3)).unwrap());
        // tiny N * pfa with a lenient system pfa drives T below zero
        let c = FusionConfig::new(2, &det(1e-4), p(0.9)).unwrap();
        assert!(c.threshold() < 0.0);
    }

    #[test]
    fn theory_no_signal_collapses_to_h0() {
        let d = det(1e-3);
        let roi = RoiConfig::centered(100.0).unwrap();
        let t = system_threshold(100, p(1e-3), p(1e-3)).unwrap();
        let c = theory_curves(&d, &model(0.0), &roi, 100, t).unwrap();
        let pfa = d.local_pfa().value();
        assert!((c.gamma.value() - pfa).abs() < 1e-9);
        assert!((c.pd_bar.value() - pfa).abs() < 1e-9);
        assert!((c.sigma_bar_sq - pfa * (1.0 - pfa)).abs() < 1e-9);
        let h0 = system_pfa_approx(100, d.local_pfa(), t).unwrap().value();
        assert!((c.system_pd.value() - h0).abs() < 1e-9);
    }

    #[test]
    fn theory_reference_configuration() {
        let d = det(1e-3);
        let roi = RoiConfig::centered(100.0).unwrap();
        let t = system_threshold(100, p(1e-3), p(1e-3)).unwrap();
        let c = theory_curves(&d, &model(200.0), &roi, 100, t).unwrap();
        // spec: Q(1.68304) ~ 0.04617 +- 1e-4; mpmath with exact tau: 0.0461839435
        assert!((c.gamma.value() - 0.04617).abs() < 1e-4);
        assert!((c.gamma.value() - 0.046183943516625).abs() < 1e-12);
        // mpmath adaptive quadrature of the same expressions
        assert!((c.pd_bar.value() - 0.391589955702103).abs() < 1e-9, "{}", c.pd_bar);
        assert!((c.sigma_bar_sq - 0.130716060719211).abs() < 1e-9, "{}", c.sigma_bar_sq);
        assert!(c.sigma_bar_sq <= 0.25);
        assert!(c.pd_bar.value() >= c.gamma.value() * (1.0 - PI / 4.0));
        assert!(c.system_pd.value() > 1.0 - 1e-12);
    }

    #[test]
    fn theory_requires_centered_target() {
        let roi = RoiConfig::new(100.0, 1.0, 0.0).unwrap();
        let err = theory_curves(&det(1e-3), &model(10.0), &roi, 10, 1.0).unwrap_err();
        assert!(matches!(err, Error::Unsupported(_)));
    }

    #[test]
    fn chair_varshney_examples() {
        let v = chair_varshney(&[true], &[p(0.9)], p(0.1)).unwrap();
        assert!((v - 9f64.ln()).abs() < 1e-12);
        assert!((v - 2.19722).abs() < 1e-5);
        let v = chair_varshney(&[false], &[p(0.9)], p(0.1)).unwrap();
        assert!((v + 2.19722).abs() < 1e-5);
        let v = chair_varshney(&[true, false, true], &[p(0.2); 3], p(0.2)).unwrap();
        assert_eq!(v, 0.0);
    }

    #[test]
    fn chair_varshney_errors() {
        assert!(chair_varshney(&[true], &[p(1.0)], p(0.1)).is_err());
        assert!(chair_varshney(&[true], &[p(0.5)], p(0.0)).is_err());
        assert!(chair_varshney(&[true, false], &[p(0.5)], p(0.1)).is_err());
    }
}
