//! Random sensor deployment, the isotropic attenuation law, and per-sensor
//! Gaussian observations.
//!
//! Sensor–target distances are unknown to the detectors. The only way to
//! read them (or the signal amplitudes they imply) is [`DistanceOracle`],
//! which exists for the Chair–Varshney and likelihood-ratio baselines.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Hypothesis {
    /// Target absent.
    H0,
    /// Target present.
    H1,
}

/// Square region of interest `[-b/2, b/2]^2` and the target location inside it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoiConfig {
    side_b: f64,
    target_x: f64,
    target_y: f64,
}

impl RoiConfig {
    pub fn new(side_b: f64, target_x: f64, target_y: f64) -> Result<Self> {
        if !(side_b.is_finite() && side_b > 0.0) {
            return Err(Error::config("roi_b", format!("side length must be > 0, got {side_b}")));
        }
        let half = side_b / 2.0;
        for (field, v) in [("target_x", target_x), ("target_y", target_y)] {
            if !(v.is_finite() && v.abs() <= half) {
                return Err(Error::config(field, format!("{v} outside [-{half}, {half}]")));
            }
        }
        Ok(RoiConfig {
            side_b,
            target_x,
            target_y,
        })
    }

    /// Target at the origin.
    pub fn centered(side_b: f64) -> Result<Self> {
        Self::new(side_b, 0.0, 0.0)
    }

    pub fn side_b(&self) -> f64 {
        self.side_b
    }

    pub fn target(&self) -> (f64, f64) {
        (self.target_x, self.target_y)
    }

    pub fn half_side(&self) -> f64 {
        self.side_b / 2.0
    }

    pub fn target_is_centered(&self) -> bool {
        self.target_x == 0.0 && self.target_y == 0.0
    }

    pub fn contains(&self, (x, y): (f64, f64)) -> bool {
        let h = self.half_side();
        (-h..=h).contains(&x) && (-h..=h).contains(&y)
    }
}

/// Received power `P0 / (1 + alpha * d^n)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignalModel {
    p0: f64,
    alpha: f64,
    n_exp: f64,
}

impl SignalModel {
    pub fn new(p0: f64, alpha: f64, n_exp: f64) -> Result<Self> {
        if !(p0.is_finite() && p0 >= 0.0) {
            return Err(Error::config("p0", format!("must be >= 0, got {p0}")));
        }
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(Error::config("alpha", format!("must be > 0, got {alpha}")));
        }
        if !(2.0..=3.0).contains(&n_exp) {
            return Err(Error::config("n_exp", format!("must lie in [2, 3], got {n_exp}")));
        }
        Ok(SignalModel { p0, alpha, n_exp })
    }

    pub fn p0(&self) -> f64 {
        self.p0
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn n_exp(&self) -> f64 {
        self.n_exp
    }

    pub fn with_p0(self, p0: f64) -> Result<Self> {
        Self::new(p0, self.alpha, self.n_exp)
    }

    #[inline]
    pub(crate) fn amplitude_unchecked(&self, d: f64) -> f64 {
        (self.p0 / (1.0 + self.alpha * d.powf(self.n_exp))).sqrt()
    }
}

/// Sensor positions for one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorField {
    positions: Vec<(f64, f64)>,
}

impl SensorField {
    pub fn positions(&self) -> &[(f64, f64)] {
        &self.positions
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// Ground-truth geometry for oracle baselines.
    pub fn distance_oracle<'a>(&'a self, roi: &'a RoiConfig) -> DistanceOracle<'a> {
        DistanceOracle { field: self, roi }
    }
}

/// Explicit accessor for quantities a real fusion center cannot know.
#[derive(Debug, Clone, Copy)]
pub struct DistanceOracle<'a> {
    field: &'a SensorField,
    roi: &'a RoiConfig,
}

impl DistanceOracle<'_> {
    pub fn distances(&self) -> Vec<f64> {
        self.field
            .positions
            .iter()
            .map(|&p| distance(p, self.roi))
            .collect()
    }

    /// Signal amplitude each sensor would see if the target were present.
    pub fn amplitudes(&self, model: &SignalModel) -> Vec<f64> {
        self.field
            .positions
            .iter()
            .map(|&p| model.amplitude_unchecked(distance(p, self.roi)))
            .collect()
    }
}

/// Observations `z` of every sensor in one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationVector {
    z: Vec<f64>,
    hypothesis: Hypothesis,
}

impl ObservationVector {
    pub fn new(z: Vec<f64>, hypothesis: Hypothesis) -> Result<Self> {
        if z.is_empty() {
            return Err(Error::domain("observation vector is empty"));
        }
        if let Some(i) = z.iter().position(|v| !v.is_finite()) {
            return Err(Error::domain(format!("observation {i} is not finite")));
        }
        Ok(ObservationVector { z, hypothesis })
    }

    pub fn values(&self) -> &[f64] {
        &self.z
    }

    pub fn hypothesis(&self) -> Hypothesis {
        self.hypothesis
    }

    pub fn len(&self) -> usize {
        self.z.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z.is_empty()
    }
}

/// Draws `n` sensor positions i.i.d. uniform over the ROI square.
///
/// Each sensor consumes two uniforms, `x` then `y`.
pub fn sample_field<R: Rng + ?Sized>(n: usize, roi: &RoiConfig, rng: &mut R) -> Result<SensorField> {
    if n == 0 {
        return Err(Error::domain("sensor count must be >= 1"));
    }
    let h = roi.half_side();
    let positions = (0..n)
        .map(|_| {
            let x = rng.random_range(-h..=h);
            let y = rng.random_range(-h..=h);
            (x, y)
        })
        .collect();
    Ok(SensorField { positions })
}

/// Euclidean distance between a sensor and the target.
pub fn distance((x, y): (f64, f64), roi: &RoiConfig) -> f64 {
    let (tx, ty) = roi.target();
    (x - tx).hypot(y - ty)
}

pub fn signal_amplitude(model: &SignalModel, d: f64) -> Result<f64> {
    if d.is_nan() || d < 0.0 {
        return Err(Error::domain(format!("distance must be >= 0, got {d}")));
    }
    Ok(model.amplitude_unchecked(d))
}

/// Draws one observation per sensor: noise only under H0, amplitude plus
/// noise under H1. Both hypotheses consume exactly `field.len()` normals.
pub fn generate_observations<R: Rng + ?Sized>(
    field: &SensorField,
    roi: &RoiConfig,
    model: &SignalModel,
    hypothesis: Hypothesis,
    rng: &mut R,
) -> Result<ObservationVector> {
    if field.is_empty() {
        return Err(Error::domain("sensor field is empty"));
    }
    let z = field
        .positions
        .iter()
        .map(|&p| {
            let noise: f64 = rng.sample(StandardNormal);
            match hypothesis {
                Hypothesis::H0 => noise,
                Hypothesis::H1 => model.amplitude_unchecked(distance(p, roi)) + noise,
            }
        })
        .collect();
    Ok(ObservationVector { z, hypothesis })
}
