//! Energy-efficient distributed detection with the ordered counting rule.
//!
//! Sensors scattered over a square region make binary decisions about a
//! target and report them to a fusion center in order of confidence. The
//! fusion center counts detections and stops further transmissions as soon
//! as the count settles the decision, giving the same answer as counting all
//! `N` decisions with fewer transmissions.
//!
//! Modules, bottom-up:
//!
//! * [`stat_math`]: Gaussian tail `Q`, its inverse, adaptive Simpson quadrature.
//! * [`sensor_field`]: sensor deployment, attenuation, observations.
//! * [`fusion`]: local detectors, counting rule, theoretical Pfa/Pd, Chair–Varshney.
//! * [`ordering`]: transmission schedule, early stopping, savings bounds, LR baseline.
//! * [`experiment`]: seeded Monte Carlo harness and parameter sweeps.
//! * [`cli`]: configuration, CSV output, manifests.

pub mod cli;
pub mod error;
pub mod experiment;
pub mod fusion;
pub mod ordering;
pub mod sensor_field;
pub mod stat_math;

pub use error::{Error, Result};
pub use sensor_field::Hypothesis;
pub use stat_math::Probability;
