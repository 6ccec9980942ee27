//! Gaussian tail probabilities, their inverse, and adaptive Simpson quadrature.
//!
//! Everything here is a pure function of its arguments.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::fmt;

use crate::error::{Error, Result};

/// A probability in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Probability(f64);

impl Probability {
    pub const ZERO: Probability = Probability(0.0);
    pub const HALF: Probability = Probability(0.5);
    pub const ONE: Probability = Probability(1.0);

    pub fn new(value: f64) -> Result<Self> {
        if (0.0..=1.0).contains(&value) {
            Ok(Probability(value))
        } else {
            Err(Error::domain(format!("probability {value} outside [0, 1]")))
        }
    }

    /// Like [`Probability::new`] but also rejects the endpoints.
    pub fn open(value: f64) -> Result<Self> {
        if value > 0.0 && value < 1.0 {
            Ok(Probability(value))
        } else {
            Err(Error::domain(format!("probability {value} outside (0, 1)")))
        }
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }

    /// `1 - p`.
    pub fn complement(self) -> Self {
        Probability(1.0 - self.0)
    }

    pub fn is_interior(self) -> bool {
        self.0 > 0.0 && self.0 < 1.0
    }
}

impl fmt::Display for Probability {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(&self.0, f)
    }
}

impl From<Probability> for f64 {
    fn from(p: Probability) -> f64 {
        p.0
    }
}

/// Standard Gaussian density.
#[inline]
pub fn gaussian_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// Unchecked upper tail `Q(x) = erfc(x / sqrt 2) / 2`.
///
/// NaN propagates; use [`q_function`] at API boundaries.
#[inline]
pub(crate) fn gaussian_tail(x: f64) -> f64 {
    0.5 * libm::erfc(x * FRAC_1_SQRT_2)
}

/// Upper tail probability of the standard Gaussian.
pub fn q_function(x: f64) -> Result<Probability> {
    if !x.is_finite() {
        return Err(Error::domain(format!("q_function argument {x} is not finite")));
    }
    Ok(Probability(gaussian_tail(x).clamp(0.0, 1.0)))
}

const Q_INVERSE_TOL: f64 = 1e-12;
const Q_INVERSE_BRACKET: f64 = 40.0;

/// Inverse of [`q_function`]: the `x` with `Q(x) = p`.
///
/// Safeguarded Newton iteration. The bracket `[-40, 40]` covers every
/// representable `p` in `(0, 1)`; any Newton step that leaves the current
/// bracket is replaced by bisection.
pub fn q_inverse(p: Probability) -> Result<f64> {
    let p = p.value();
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::domain(format!("q_inverse requires 0 < p < 1, got {p}")));
    }
    if p == 0.5 {
        return Ok(0.0);
    }

    // Q is decreasing: Q(lo) >= p >= Q(hi).
    let mut lo = -Q_INVERSE_BRACKET;
    let mut hi = Q_INVERSE_BRACKET;
    let mut x = initial_guess(p);

    for _ in 0..200 {
        let residual = gaussian_tail(x) - p;
        if residual == 0.0 {
            return Ok(x);
        }
        if residual > 0.0 {
            lo = x;
        } else {
            hi = x;
        }

        let density = gaussian_pdf(x);
        let newton = if density > 0.0 { x + residual / density } else { f64::NAN };
        let next = if newton.is_finite() && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };

        let step = (next - x).abs();
        x = next;
        if step <= Q_INVERSE_TOL * 1e-2 * x.abs().max(1.0) || hi - lo <= f64::EPSILON * x.abs() {
            return Ok(x);
        }
    }
    Ok(x)
}

// Abramowitz & Stegun 26.2.23, |error| < 4.5e-4.
fn initial_guess(p: f64) -> f64 {
    let tail = p.min(1.0 - p);
    let t = (-2.0 * tail.ln()).sqrt();
    let x = t - (2.515517 + 0.802853 * t + 0.010328 * t * t)
        / (1.0 + 1.432788 * t + 0.189269 * t * t + 0.001308 * t * t * t);
    if p < 0.5 {
        x
    } else {
        -x
    }
}

/// Tolerance and depth limits for [`integrate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSpec {
    relative_tolerance: f64,
    max_refinement_depth: u32,
}

impl QuadratureSpec {
    pub const MAX_DEPTH: u32 = 60;

    pub fn new(relative_tolerance: f64, max_refinement_depth: u32) -> Result<Self> {
        if !(relative_tolerance.is_finite() && relative_tolerance >= 100.0 * f64::EPSILON) {
            return Err(Error::domain(format!(
                "relative tolerance {relative_tolerance} below 100 * machine epsilon"
            )));
        }
        if max_refinement_depth == 0 || max_refinement_depth > Self::MAX_DEPTH {
            return Err(Error::domain(format!(
                "refinement depth {max_refinement_depth} outside 1..={}",
                Self::MAX_DEPTH
            )));
        }
        Ok(QuadratureSpec {
            relative_tolerance,
            max_refinement_depth,
        })
    }

    pub fn relative_tolerance(&self) -> f64 {
        self.relative_tolerance
    }

    pub fn max_refinement_depth(&self) -> u32 {
        self.max_refinement_depth
    }
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec {
            relative_tolerance: 1e-10,
            max_refinement_depth: 40,
        }
    }
}

// Panels evaluated up front; the composite estimate sets the absolute
// tolerance scale and keeps the recursion from accepting a lucky first guess.
const INITIAL_PANELS: usize = 16;

struct Panel {
    a: f64,
    m: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
}

struct Simpson<'f, F> {
    f: &'f F,
    max_depth: u32,
    converged: bool,
    bad_value: Option<f64>,
}

impl<F: Fn(f64) -> f64> Simpson<'_, F> {
    fn eval(&mut self, x: f64) -> f64 {
        let y = (self.f)(x);
        if !y.is_finite() && self.bad_value.is_none() {
            self.bad_value = Some(x);
        }
        y
    }

    fn panel(&mut self, a: f64, b: f64, fa: f64, fb: f64) -> Panel {
        let m = 0.5 * (a + b);
        let fm = self.eval(m);
        let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
        Panel { a, m, b, fa, fm, fb, whole }
    }

    fn refine(&mut self, p: Panel, tol: f64, depth: u32) -> f64 {
        let left = self.panel(p.a, p.m, p.fa, p.fm);
        let right = self.panel(p.m, p.b, p.fm, p.fb);
        let split = left.whole + right.whole;
        let delta = split - p.whole;

        if delta.abs() <= 15.0 * tol || self.bad_value.is_some() {
            return split + delta / 15.0;
        }
        if depth >= self.max_depth {
            self.converged = false;
            return split + delta / 15.0;
        }
        self.refine(left, 0.5 * tol, depth + 1) + self.refine(right, 0.5 * tol, depth + 1)
    }
}

/// Adaptive composite Simpson integration of `f` over `[a, b]`.
///
/// On exhausting the refinement depth the best estimate is returned inside
/// [`Error::Convergence`].
pub fn integrate<F>(f: F, a: f64, b: f64, spec: &QuadratureSpec) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::domain(format!("integration limits [{a}, {b}] not finite")));
    }
    if a > b {
        return Err(Error::domain(format!("integration limits reversed: {a} > {b}")));
    }
    if a == b {
        return Ok(0.0);
    }

    let mut s = Simpson {
        f: &f,
        max_depth: spec.max_refinement_depth,
        converged: true,
        bad_value: None,
    };

    let h = (b - a) / INITIAL_PANELS as f64;
    let nodes: Vec<f64> = (0..=INITIAL_PANELS)
        .map(|i| if i == INITIAL_PANELS { b } else { a + h * i as f64 })
        .collect();
    let values: Vec<f64> = nodes.iter().map(|&x| s.eval(x)).collect();
    let panels: Vec<Panel> = (0..INITIAL_PANELS)
        .map(|i| s.panel(nodes[i], nodes[i + 1], values[i], values[i + 1]))
        .collect();

    let coarse: f64 = panels.iter().map(|p| p.whole).sum();
    if let Some(x) = s.bad_value {
        return Err(Error::domain(format!("integrand not finite at {x}")));
    }
    let tol = (spec.relative_tolerance * coarse.abs()).max(f64::MIN_POSITIVE);
    let panel_tol = tol / INITIAL_PANELS as f64;

    let estimate: f64 = panels
        .into_iter()
        .map(|p| s.refine(p, panel_tol, 1))
        .sum();

    if let Some(x) = s.bad_value {
        return Err(Error::domain(format!("integrand not finite at {x}")));
    }
    if !s.converged {
        return Err(Error::Convergence {
            estimate,
            depth: spec.max_refinement_depth,
        });
    }
    Ok(estimate)
}
