//! Reference implementations that share no code path with the library.
#![allow(dead_code)]

use std::f64::consts::PI;

/// Gaussian upper tail from first principles.
///
/// `|x| < 3`: the all-positive series
/// `erf(y) = 2/sqrt(pi) * exp(-y^2) * sum 2^n y^(2n+1) / (1*3*...*(2n+1))`.
/// Otherwise: the Laplace continued fraction for `erfc`, evaluated with
/// modified Lentz.
pub fn q_reference(x: f64) -> f64 {
    if x < 0.0 {
        return 1.0 - q_reference(-x);
    }
    let y = x / 2f64.sqrt();
    if x < 3.0 {
        let mut term = y;
        let mut sum = y;
        let mut n = 0.0;
        loop {
            n += 1.0;
            term *= 2.0 * y * y / (2.0 * n + 1.0);
            sum += term;
            if term <= sum * 1e-18 {
                break;
            }
        }
        let erf = 2.0 / PI.sqrt() * (-y * y).exp() * sum;
        0.5 * (1.0 - erf)
    } else {
        // erfc(y) = exp(-y^2)/sqrt(pi) * 1/(y + (1/2)/(y + 1/(y + (3/2)/(y + ...))))
        let tiny = 1e-300;
        let mut f = y;
        let mut c = y;
        let mut d = 0.0;
        for k in 1..500 {
            let a = k as f64 / 2.0;
            d = y + a * d;
            if d.abs() < tiny {
                d = tiny;
            }
            c = y + a / c;
            if c.abs() < tiny {
                c = tiny;
            }
            d = 1.0 / d;
            let delta = c * d;
            f *= delta;
            if (delta - 1.0).abs() < 1e-16 {
                break;
            }
        }
        0.5 * (-y * y).exp() / PI.sqrt() / f
    }
}

/// Solves `q_reference(x) = p` by plain bisection.
pub fn q_inverse_bisection(p: f64) -> f64 {
    let (mut lo, mut hi) = (-40.0f64, 40.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if q_reference(mid) > p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// `Pr(Bin(n, p) > t)` by direct summation of the pmf.
pub fn binomial_upper_tail(n: u64, p: f64, t: f64) -> f64 {
    let q = 1.0 - p;
    // pmf(0) = q^n, pmf(k+1) = pmf(k) * (n-k)/(k+1) * p/q
    let mut pmf = q.powf(n as f64);
    let mut tail = 0.0;
    for k in 0..=n {
        if k as f64 > t {
            tail += pmf;
        }
        pmf *= (n - k) as f64 / (k + 1) as f64 * p / q;
    }
    tail
}

/// Threshold from the Gaussian-approximation formula using the bisection inverse.
pub fn threshold_reference(n: u64, local_pfa: f64, system_pfa: f64) -> f64 {
    let n = n as f64;
    q_inverse_bisection(system_pfa) * (n * local_pfa * (1.0 - local_pfa)).sqrt() + n * local_pfa
}

/// Full counting-rule decision.
pub fn count_exceeds(decisions: &[bool], t: f64) -> bool {
    decisions.iter().filter(|&&d| d).count() as f64 > t
}
