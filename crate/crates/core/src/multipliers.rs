//! Smooth spectral cutoffs and the low/high frequency projectors.
//!
//! The cutoff is `chi(s) = step(2 - |s|)` where `step` is the smooth 0-to-1
//! transition built from `rho(x) = exp(-1/x)`:
//! `step(t) = rho(t) / (rho(t) + rho(1 - t))`. It is identically 1 on `|s| <= 1`,
//! identically 0 on `|s| >= 2`, and monotone in between.

use crate::basis::{Basis, SpectralField};
use crate::error::{Error, Result};

fn rho(x: f64) -> f64 {
    if x > 0.0 {
        (-1.0 / x).exp()
    } else {
        0.0
    }
}

fn rho_prime(x: f64) -> f64 {
    if x > 0.0 {
        (-1.0 / x).exp() / (x * x)
    } else {
        0.0
    }
}

/// Smooth step: 0 for `t <= 0`, 1 for `t >= 1`, `C^infinity` everywhere.
pub fn smooth_step(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else if t >= 1.0 {
        1.0
    } else {
        let a = rho(t);
        a / (a + rho(1.0 - t))
    }
}

pub fn smooth_step_prime(t: f64) -> f64 {
    if t <= 0.0 || t >= 1.0 {
        return 0.0;
    }
    let a = rho(t);
    let b = rho(1.0 - t);
    let (da, db) = (rho_prime(t), -rho_prime(1.0 - t));
    (da * b - a * db) / ((a + b) * (a + b))
}

/// `sup |step'|`, attained at `t = 1/2` by symmetry of the profile.
pub fn smooth_step_max_slope() -> f64 {
    smooth_step_prime(0.5)
}

/// The fixed cutoff profile `chi`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Cutoff;

impl Cutoff {
    pub fn chi(&self, s: f64) -> f64 {
        smooth_step(2.0 - s.abs())
    }

    pub fn chi_prime(&self, s: f64) -> f64 {
        -s.signum() * smooth_step_prime(2.0 - s.abs())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrequencyThreshold(f64);

impl FrequencyThreshold {
    pub fn new(n: f64) -> Result<Self> {
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::InvalidParameter(format!("frequency threshold must be positive (got {n})")));
        }
        Ok(FrequencyThreshold(n))
    }

    pub fn value(&self) -> f64 {
        self.0
    }
}

/// `chi(sqrt(lambda_j) / N)` for every mode.
pub fn low_symbol(basis: &Basis, n: FrequencyThreshold) -> Vec<f64> {
    basis.eigenvalues().iter().map(|l| Cutoff.chi(l.sqrt() / n.0)).collect()
}

/// Splits `x` into `(s x, (1 - s) x)` so that the parts add back to `x` exactly: the
/// larger part is rounded and the smaller one is an exact difference.
fn split(x: f64, s: f64) -> (f64, f64) {
    if s >= 0.5 {
        let low = s * x;
        (low, x - low)
    } else {
        let high = (1.0 - s) * x;
        (x - high, high)
    }
}

pub fn project_low(c: &SpectralField, basis: &Basis, n: FrequencyThreshold) -> SpectralField {
    let sym = low_symbol(basis, n);
    SpectralField(c.0.iter().zip(&sym).map(|(x, s)| split(*x, *s).0).collect())
}

/// `c - P_{<=N} c`; adds back to `c` bitwise.
pub fn project_high(c: &SpectralField, basis: &Basis, n: FrequencyThreshold) -> SpectralField {
    let sym = low_symbol(basis, n);
    SpectralField(c.0.iter().zip(&sym).map(|(x, s)| split(*x, *s).1).collect())
}

/// `||grad P_{<=N} u|| / (N ||u||)`; bounded by 2.
pub fn bernstein_ratio(c: &SpectralField, basis: &Basis, n: FrequencyThreshold) -> Result<f64> {
    let l2 = basis.l2_norm(c);
    if l2 == 0.0 {
        return Err(Error::Degenerate("Bernstein ratio of the zero field".into()));
    }
    Ok(basis.h1_norm(&project_low(c, basis, n)) / (n.0 * l2))
}

/// `N ||P_{>N} u|| / ||grad u||`; bounded by 1.
pub fn reverse_bernstein_ratio(c: &SpectralField, basis: &Basis, n: FrequencyThreshold) -> Result<f64> {
    let h1 = basis.h1_norm(c);
    if h1 == 0.0 {
        return Err(Error::Degenerate("reverse Bernstein ratio of a zero-gradient field".into()));
    }
    Ok(n.0 * basis.l2_norm(&project_high(c, basis, n)) / h1)
}

/// High-frequency data size `||grad P_{>N} u0|| + ||P_{>N} u1||`.
pub fn tail_energy(u0: &SpectralField, u1: &SpectralField, basis: &Basis, n: FrequencyThreshold) -> f64 {
    basis.h1_norm(&project_high(u0, basis, n)) + basis.l2_norm(&project_high(u1, basis, n))
}
