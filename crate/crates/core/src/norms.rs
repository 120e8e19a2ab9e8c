//! Lebesgue norms on the quadrature grid and mixed space-time norms along
//! trajectories. Time integrals use the trapezoidal rule at sample resolution.

use serde::{Deserialize, Serialize};

use crate::basis::{Basis, GridField};
use crate::dynamics::Trajectory;
use crate::error::{Error, Result};

fn check_exponent(p: f64) -> Result<()> {
    if p.is_nan() || p < 1.0 {
        return Err(Error::InvalidParameter(format!("exponent must lie in [1, inf] (got {p})")));
    }
    Ok(())
}

/// `(sum_i w_i |f_i|^p)^(1/p)`; `p = inf` gives the grid maximum.
pub fn lp_norm(f: &GridField, basis: &Basis, p: f64) -> Result<f64> {
    check_exponent(p)?;
    if f.len() != basis.grid_len() {
        return Err(Error::LengthMismatch { expected: basis.grid_len(), got: f.len() });
    }
    if p.is_infinite() {
        return Ok(f.max_abs());
    }
    // Scale by the maximum so tenth and twelfth powers neither overflow nor underflow.
    let m = f.max_abs();
    if m == 0.0 {
        return Ok(0.0);
    }
    let s: f64 = f.0.iter().zip(basis.quadrature_weights()).map(|(x, w)| w * (x.abs() / m).powf(p)).sum();
    Ok(m * s.powf(1.0 / p))
}

/// Running `int_0^t ||u(s)||_p^q ds` by the trapezoidal rule in time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixedNormAccumulator {
    q: f64,
    p: f64,
    times: Vec<f64>,
    values: Vec<f64>,
    /// `partial[i]` is the integral (or running max for `q = inf`) up to `times[i]`.
    partial: Vec<f64>,
}

impl MixedNormAccumulator {
    pub fn new(q: f64, p: f64) -> Result<Self> {
        check_exponent(q)?;
        check_exponent(p)?;
        Ok(MixedNormAccumulator { q, p, times: Vec::new(), values: Vec::new(), partial: Vec::new() })
    }

    pub fn exponents(&self) -> (f64, f64) {
        (self.q, self.p)
    }

    /// Append `||u(t)||_p` at time `t` (times must be nondecreasing).
    pub fn push(&mut self, t: f64, spatial_norm: f64) {
        let next = match (self.times.last(), self.values.last(), self.partial.last()) {
            (Some(&t0), Some(&v0), Some(&s0)) => {
                if self.q.is_infinite() {
                    s0.max(spatial_norm)
                } else {
                    s0 + 0.5 * (t - t0) * (v0.powf(self.q) + spatial_norm.powf(self.q))
                }
            }
            _ => {
                if self.q.is_infinite() {
                    spatial_norm
                } else {
                    0.0
                }
            }
        };
        self.times.push(t);
        self.values.push(spatial_norm);
        self.partial.push(next);
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// The norm over `[t_0, t_i]`.
    pub fn prefix_value(&self, i: usize) -> f64 {
        let s = self.partial[i];
        if self.q.is_infinite() {
            s
        } else {
            s.powf(1.0 / self.q)
        }
    }

    /// Norm over every prefix, in sample order.
    pub fn prefix_values(&self) -> Vec<f64> {
        (0..self.partial.len()).map(|i| self.prefix_value(i)).collect()
    }

    pub fn value(&self) -> Result<f64> {
        if self.is_empty() {
            return Err(Error::EmptySet("mixed norm of an empty trajectory".into()));
        }
        Ok(self.prefix_value(self.partial.len() - 1))
    }
}

/// Accumulator of `||u(t)||_p` over the stored states of a trajectory.
pub fn mixed_norm_series(traj: &Trajectory, basis: &Basis, q: f64, p: f64) -> Result<MixedNormAccumulator> {
    if traj.states.is_empty() {
        return Err(Error::EmptySet("mixed norm of an empty trajectory".into()));
    }
    let mut acc = MixedNormAccumulator::new(q, p)?;
    for s in &traj.states {
        acc.push(s.t, lp_norm(&basis.from_spectral(&s.u)?, basis, p)?);
    }
    Ok(acc)
}

/// `(int_0^T ||u(t)||_p^q dt)^(1/q)`.
pub fn mixed_norm(traj: &Trajectory, basis: &Basis, q: f64, p: f64) -> Result<f64> {
    mixed_norm_series(traj, basis, q, p)?.value()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapReport {
    pub k_const: f64,
    pub c1: f64,
    /// Smallest positive root of `x = K + C1 x^5`; `None` when no root exists.
    pub first_root: Option<f64>,
    /// `X(T_i) = ||u||_{L^5 L^10}` on `[0, T_i]` for every sample prefix.
    pub prefix_norms: Vec<f64>,
    pub max_norm: f64,
    /// `r1 - max X`; negative when the norm leaves the trapping interval.
    pub margin: Option<f64>,
    pub trapped: bool,
    pub note: String,
}

/// First root of `x - C1 x^5 = K` on `(0, (5 C1)^(-1/4)]`, or `None` when `K` exceeds
/// the maximum of the left side.
pub fn bootstrap_root(k_const: f64, c1: f64) -> Result<Option<f64>> {
    if !(k_const >= 0.0) || !(c1 > 0.0) || !k_const.is_finite() || !c1.is_finite() {
        return Err(Error::InvalidParameter(format!("bootstrap constants must satisfy K >= 0, C1 > 0 (got {k_const}, {c1})")));
    }
    if k_const == 0.0 {
        return Ok(Some(0.0));
    }
    let x_star = (5.0 * c1).powf(-0.25);
    let g = |x: f64| x - c1 * x.powi(5) - k_const;
    if g(x_star) < 0.0 {
        return Ok(None);
    }
    let (mut lo, mut hi) = (0.0, x_star);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= f64::EPSILON * hi {
            break;
        }
    }
    Ok(Some(0.5 * (lo + hi)))
}

/// Track the critical norm on nested prefixes against the bootstrap threshold.
pub fn bootstrap_monitor(traj: &Trajectory, k_const: f64, c1: f64) -> Result<BootstrapReport> {
    if traj.strichartz_5_10.is_empty() {
        return Err(Error::EmptySet("bootstrap monitor on an empty trajectory".into()));
    }
    let root = bootstrap_root(k_const, c1)?;
    let prefix_norms = traj.strichartz_5_10.prefix_values();
    let max_norm = prefix_norms.iter().copied().fold(0.0, f64::max);
    let (margin, trapped, note) = match root {
        Some(r) => {
            let trapped = if r == 0.0 { max_norm == 0.0 } else { max_norm < r };
            let note = if trapped { "below first root" } else { "exits trapping interval" };
            (Some(r - max_norm), trapped, note.to_string())
        }
        None => (None, false, "forbidden-region absent".to_string()),
    };
    Ok(BootstrapReport { k_const, c1, first_root: root, prefix_norms, max_norm, margin, trapped, note })
}
