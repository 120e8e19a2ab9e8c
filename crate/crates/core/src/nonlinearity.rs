//! The C1 truncation of the defocusing quintic term.
//!
//! `f_k(s) = s^5` on `|s| <= k` and continues linearly with slope `5 k^4` beyond,
//! so it is odd, globally Lipschitz, and agrees with the quintic on any orbit that
//! stays inside `[-k, k]`.

use serde::{Deserialize, Serialize};

use crate::basis::{Basis, GridField, SpectralField};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Truncation {
    k: f64,
}

impl Truncation {
    pub fn new(k: f64) -> Result<Self> {
        if !(k > 0.0) || k.is_nan() {
            return Err(Error::InvalidParameter(format!("truncation level must be positive (got {k})")));
        }
        Ok(Truncation { k })
    }

    pub fn level(&self) -> f64 {
        self.k
    }

    /// Global Lipschitz constant `5 k^4`.
    pub fn lipschitz(&self) -> f64 {
        5.0 * self.k.powi(4)
    }

    pub fn f(&self, s: f64) -> f64 {
        let a = s.abs();
        if a <= self.k {
            s.powi(5)
        } else {
            let k4 = self.k.powi(4);
            s.signum() * (k4 * self.k + 5.0 * k4 * (a - self.k))
        }
    }

    pub fn f_prime(&self, s: f64) -> f64 {
        let a = s.abs();
        if a <= self.k {
            5.0 * s.powi(4)
        } else {
            5.0 * self.k.powi(4)
        }
    }

    /// Antiderivative `F_k(s) = int_0^s f_k`, in closed form.
    pub fn antiderivative(&self, s: f64) -> f64 {
        let a = s.abs();
        if a <= self.k {
            a.powi(6) / 6.0
        } else {
            let k = self.k;
            let e = a - k;
            k.powi(6) / 6.0 + k.powi(5) * e + 2.5 * k.powi(4) * e * e
        }
    }

    /// Whether the truncation is inactive on every sample, i.e. `f_k = s^5` there.
    pub fn inactive_on(&self, samples: &[f64]) -> bool {
        samples.iter().all(|s| s.abs() <= self.k)
    }
}

/// The Galerkin source `P_M f_k(u)`: synthesize, apply `f_k` pointwise, project back.
pub fn apply_nonlinearity(c: &SpectralField, basis: &Basis, trunc: &Truncation) -> Result<SpectralField> {
    let u = basis.from_spectral(c)?;
    let fu = GridField(u.0.iter().map(|&s| trunc.f(s)).collect());
    basis.to_spectral(&fu)
}

/// Quadrature of `F_k(u)` over the domain.
pub fn potential_energy(c: &SpectralField, basis: &Basis, trunc: &Truncation) -> Result<f64> {
    let u = basis.from_spectral(c)?;
    Ok(u
        .0
        .iter()
        .zip(basis.quadrature_weights())
        .map(|(&s, w)| w * trunc.antiderivative(s))
        .sum())
}

/// Galerkin Jacobian of the source, `J_ij = (f_k'(u) phi_i, phi_j)_quad`.
pub fn nonlinearity_jacobian(c: &SpectralField, basis: &Basis, trunc: &Truncation) -> Result<Vec<f64>> {
    let n = basis.mode_count();
    let u = basis.from_spectral(c)?;
    let fp = GridField(u.0.iter().map(|&s| trunc.f_prime(s)).collect());
    let mut jac = vec![0.0; n * n];
    for j in 0..n {
        let col = basis.multiply(&fp, &SpectralField::unit(n, j))?;
        for i in 0..n {
            jac[i * n + j] = col.0[i];
        }
    }
    Ok(jac)
}

/// Relative change of the projected source when the quadrature grid is doubled.
///
/// For untruncated orbits and `G >= 4M` this sits at round-off; it grows when the
/// kink of `f_k` at `|s| = k` is sampled.
pub fn aliasing_residual(c: &SpectralField, basis: &Basis, trunc: &Truncation) -> Result<f64> {
    let fine = Basis::new(basis.domain().clone(), basis.modes_per_axis(), 2 * basis.grid_intervals())?;
    let coarse = apply_nonlinearity(c, basis, trunc)?;
    let refined = apply_nonlinearity(c, &fine, trunc)?;
    let diff: f64 = coarse.0.iter().zip(&refined.0).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    let scale = basis.l2_norm(&refined);
    Ok(if scale == 0.0 { diff } else { diff / scale })
}
