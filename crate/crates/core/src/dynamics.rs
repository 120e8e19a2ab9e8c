//! Time integration of the projected system `g'' + Lambda g + K g' + P f_k(g) = 0`.
//!
//! Three schemes are available:
//!
//! * [`Scheme::StrangPade4`] (default): half-kicks with the nonlinear source around
//!   the linear flow of `(Lambda, K)` advanced by the (2,2) Pade approximant of the
//!   exponential (the stability function of two-stage Gauss-Legendre). Second order
//!   overall, fourth order and A-stable on the linear part. The linear propagator is
//!   precomputed once per `dt`.
//! * [`Scheme::ImexCn`]: trapezoidal rule on the linear pair with the source taken
//!   at the explicit midpoint predictor `u + dt/2 v`. One Cholesky factorization of
//!   `I + dt/2 K + dt^2/4 Lambda` is reused for every step.
//! * [`Scheme::FullyImplicitNewton`]: trapezoidal rule on the full right side,
//!   solved by Newton's method.
//!
//! The cumulative dissipation `D(t)` is the trapezoidal sum of `v^T K v` over every
//! step, so `E(t) + D(t) - E(0)` closes to second order for all three schemes.

use std::cell::Cell;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::basis::{Basis, GridField, SpectralField};
use crate::damping::KelvinVoigtMatrix;
use crate::error::{Error, Result};
use crate::multipliers::{project_high, project_low, FrequencyThreshold};
use crate::nonlinearity::{nonlinearity_jacobian, potential_energy, Truncation};
use crate::norms::{lp_norm, MixedNormAccumulator};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct State {
    pub u: SpectralField,
    pub v: SpectralField,
    pub t: f64,
}

impl State {
    pub fn new(u: SpectralField, v: SpectralField) -> Result<Self> {
        if u.len() != v.len() {
            return Err(Error::LengthMismatch { expected: u.len(), got: v.len() });
        }
        Ok(State { u, v, t: 0.0 })
    }

    pub fn zeros(n: usize) -> Self {
        State { u: SpectralField::zeros(n), v: SpectralField::zeros(n), t: 0.0 }
    }

    pub fn is_finite(&self) -> bool {
        self.u.is_finite() && self.v.is_finite() && self.t.is_finite()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    #[default]
    StrangPade4,
    ImexCn,
    FullyImplicitNewton,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeConfig {
    pub dt: f64,
    #[serde(default)]
    pub scheme: Scheme,
    #[serde(default = "default_newton_tol")]
    pub newton_tol: f64,
    #[serde(default = "default_newton_iters")]
    pub newton_max_iters: usize,
}

fn default_newton_tol() -> f64 {
    1e-12
}

fn default_newton_iters() -> usize {
    25
}

impl SchemeConfig {
    pub fn new(dt: f64, scheme: Scheme) -> Self {
        SchemeConfig { dt, scheme, newton_tol: default_newton_tol(), newton_max_iters: default_newton_iters() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::InvalidParameter(format!("dt must be positive (got {})", self.dt)));
        }
        if !(self.newton_tol > 0.0) || self.newton_max_iters == 0 {
            return Err(Error::InvalidParameter("Newton tolerance and iteration cap must be positive".into()));
        }
        Ok(())
    }
}

/// `E = 1/2 ||v||^2 + 1/2 ||grad u||^2 + int F_k(u)`.
pub fn energy(state: &State, basis: &Basis, trunc: &Truncation) -> Result<f64> {
    let kinetic = 0.5 * state.v.dot(&state.v);
    let h1 = basis.h1_norm(&state.u);
    Ok(kinetic + 0.5 * h1 * h1 + potential_energy(&state.u, basis, trunc)?)
}

/// Quadratic part of the energy, `1/2 ||v||^2 + 1/2 ||grad u||^2`.
pub fn linear_energy(u: &SpectralField, v: &SpectralField, basis: &Basis) -> f64 {
    let h1 = basis.h1_norm(u);
    0.5 * v.dot(v) + 0.5 * h1 * h1
}

/// `Y = 1/2 ||grad v||^2 + 1/2 ||Laplacian u||^2`.
pub fn strong_energy(state: &State, basis: &Basis) -> f64 {
    basis
        .eigenvalues()
        .iter()
        .zip(state.u.0.iter().zip(&state.v.0))
        .map(|(l, (u, v))| 0.5 * l * v * v + 0.5 * l * l * u * u)
        .sum()
}

/// Per-sample diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub t: f64,
    pub energy: f64,
    pub strong_energy: f64,
    /// `v^T K v`.
    pub dissipation_rate: f64,
    /// Trapezoidal time integral of `v^T K v` over all steps so far.
    pub cumulative_dissipation: f64,
    /// `(E_low, E_high)` of the quadratic energy for each configured threshold.
    pub split_energies: Vec<(f64, f64)>,
    pub l10: f64,
    pub l12: f64,
    pub sup_norm: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Trajectory {
    pub dt: f64,
    pub scheme: Scheme,
    pub thresholds: Vec<f64>,
    pub samples: Vec<SampleRecord>,
    pub states: Vec<State>,
    pub strichartz_5_10: MixedNormAccumulator,
    pub strichartz_4_12: MixedNormAccumulator,
    /// Largest `|u|` at any grid point where the source was evaluated. The truncation
    /// was never engaged iff this is at most `k`.
    pub peak_source_amplitude: f64,
}

impl Trajectory {
    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.t).collect()
    }

    pub fn energies(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.energy).collect()
    }

    pub fn initial_energy(&self) -> f64 {
        self.samples.first().map(|s| s.energy).unwrap_or(0.0)
    }

    pub fn final_time(&self) -> f64 {
        self.samples.last().map(|s| s.t).unwrap_or(0.0)
    }

    /// Largest `max_x |u(t, x)|` over the samples.
    pub fn sup_norm(&self) -> f64 {
        self.samples.iter().map(|s| s.sup_norm).fold(0.0, f64::max)
    }

    /// `max_t |E + D - E(0)| / max(E(0), floor)`.
    pub fn energy_identity_residual(&self) -> f64 {
        let e0 = self.initial_energy();
        let scale = e0.max(f64::MIN_POSITIVE);
        self.samples
            .iter()
            .map(|s| (s.energy + s.cumulative_dissipation - e0).abs() / scale)
            .fold(0.0, f64::max)
    }
}

enum Prepared {
    Cn(Cholesky<f64, Dyn>),
    Newton,
    Strang(DMatrix<f64>),
}

/// A time stepper bound to one basis, Kelvin-Voigt matrix, truncation and scheme.
/// Without a truncation the source is switched off and the system is linear.
pub struct Integrator<'a> {
    basis: &'a Basis,
    kv: &'a KelvinVoigtMatrix,
    trunc: Option<Truncation>,
    cfg: SchemeConfig,
    prepared: Prepared,
    peak: Cell<f64>,
}

impl<'a> Integrator<'a> {
    pub fn new(basis: &'a Basis, kv: &'a KelvinVoigtMatrix, trunc: Truncation, cfg: SchemeConfig) -> Result<Self> {
        Self::build(basis, kv, Some(trunc), cfg)
    }

    /// The linear damped wave system, `g'' + Lambda g + K g' = 0`.
    pub fn linear(basis: &'a Basis, kv: &'a KelvinVoigtMatrix, cfg: SchemeConfig) -> Result<Self> {
        Self::build(basis, kv, None, cfg)
    }

    fn build(basis: &'a Basis, kv: &'a KelvinVoigtMatrix, trunc: Option<Truncation>, cfg: SchemeConfig) -> Result<Self> {
        cfg.validate()?;
        let n = basis.mode_count();
        if kv.size() != n {
            return Err(Error::LengthMismatch { expected: n, got: kv.size() });
        }
        let dt = cfg.dt;
        let lambda = basis.eigenvalues();
        let prepared = match cfg.scheme {
            Scheme::ImexCn => {
                let mut a = kv.matrix() * (0.5 * dt);
                for i in 0..n {
                    a[(i, i)] += 1.0 + 0.25 * dt * dt * lambda[i];
                }
                Prepared::Cn(
                    a.cholesky().ok_or_else(|| Error::Factorization("CN system matrix is not positive definite".into()))?,
                )
            }
            Scheme::FullyImplicitNewton => Prepared::Newton,
            Scheme::StrangPade4 => {
                // Generator of the linear flow on (u, v).
                let mut l = DMatrix::<f64>::zeros(2 * n, 2 * n);
                for i in 0..n {
                    l[(i, n + i)] = 1.0;
                    l[(n + i, i)] = -lambda[i];
                }
                l.view_mut((n, n), (n, n)).copy_from(&(-kv.matrix()));
                let l2 = &l * &l;
                let id = DMatrix::<f64>::identity(2 * n, 2 * n);
                let p = &id - &l * (0.5 * dt) + &l2 * (dt * dt / 12.0);
                let q = &id + &l * (0.5 * dt) + &l2 * (dt * dt / 12.0);
                let prop = p
                    .lu()
                    .solve(&q)
                    .ok_or_else(|| Error::Factorization("Pade denominator is singular".into()))?;
                Prepared::Strang(prop)
            }
        };
        Ok(Integrator { basis, kv, trunc, cfg, prepared, peak: Cell::new(0.0) })
    }

    pub fn config(&self) -> &SchemeConfig {
        &self.cfg
    }

    pub fn truncation(&self) -> Option<&Truncation> {
        self.trunc.as_ref()
    }

    pub fn basis(&self) -> &Basis {
        self.basis
    }

    /// Upper bound on the 2-norm condition number of the implicit CN operator
    /// `I + dt/2 K + dt^2/4 Lambda` (its smallest eigenvalue is at least 1).
    pub fn condition_estimate(&self) -> f64 {
        let dt = self.cfg.dt;
        let k = self.kv.matrix();
        let row_sum = (0..k.nrows()).map(|i| k.row(i).iter().map(|x| x.abs()).sum::<f64>()).fold(0.0, f64::max);
        let lmax = self.basis.eigenvalues().last().copied().unwrap_or(0.0);
        1.0 + 0.5 * dt * row_sum + 0.25 * dt * dt * lmax
    }

    fn check_state(&self, s: &State) -> Result<()> {
        let n = self.basis.mode_count();
        for f in [&s.u, &s.v] {
            if f.len() != n {
                return Err(Error::LengthMismatch { expected: n, got: f.len() });
            }
        }
        Ok(())
    }

    fn force(&self, u: &SpectralField) -> Result<SpectralField> {
        let Some(trunc) = &self.trunc else {
            return Ok(SpectralField::zeros(u.len()));
        };
        let grid = self.basis.from_spectral(u)?;
        self.peak.set(self.peak.get().max(grid.max_abs()));
        let fu = GridField(grid.0.iter().map(|&s| trunc.f(s)).collect());
        self.basis.to_spectral(&fu)
    }

    /// `(du, dv) = (v, -Lambda u - K v - P f_k(u))`.
    pub fn rhs(&self, state: &State) -> Result<(SpectralField, SpectralField)> {
        self.check_state(state)?;
        let f = self.force(&state.u)?;
        let kv = self.kv.apply(&state.v)?;
        let dv = self
            .basis
            .eigenvalues()
            .iter()
            .zip(state.u.0.iter().zip(kv.0.iter().zip(&f.0)))
            .map(|(l, (u, (k, f)))| -l * u - k - f)
            .collect();
        Ok((state.v.clone(), SpectralField(dv)))
    }

    /// Advance one step.
    pub fn step(&self, state: &State) -> Result<State> {
        self.check_state(state)?;
        let force = match self.prepared {
            Prepared::Strang(_) => Some(self.force(&state.u)?),
            _ => None,
        };
        let (next, _) = self.step_with(state, force)?;
        Ok(next)
    }

    /// One step; for the Strang scheme, `force` is `P f_k(u_n)` and the returned force
    /// is `P f_k(u_{n+1})` so the caller can reuse it.
    fn step_with(&self, state: &State, force: Option<SpectralField>) -> Result<(State, Option<SpectralField>)> {
        let dt = self.cfg.dt;
        let n = self.basis.mode_count();
        let lambda = self.basis.eigenvalues();
        let t_next = state.t + dt;
        let next = match &self.prepared {
            Prepared::Strang(prop) => {
                let f0 = match force {
                    Some(f) => f,
                    None => self.force(&state.u)?,
                };
                let mut y = DVector::<f64>::zeros(2 * n);
                for i in 0..n {
                    y[i] = state.u.0[i];
                    y[n + i] = state.v.0[i] - 0.5 * dt * f0.0[i];
                }
                let z = prop * y;
                let u = SpectralField(z.as_slice()[..n].to_vec());
                if !u.is_finite() {
                    return Err(Error::NonFinite { t: t_next });
                }
                let f1 = self.force(&u)?;
                let v = SpectralField((0..n).map(|i| z[n + i] - 0.5 * dt * f1.0[i]).collect());
                return self.finish(State { u, v, t: t_next }).map(|s| (s, Some(f1)));
            }
            Prepared::Cn(chol) => {
                let predictor = state.u.axpy(0.5 * dt, &state.v);
                let f = self.force(&predictor)?;
                let kv = self.kv.apply(&state.v)?;
                let rhs = DVector::from_fn(n, |i, _| {
                    state.v.0[i]
                        - dt * lambda[i] * state.u.0[i]
                        - 0.25 * dt * dt * lambda[i] * state.v.0[i]
                        - 0.5 * dt * kv.0[i]
                        - dt * f.0[i]
                });
                let v_next = chol.solve(&rhs);
                let v = SpectralField(v_next.as_slice().to_vec());
                let u = SpectralField((0..n).map(|i| state.u.0[i] + 0.5 * dt * (state.v.0[i] + v.0[i])).collect());
                State { u, v, t: t_next }
            }
            Prepared::Newton => self.newton_step(state)?,
        };
        self.finish(next).map(|s| (s, None))
    }

    fn finish(&self, s: State) -> Result<State> {
        if s.is_finite() {
            Ok(s)
        } else {
            Err(Error::NonFinite { t: s.t })
        }
    }

    fn newton_step(&self, state: &State) -> Result<State> {
        let dt = self.cfg.dt;
        let n = self.basis.mode_count();
        let lambda = self.basis.eigenvalues();
        let t_next = state.t + dt;
        let f0 = self.force(&state.u)?;
        let k_v0 = self.kv.apply(&state.v)?;
        let velocity = |x: &SpectralField| -> SpectralField {
            SpectralField((0..n).map(|i| 2.0 * (x.0[i] - state.u.0[i]) / dt - state.v.0[i]).collect())
        };
        let mut x = state.u.axpy(dt, &state.v);
        let mut residual_norm = f64::INFINITY;
        for iter in 0..self.cfg.newton_max_iters {
            let v = velocity(&x);
            let fx = self.force(&x)?;
            let k_v = self.kv.apply(&v)?;
            let r = DVector::from_fn(n, |i, _| {
                (v.0[i] - state.v.0[i])
                    + 0.5 * dt * (lambda[i] * (state.u.0[i] + x.0[i]) + k_v0.0[i] + k_v.0[i] + f0.0[i] + fx.0[i])
            });
            residual_norm = r.norm();
            if !residual_norm.is_finite() {
                break;
            }
            let jf = match &self.trunc {
                Some(t) => nonlinearity_jacobian(&x, self.basis, t)?,
                None => vec![0.0; n * n],
            };
            let mut jac = self.kv.matrix().clone();
            for i in 0..n {
                jac[(i, i)] += 2.0 / dt + 0.5 * dt * lambda[i];
                for j in 0..n {
                    jac[(i, j)] += 0.5 * dt * jf[i * n + j];
                }
            }
            let delta = jac
                .lu()
                .solve(&(-r))
                .ok_or_else(|| Error::Factorization("singular Newton Jacobian".into()))?;
            let step_norm = delta.norm();
            for i in 0..n {
                x.0[i] += delta[i];
            }
            if !x.is_finite() {
                break;
            }
            let scale = 1.0 + x.0.iter().map(|a| a * a).sum::<f64>().sqrt();
            if step_norm <= self.cfg.newton_tol * scale {
                let v = velocity(&x);
                return Ok(State { u: x, v, t: t_next });
            }
            if iter + 1 == self.cfg.newton_max_iters {
                residual_norm = step_norm;
            }
        }
        Err(Error::NewtonDivergence { t: t_next, residual: residual_norm, iters: self.cfg.newton_max_iters })
    }

    fn record(&self, state: &State, d_rate: f64, d_cum: f64, thresholds: &[FrequencyThreshold]) -> Result<SampleRecord> {
        let grid = self.basis.from_spectral(&state.u)?;
        self.peak.set(self.peak.get().max(grid.max_abs()));
        let split_energies = thresholds
            .iter()
            .map(|&n| {
                let low = linear_energy(&project_low(&state.u, self.basis, n), &project_low(&state.v, self.basis, n), self.basis);
                let high =
                    linear_energy(&project_high(&state.u, self.basis, n), &project_high(&state.v, self.basis, n), self.basis);
                (low, high)
            })
            .collect();
        Ok(SampleRecord {
            t: state.t,
            energy: match &self.trunc {
                Some(t) => energy(state, self.basis, t)?,
                None => linear_energy(&state.u, &state.v, self.basis),
            },
            strong_energy: strong_energy(state, self.basis),
            dissipation_rate: d_rate,
            cumulative_dissipation: d_cum,
            split_energies,
            l10: lp_norm(&grid, self.basis, 10.0)?,
            l12: lp_norm(&grid, self.basis, 12.0)?,
            sup_norm: grid.max_abs(),
        })
    }

    /// Integrate from `initial` to `t_end`, recording every `sample_every` steps and
    /// the final step. `thresholds` are the frequency cuts for the split energies.
    pub fn run(&self, initial: &State, t_end: f64, sample_every: usize, thresholds: &[f64]) -> Result<Trajectory> {
        self.check_state(initial)?;
        if !(t_end > 0.0) {
            return Err(Error::InvalidParameter(format!("final time must be positive (got {t_end})")));
        }
        if sample_every == 0 {
            return Err(Error::InvalidParameter("sample_every must be at least 1".into()));
        }
        let cuts = thresholds.iter().map(|&n| FrequencyThreshold::new(n)).collect::<Result<Vec<_>>>()?;
        let dt = self.cfg.dt;
        let steps = ((t_end / dt).round() as usize).max(1);

        self.peak.set(0.0);
        let mut state = initial.clone();
        if !state.is_finite() {
            return Err(Error::NonFinite { t: state.t });
        }
        let mut rate = self.kv.dissipation_quadratic_form(&state.v)?;
        let mut cumulative = 0.0;
        let mut samples = vec![self.record(&state, rate, cumulative, &cuts)?];
        let mut states = vec![state.clone()];
        let mut s510 = MixedNormAccumulator::new(5.0, 10.0)?;
        let mut s412 = MixedNormAccumulator::new(4.0, 12.0)?;
        s510.push(state.t, samples[0].l10);
        s412.push(state.t, samples[0].l12);

        let mut force = match self.prepared {
            Prepared::Strang(_) => Some(self.force(&state.u)?),
            _ => None,
        };
        for step in 1..=steps {
            let (next, f) = self.step_with(&state, force.take())?;
            force = f;
            // Keep the clock exact rather than accumulating dt.
            state = State { t: initial.t + step as f64 * dt, ..next };
            let new_rate = self.kv.dissipation_quadratic_form(&state.v)?;
            cumulative += 0.5 * dt * (rate + new_rate);
            rate = new_rate;
            if step % sample_every == 0 || step == steps {
                let rec = self.record(&state, rate, cumulative, &cuts)?;
                if !rec.energy.is_finite() {
                    return Err(Error::NonFinite { t: state.t });
                }
                s510.push(rec.t, rec.l10);
                s412.push(rec.t, rec.l12);
                samples.push(rec);
                states.push(state.clone());
            }
        }
        Ok(Trajectory {
            dt,
            scheme: self.cfg.scheme,
            thresholds: thresholds.to_vec(),
            samples,
            states,
            strichartz_5_10: s510,
            strichartz_4_12: s412,
            peak_source_amplitude: self.peak.get(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::Domain;
    use crate::damping::{assemble_kv_matrix, make_profile, DampingPreset};
    use std::f64::consts::PI;

    fn setup(m: usize, alpha: f64) -> (Basis, KelvinVoigtMatrix) {
        let b = Basis::new(Domain::new(vec![PI]).unwrap(), m, 4 * m).unwrap();
        let p = make_profile(&DampingPreset::Constant { alpha }, &b).unwrap();
        let k = assemble_kv_matrix(&p, &b).unwrap();
        (b, k)
    }

    #[test]
    fn zero_state_is_a_fixed_point() {
        let (b, k) = setup(8, 0.5);
        let t = Truncation::new(1.0).unwrap();
        for scheme in [Scheme::StrangPade4, Scheme::ImexCn, Scheme::FullyImplicitNewton] {
            let integ = Integrator::new(&b, &k, t, SchemeConfig::new(0.01, scheme)).unwrap();
            let (du, dv) = integ.rhs(&State::zeros(8)).unwrap();
            assert!(du.0.iter().chain(&dv.0).all(|&x| x == 0.0));
            let traj = integ.run(&State::zeros(8), 0.5, 10, &[2.0]).unwrap();
            assert!(traj.states.iter().all(|s| s.u.0.iter().chain(&s.v.0).all(|&x| x == 0.0)));
            assert!(traj.samples.iter().all(|s| s.energy == 0.0 && s.cumulative_dissipation == 0.0));
        }
    }

    #[test]
    fn rhs_single_mode_matches_modal_ode() {
        let alpha = 0.3;
        let (b, k) = setup(4, alpha);
        let t = Truncation::new(1e3).unwrap();
        let integ = Integrator::new(&b, &k, t, SchemeConfig::new(0.01, Scheme::ImexCn)).unwrap();
        let (u, v) = (0.2, -0.7);
        let s = State::new(SpectralField(vec![u, 0.0, 0.0, 0.0]), SpectralField(vec![v, 0.0, 0.0, 0.0])).unwrap();
        let (_, dv) = integ.rhs(&s).unwrap();
        // quintic term: u^5 (phi_1^5, phi_1) = u^5 * (2/pi)^3 * int sin^6 = u^5 (2/pi)^3 (5 pi / 16)
        let quintic = u.powi(5) * (2.0 / PI).powi(3) * 5.0 * PI / 16.0;
        let want = -(u + alpha * v) - quintic;
        assert!((dv.0[0] - want).abs() < 1e-13);
        // Only odd modes are excited by phi_1^5.
        assert!(dv.0[1].abs() < 1e-15 && dv.0[3].abs() < 1e-15);
    }

    #[test]
    fn linearization_at_small_amplitude() {
        let (b, k) = setup(4, 0.0);
        let lin = Integrator::linear(&b, &k, SchemeConfig::new(0.01, Scheme::ImexCn)).unwrap();
        let s = State::new(SpectralField(vec![0.3, 0.0, 0.0, 0.0]), SpectralField::zeros(4)).unwrap();
        assert_eq!(lin.rhs(&s).unwrap().1 .0[0], -0.3);
        let t = Truncation::new(1e6).unwrap();
        let integ = Integrator::new(&b, &k, t, SchemeConfig::new(0.01, Scheme::ImexCn)).unwrap();
        let eps = 1e-6;
        let s = State::new(SpectralField(vec![eps, 0.0, 0.0, 0.0]), SpectralField::zeros(4)).unwrap();
        let (_, dv) = integ.rhs(&s).unwrap();
        assert!((dv.0[0] + eps).abs() < 1e-20);
    }

    #[test]
    fn energy_and_strong_energy_examples() {
        let (b, _) = setup(6, 0.0);
        let t = Truncation::new(1e3).unwrap();
        assert_eq!(energy(&State::zeros(6), &b, &t).unwrap(), 0.0);
        let s = State::new(SpectralField::zeros(6), SpectralField::unit(6, 0)).unwrap();
        assert!((energy(&s, &b, &t).unwrap() - 0.5).abs() < 1e-15);
        let s = State::new(SpectralField::unit(6, 0), SpectralField::zeros(6)).unwrap();
        // 1/2 lambda_1 + 1/6 int phi_1^6, with int_0^pi sin^6 = 5 pi / 16
        let sextic = (2.0 / PI).powi(3) * 5.0 * PI / 16.0 / 6.0;
        assert!((energy(&s, &b, &t).unwrap() - 0.5 - sextic).abs() < 1e-14);
        assert!((strong_energy(&s, &b) - 0.5).abs() < 1e-15);
        assert_eq!(strong_energy(&State::zeros(6), &b), 0.0);
    }

    #[test]
    fn harmonic_oscillator_all_schemes() {
        let (b, k) = setup(3, 0.0);
        let lambda: f64 = 4.0;
        let init = State::new(SpectralField(vec![0.0, 1.0, 0.0]), SpectralField::zeros(3)).unwrap();
        // CN phase error is omega^3 dt^2 t / 12 ~ 7e-4 here; the Pade flow is exact to O(dt^4).
        for (scheme, tol) in [(Scheme::StrangPade4, 1e-8), (Scheme::ImexCn, 1e-3), (Scheme::FullyImplicitNewton, 1e-3)] {
            let integ = Integrator::linear(&b, &k, SchemeConfig::new(1e-2, scheme)).unwrap();
            let traj = integ.run(&init, 10.0, 1, &[]).unwrap();
            let err = traj.states.iter().map(|s| (s.u.0[1] - (lambda.sqrt() * s.t).cos()).abs()).fold(0.0, f64::max);
            assert!(err < tol, "{scheme:?}: {err}");
            // The linear undamped energy is conserved exactly by all three schemes.
            let e = traj.energies();
            assert!(e.iter().all(|x| (x - e[0]).abs() < 1e-12 * e[0]), "{scheme:?}");
        }
    }

    #[test]
    fn cn_error_halves_twice() {
        let (b, k) = setup(3, 0.0);
        let init = State::new(SpectralField(vec![1.0, 0.0, 0.0]), SpectralField::zeros(3)).unwrap();
        let err = |dt: f64| {
            let integ = Integrator::linear(&b, &k, SchemeConfig::new(dt, Scheme::ImexCn)).unwrap();
            let traj = integ.run(&init, 10.0, 1, &[]).unwrap();
            traj.states.iter().map(|s| (s.u.0[0] - s.t.cos()).abs()).fold(0.0, f64::max)
        };
        let ratio = err(2e-2) / err(1e-2);
        assert!((3.8..4.2).contains(&ratio), "{ratio}");
    }

    #[test]
    fn quintic_energy_drift_is_small() {
        let b = Basis::new(Domain::new(vec![PI]).unwrap(), 16, 64).unwrap();
        let k = KelvinVoigtMatrix::zeros(16);
        let t = Truncation::new(10.0).unwrap();
        let mut u = SpectralField::zeros(16);
        u.0[0] = 1.2;
        u.0[2] = -0.4;
        let init = State::new(u, SpectralField::zeros(16)).unwrap();
        for scheme in [Scheme::StrangPade4, Scheme::ImexCn] {
            let integ = Integrator::new(&b, &k, t, SchemeConfig::new(1e-3, scheme)).unwrap();
            let traj = integ.run(&init, 5.0, 50, &[]).unwrap();
            let e0 = traj.initial_energy();
            let drift = traj.samples.iter().map(|s| (s.energy - e0).abs() / e0).fold(0.0, f64::max) / 5.0;
            assert!(drift <= 1e-6, "{scheme:?}: {drift}");
            assert!(traj.samples.iter().all(|s| s.cumulative_dissipation == 0.0));
        }
    }

    #[test]
    fn damped_energy_is_monotone_and_closes() {
        let b = Basis::new(Domain::new(vec![PI]).unwrap(), 16, 64).unwrap();
        let p = make_profile(&DampingPreset::SquaredBump { eta: 1.0, center: vec![1.5], radius: 0.8 }, &b).unwrap();
        let k = assemble_kv_matrix(&p, &b).unwrap();
        let t = Truncation::new(10.0).unwrap();
        let mut u = SpectralField::zeros(16);
        u.0[0] = 1.0;
        u.0[1] = 0.5;
        let init = State::new(u, SpectralField::zeros(16)).unwrap();
        let integ = Integrator::new(&b, &k, t, SchemeConfig::new(1e-3, Scheme::StrangPade4)).unwrap();
        let traj = integ.run(&init, 10.0, 100, &[2.0]).unwrap();
        let e = traj.energies();
        assert!(e.windows(2).all(|w| w[1] <= w[0] + 1e-9 * e[0]));
        assert!(traj.samples.windows(2).all(|w| w[1].cumulative_dissipation >= w[0].cumulative_dissipation));
        assert!(traj.energy_identity_residual() < 1e-6);
        assert!(e.last().unwrap() < &(0.5 * e[0]));
    }

    #[test]
    fn condition_estimate_bounds_the_cn_operator() {
        let (b, k) = setup(8, 0.5);
        let integ = Integrator::linear(&b, &k, SchemeConfig::new(0.1, Scheme::ImexCn)).unwrap();
        // Diagonal case: exact condition number is the largest diagonal entry.
        let want = 1.0 + 0.05 * 0.5 * 64.0 + 0.0025 * 64.0;
        assert!((integ.condition_estimate() - want).abs() < 1e-12);
    }

    #[test]
    fn schemes_are_second_order_on_damped_quintic() {
        let b = Basis::new(Domain::new(vec![PI]).unwrap(), 8, 32).unwrap();
        let p = make_profile(&DampingPreset::SquaredBump { eta: 0.5, center: vec![1.5], radius: 0.8 }, &b).unwrap();
        let k = assemble_kv_matrix(&p, &b).unwrap();
        let t = Truncation::new(5.0).unwrap();
        let init = State::new(SpectralField(vec![1.0, 0.3, -0.2, 0.0, 0.1, 0.0, 0.0, 0.0]), SpectralField::zeros(8)).unwrap();
        for scheme in [Scheme::StrangPade4, Scheme::ImexCn, Scheme::FullyImplicitNewton] {
            let run = |dt: f64| {
                let integ = Integrator::new(&b, &k, t, SchemeConfig::new(dt, scheme)).unwrap();
                integ.run(&init, 1.0, 1000, &[]).unwrap().states.last().unwrap().clone()
            };
            let (a, bb, c) = (run(4e-3), run(2e-3), run(1e-3));
            let e1 = a.u.axpy(-1.0, &bb.u).0.iter().map(|x| x * x).sum::<f64>().sqrt();
            let e2 = bb.u.axpy(-1.0, &c.u).0.iter().map(|x| x * x).sum::<f64>().sqrt();
            let ratio = e1 / e2;
            assert!((3.0..5.0).contains(&ratio), "{scheme:?}: {ratio}");
        }
    }

    #[test]
    fn run_validates_arguments() {
        let (b, k) = setup(4, 0.0);
        let t = Truncation::new(1.0).unwrap();
        let integ = Integrator::new(&b, &k, t, SchemeConfig::new(0.1, Scheme::ImexCn)).unwrap();
        assert!(integ.run(&State::zeros(4), 0.0, 1, &[]).is_err());
        assert!(integ.run(&State::zeros(4), 1.0, 0, &[]).is_err());
        assert!(integ.run(&State::zeros(3), 1.0, 1, &[]).is_err());
        assert!(Integrator::new(&b, &k, t, SchemeConfig::new(-1.0, Scheme::ImexCn)).is_err());
    }

    #[test]
    fn non_finite_initial_state_is_reported() {
        let (b, k) = setup(4, 0.0);
        let t = Truncation::new(1.0).unwrap();
        let integ = Integrator::new(&b, &k, t, SchemeConfig::new(0.1, Scheme::StrangPade4)).unwrap();
        let mut s = State::zeros(4);
        s.u.0[0] = f64::NAN;
        assert!(matches!(integ.run(&s, 1.0, 1, &[]), Err(Error::NonFinite { .. })));
    }
}
