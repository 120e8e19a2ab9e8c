//! A complete simulation setup (discretization, damping, truncation, scheme and
//! initial data), shared by the verification checks and the command-line driver.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::basis::{Basis, Domain, GridField, SpectralField};
use crate::damping::{assemble_kv_matrix, make_profile, DampingPreset, DampingProfile, KelvinVoigtMatrix};
use crate::dynamics::{Integrator, SchemeConfig, State, Trajectory};
use crate::error::{Error, Result};
use crate::nonlinearity::Truncation;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialData {
    /// `u0 = amplitude * phi_j`, `u1 = 0`; `mode` is the 1-based multi-index.
    SingleMode { mode: Vec<usize>, amplitude: f64 },
    /// Gaussian coefficients weighted by `(1 + lambda)^(-decay / 2)`, rescaled so that
    /// `||grad u0|| = amplitude` and `||u1|| = velocity_amplitude`.
    RandomH1 {
        seed: u64,
        decay: f64,
        amplitude: f64,
        #[serde(default)]
        velocity_amplitude: f64,
    },
    /// Explicit coefficient vectors.
    Spectral { u: Vec<f64>, v: Vec<f64> },
    /// Values on the quadrature grid (row-major), projected onto the modes.
    Grid {
        u: Vec<f64>,
        #[serde(default)]
        v: Option<Vec<f64>>,
    },
}

fn gaussian_field(basis: &Basis, rng: &mut ChaCha8Rng, decay: f64, norm: impl Fn(&SpectralField) -> f64, target: f64) -> SpectralField {
    let mut c = SpectralField(
        basis
            .eigenvalues()
            .iter()
            .map(|l| {
                let z: f64 = StandardNormal.sample(rng);
                z * (1.0 + l).powf(-0.5 * decay)
            })
            .collect(),
    );
    let n = norm(&c);
    if target == 0.0 || n == 0.0 {
        return SpectralField::zeros(c.len());
    }
    c = c.scaled(target / n);
    c
}

impl InitialData {
    pub fn state(&self, basis: &Basis) -> Result<State> {
        let n = basis.mode_count();
        match self {
            InitialData::SingleMode { mode, amplitude } => {
                let j = basis.mode_of(mode).ok_or_else(|| {
                    Error::InvalidParameter(format!("mode {mode:?} is not in the basis"))
                })?;
                State::new(SpectralField::unit(n, j).scaled(*amplitude), SpectralField::zeros(n))
            }
            InitialData::RandomH1 { seed, decay, amplitude, velocity_amplitude } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                let u = gaussian_field(basis, &mut rng, *decay, |c| basis.h1_norm(c), *amplitude);
                let v = gaussian_field(basis, &mut rng, *decay, |c| basis.l2_norm(c), *velocity_amplitude);
                State::new(u, v)
            }
            InitialData::Spectral { u, v } => {
                for f in [u, v] {
                    if f.len() != n {
                        return Err(Error::LengthMismatch { expected: n, got: f.len() });
                    }
                }
                State::new(SpectralField(u.clone()), SpectralField(v.clone()))
            }
            InitialData::Grid { u, v } => {
                let u = basis.to_spectral(&GridField(u.clone()))?;
                let v = match v {
                    Some(v) => basis.to_spectral(&GridField(v.clone()))?,
                    None => SpectralField::zeros(n),
                };
                State::new(u, v)
            }
        }
    }
}

fn default_sample_every() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub edge_lengths: Vec<f64>,
    pub modes_per_axis: usize,
    /// Quadrature intervals per axis; defaults to `4 * modes_per_axis`.
    #[serde(default)]
    pub grid_intervals: Option<usize>,
    pub damping: DampingPreset,
    pub truncation: f64,
    /// Switch the source off and integrate the linear damped wave equation.
    #[serde(default)]
    pub linear: bool,
    pub scheme: SchemeConfig,
    pub final_time: f64,
    #[serde(default = "default_sample_every")]
    pub sample_every: usize,
    #[serde(default)]
    pub thresholds: Vec<f64>,
    pub initial: InitialData,
}

/// Discretization objects derived from a scenario.
#[derive(Debug, Clone)]
pub struct Setup {
    pub basis: Basis,
    pub profile: DampingProfile,
    pub kv: KelvinVoigtMatrix,
}

impl Setup {
    pub fn new(scenario: &Scenario) -> Result<Self> {
        let basis = scenario.basis()?;
        let profile = make_profile(&scenario.damping, &basis)?;
        let kv = assemble_kv_matrix(&profile, &basis)?;
        Ok(Setup { basis, profile, kv })
    }

    /// Run `scenario` (which must share this setup's discretization) from `initial`.
    pub fn run_from(&self, scenario: &Scenario, initial: &State) -> Result<Trajectory> {
        let integ = if scenario.linear {
            Integrator::linear(&self.basis, &self.kv, scenario.scheme)?
        } else {
            Integrator::new(&self.basis, &self.kv, Truncation::new(scenario.truncation)?, scenario.scheme)?
        };
        integ.run(initial, scenario.final_time, scenario.sample_every, &scenario.thresholds)
    }

    pub fn run(&self, scenario: &Scenario) -> Result<Trajectory> {
        let initial = scenario.initial.state(&self.basis)?;
        self.run_from(scenario, &initial)
    }
}

impl Scenario {
    pub fn basis(&self) -> Result<Basis> {
        let g = self.grid_intervals.unwrap_or(4 * self.modes_per_axis);
        Basis::new(Domain::new(self.edge_lengths.clone())?, self.modes_per_axis, g)
    }

    pub fn setup(&self) -> Result<Setup> {
        Setup::new(self)
    }

    pub fn run(&self) -> Result<(Setup, Trajectory)> {
        let setup = self.setup()?;
        let traj = setup.run(self)?;
        Ok((setup, traj))
    }

    pub fn with_truncation(&self, k: f64) -> Scenario {
        Scenario { truncation: k, ..self.clone() }
    }

    pub fn with_dt(&self, dt: f64) -> Scenario {
        let mut s = self.clone();
        s.scheme.dt = dt;
        s
    }
}
