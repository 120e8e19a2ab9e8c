//! Spectral-Galerkin simulation of the energy-critical quintic wave equation with
//! localized Kelvin-Voigt damping on a Dirichlet box, plus a harness of numerical
//! checks for its energy, decay and frequency-splitting estimates.

pub mod basis;
pub mod damping;
pub mod dynamics;
pub mod error;
pub mod multipliers;
pub mod nonlinearity;
pub mod norms;
pub mod scenario;
pub mod verify;

pub use basis::{Basis, Domain, GridField, SpectralField};
pub use damping::{
    assemble_kv_matrix, make_profile, profile_from_grid, ConstantProvenance, DampingPreset, DampingProfile,
    KelvinVoigtMatrix,
};
pub use dynamics::{Integrator, SampleRecord, Scheme, SchemeConfig, State, Trajectory};
pub use error::{Error, Result};
pub use multipliers::{Cutoff, FrequencyThreshold};
pub use nonlinearity::Truncation;
pub use norms::MixedNormAccumulator;
pub use scenario::{InitialData, Scenario, Setup};
pub use verify::{CheckReport, DecayFit};
