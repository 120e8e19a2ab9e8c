//! Fixtures shared by the benchmarks.

use std::f64::consts::PI;

use kvwave_core::{
    assemble_kv_matrix, make_profile, Basis, DampingPreset, Domain, InitialData, KelvinVoigtMatrix, SpectralField,
    State,
};

pub fn line_basis(m: usize) -> Basis {
    Basis::new(Domain::new(vec![PI]).unwrap(), m, 4 * m).unwrap()
}

pub fn square_basis(m: usize) -> Basis {
    Basis::new(Domain::new(vec![PI, PI]).unwrap(), m, 4 * m).unwrap()
}

pub fn bump(basis: &Basis) -> KelvinVoigtMatrix {
    let center = vec![1.5; basis.dimension()];
    let p = make_profile(&DampingPreset::SquaredBump { eta: 1.0, center, radius: 0.8 }, basis).unwrap();
    assemble_kv_matrix(&p, basis).unwrap()
}

pub fn random_state(basis: &Basis, seed: u64) -> State {
    InitialData::RandomH1 { seed, decay: 3.0, amplitude: 2.0, velocity_amplitude: 0.5 }.state(basis).unwrap()
}

pub fn random_field(basis: &Basis, seed: u64) -> SpectralField {
    random_state(basis, seed).u
}
