use super::{CheckReport, Series, Witness};
use crate::basis::{Basis, SpectralField};
use crate::damping::{DampingProfile, KelvinVoigtMatrix};
use crate::dynamics::{linear_energy, Trajectory};
use crate::error::{Error, Result};
use crate::multipliers::{low_symbol, project_high, project_low, tail_energy, FrequencyThreshold};

/// `eps(N) = ||grad P_{>N} u0|| + ||P_{>N} u1||` over `thresholds`: nonincreasing,
/// and negligible once `2 N` passes the spectral support of the data.
pub fn tail_scan(u0: &SpectralField, u1: &SpectralField, basis: &Basis, thresholds: &[f64]) -> Result<CheckReport> {
    if u0.0.iter().chain(&u1.0).all(|&x| x == 0.0) {
        return Err(Error::Degenerate("tail scan of zero data".into()));
    }
    if thresholds.is_empty() || thresholds.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter("thresholds must be nonempty and strictly increasing".into()));
    }
    let support = basis
        .eigenvalues()
        .iter()
        .zip(u0.0.iter().zip(&u1.0))
        .filter(|(_, (a, b))| **a != 0.0 || **b != 0.0)
        .map(|(l, _)| l.sqrt())
        .fold(0.0, f64::max);
    let mut rep = CheckReport::new("tail_vanishing");
    let mut series = Series::new("tail", &["N", "tail"]);
    let mut values = Vec::with_capacity(thresholds.len());
    for &n in thresholds {
        let v = tail_energy(u0, u1, basis, FrequencyThreshold::new(n)?);
        series.push(vec![n, v]);
        values.push(v);
    }
    let slack = 1e-12;
    let mut witness = None;
    for (i, w) in values.windows(2).enumerate() {
        if w[1] > w[0] + slack * values[0] {
            witness = Some(Witness::new(format!("tail increases at N = {}", thresholds[i + 1]), None, w[1] - w[0]));
            break;
        }
    }
    let last = *values.last().unwrap();
    let n_max = *thresholds.last().unwrap();
    rep.measure("tail_first", values[0]).measure("tail_last", last).measure("spectral_support", support);
    rep.tolerance("monotonicity_slack", slack).tolerance("final_fraction", 1e-3);
    if n_max >= support {
        if last > 1e-3 * values[0] && witness.is_none() {
            witness = Some(Witness::new("tail does not vanish above the spectral support", None, last));
        }
    } else {
        rep.note("largest threshold is below the spectral support; vanishing not tested");
    }
    rep.with_series(series);
    Ok(rep.conclude(witness.is_none(), witness))
}

/// Low/high energies per threshold and the measured low-frequency Kelvin-Voigt source
/// ratio `||P_{<=N} div(a grad v)|| / (N ||a grad v|| + eps)`, which is at most 2.
pub fn frequency_split_report(
    traj: &Trajectory,
    basis: &Basis,
    profile: &DampingProfile,
    kv: &KelvinVoigtMatrix,
    thresholds: &[f64],
) -> Result<CheckReport> {
    if traj.states.is_empty() {
        return Err(Error::EmptySet("trajectory has no stored states".into()));
    }
    let eps = 1e-300;
    let bound = 2.0;
    let mut rep = CheckReport::new("frequency_split");
    let mut series = Series::new("frequency_split", &["t", "N", "E_low", "E_high", "kv_ratio"]);
    let mut worst = (0.0_f64, 0.0_f64, 0.0_f64);
    let mut partition_exact = true;
    let weights = basis.quadrature_weights();
    for &n in thresholds {
        let cut = FrequencyThreshold::new(n)?;
        let sym = low_symbol(basis, cut);
        for s in &traj.states {
            let (ul, uh) = (project_low(&s.u, basis, cut), project_high(&s.u, basis, cut));
            let (vl, vh) = (project_low(&s.v, basis, cut), project_high(&s.v, basis, cut));
            partition_exact &= ul.0.iter().zip(&uh.0).zip(&s.u.0).all(|((a, b), c)| a + b == *c);
            partition_exact &= vl.0.iter().zip(&vh.0).zip(&s.v.0).all(|((a, b), c)| a + b == *c);
            let source = kv.apply(&s.v)?;
            let low_source = source.0.iter().zip(&sym).map(|(x, c)| (c * x).powi(2)).sum::<f64>().sqrt();
            let mut flux = 0.0;
            for axis in 0..basis.dimension() {
                let dv = basis.partial_on_grid(&s.v, axis)?;
                flux += dv
                    .0
                    .iter()
                    .zip(&profile.a_grid.0)
                    .zip(weights)
                    .map(|((d, a), w)| w * (a * d).powi(2))
                    .sum::<f64>();
            }
            let ratio = low_source / (n * flux.sqrt() + eps);
            if ratio > worst.2 {
                worst = (s.t, n, ratio);
            }
            series.push(vec![s.t, n, linear_energy(&ul, &vl, basis), linear_energy(&uh, &vh, basis), ratio]);
        }
    }
    rep.measure("max_kv_ratio", worst.2)
        .measure("max_kv_ratio_N", worst.1)
        .tolerance("kv_ratio_max", bound)
        .measure("partition_exact", if partition_exact { 1.0 } else { 0.0 })
        .with_series(series);
    let witness = if worst.2 > bound {
        Some(Witness::new(format!("low-frequency source ratio at N = {}", worst.1), Some(worst.0), worst.2))
    } else if !partition_exact {
        Some(Witness::new("low + high does not reconstruct the state", None, f64::NAN))
    } else {
        None
    };
    Ok(rep.conclude(witness.is_none(), witness))
}
