//! Norm of `T_N f = div([P_{>N}, a] f)` acting on vector fields, estimated with
//! random probes followed by power iteration on `T_N^T T_N`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{log_log_slope, CheckReport, Series, Witness};
use crate::basis::{Basis, GridField, SpectralField};
use crate::damping::DampingProfile;
use crate::error::{Error, Result};
use crate::multipliers::{low_symbol, FrequencyThreshold};

const POWER_ITERS: usize = 50;
const POWER_RTOL: f64 = 1e-8;
/// Probe fields use modes with `sqrt(lambda)` up to this fraction of the basis maximum.
const PROBE_BAND: f64 = 0.75;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommutatorScan {
    pub thresholds: Vec<f64>,
    pub norms: Vec<f64>,
    pub iterations: Vec<usize>,
    pub dropped: Vec<f64>,
    /// Log-log slope of `norms` over the upper half of `thresholds`; `None` if the
    /// norms vanish or fewer than two thresholds remain.
    pub slope: Option<f64>,
    pub probe_modes: usize,
}

struct Operator<'a> {
    basis: &'a Basis,
    a_var: GridField,
    high: Vec<f64>,
    probe: usize,
}

impl Operator<'_> {
    fn pad(&self, x: &[f64]) -> SpectralField {
        let mut c = SpectralField::zeros(self.basis.mode_count());
        c.0[..self.probe].copy_from_slice(x);
        c
    }

    /// `[H, M_a] x` with `H = diag(1 - chi)`.
    fn commutator(&self, x: &SpectralField) -> Result<SpectralField> {
        let ax = self.basis.multiply(&self.a_var, x)?;
        let hx = SpectralField(x.0.iter().zip(&self.high).map(|(v, h)| v * h).collect());
        let ahx = self.basis.multiply(&self.a_var, &hx)?;
        Ok(SpectralField(ax.0.iter().zip(&self.high).zip(&ahx.0).map(|((a, h), b)| h * a - b).collect()))
    }

    /// `f` stores the probe-band coefficients of each component, back to back.
    fn apply(&self, f: &[f64]) -> Result<GridField> {
        let mut out = GridField::zeros(self.basis.grid_len());
        for (c, chunk) in f.chunks(self.probe).enumerate() {
            let g = self.commutator(&self.pad(chunk))?;
            let dg = self.basis.partial_on_grid(&g, c)?;
            for (o, v) in out.0.iter_mut().zip(&dg.0) {
                *o += v;
            }
        }
        Ok(out)
    }

    /// Transpose with respect to the quadrature inner product; `[H, M_a]` is antisymmetric.
    fn adjoint(&self, y: &GridField) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(self.probe * self.basis.dimension());
        for c in 0..self.basis.dimension() {
            let z = self.basis.partial_adjoint(y, c)?;
            let g = self.commutator(&z)?;
            out.extend(g.0[..self.probe].iter().map(|v| -v));
        }
        Ok(out)
    }

    fn grid_norm(&self, g: &GridField) -> f64 {
        g.0.iter().zip(self.basis.quadrature_weights()).map(|(v, w)| w * v * v).sum::<f64>().sqrt()
    }
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn estimate(op: &Operator, probes: usize, seed: u64) -> Result<(f64, usize)> {
    let len = op.probe * op.basis.dimension();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<(f64, Vec<f64>)> = None;
    for _ in 0..probes {
        let x: Vec<f64> = (0..len).map(|_| StandardNormal.sample(&mut rng)).collect();
        let q = op.grid_norm(&op.apply(&x)?) / norm(&x);
        if best.as_ref().is_none_or(|(b, _)| q > *b) {
            best = Some((q, x));
        }
    }
    let (mut value, mut x) = best.expect("at least one probe");
    if value == 0.0 {
        return Ok((0.0, 0));
    }
    let mut iters = 0;
    for _ in 0..POWER_ITERS {
        iters += 1;
        let y = op.adjoint(&op.apply(&x)?)?;
        let ny = norm(&y);
        if ny == 0.0 {
            break;
        }
        x = y.into_iter().map(|v| v / ny).collect();
        let next = op.grid_norm(&op.apply(&x)?);
        let change = (next - value).abs() / next.max(f64::MIN_POSITIVE);
        value = value.max(next);
        if change < POWER_RTOL {
            break;
        }
    }
    Ok((value, iters))
}

pub fn commutator_scan(
    profile: &DampingProfile,
    basis: &Basis,
    thresholds: &[f64],
    probes: usize,
    seed: u64,
) -> Result<CommutatorScan> {
    if probes == 0 {
        return Err(Error::InvalidParameter("commutator scan needs at least one probe".into()));
    }
    if thresholds.is_empty() {
        return Err(Error::EmptySet("no thresholds for the commutator scan".into()));
    }
    let band = PROBE_BAND * basis.max_frequency();
    let probe = basis.eigenvalues().iter().take_while(|l| l.sqrt() <= band).count();
    let a_var = profile.variable_part();
    let mut kept = Vec::new();
    let mut dropped = Vec::new();
    for &n in thresholds {
        FrequencyThreshold::new(n)?;
        if 2.0 * n > band {
            dropped.push(n);
        } else {
            kept.push(n);
        }
    }
    let results: Vec<(f64, usize)> = kept
        .par_iter()
        .enumerate()
        .map(|(i, &n)| {
            let sym = low_symbol(basis, FrequencyThreshold::new(n)?);
            let op = Operator { basis, a_var: a_var.clone(), high: sym.iter().map(|s| 1.0 - s).collect(), probe };
            estimate(&op, probes, seed.wrapping_add(i as u64))
        })
        .collect::<Result<_>>()?;
    let norms: Vec<f64> = results.iter().map(|r| r.0).collect();
    let iterations = results.iter().map(|r| r.1).collect();
    let upper = kept.len() / 2;
    let slope = if kept.len() - upper >= 2 && norms[upper..].iter().all(|&v| v > 0.0) {
        Some(log_log_slope(&kept[upper..], &norms[upper..]))
    } else {
        None
    };
    Ok(CommutatorScan { thresholds: kept, norms, iterations, dropped, slope, probe_modes: probe })
}

/// Passes iff the upper-half log-log slope is at most 0.1, or the norms vanish identically.
pub fn commutator_report(scan: &CommutatorScan) -> CheckReport {
    let mut rep = CheckReport::new("commutator_uniformity");
    let mut series = Series::new("commutator_norms", &["N", "norm", "iterations"]);
    for ((n, v), it) in scan.thresholds.iter().zip(&scan.norms).zip(&scan.iterations) {
        series.push(vec![*n, *v, *it as f64]);
    }
    rep.with_series(series).tolerance("slope_max", 0.1).measure("probe_modes", scan.probe_modes as f64);
    if !scan.dropped.is_empty() {
        rep.note(format!("thresholds dropped, transition band unresolved: {:?}", scan.dropped));
    }
    let max = scan.norms.iter().copied().fold(0.0, f64::max);
    rep.measure("max_norm", max);
    if let Some(s) = scan.slope {
        rep.measure("slope", s);
        let w = (s > 0.1).then(|| Witness::new("upper-half log-log slope", scan.thresholds.last().copied(), s));
        rep.conclude(s <= 0.1, w)
    } else if max == 0.0 && !scan.norms.is_empty() {
        rep.note("commutator vanishes identically");
        rep.conclude(true, None)
    } else {
        rep.conclude(false, Some(Witness::new("too few resolved thresholds for a slope", None, scan.thresholds.len() as f64)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::Domain;
    use crate::damping::{make_profile, DampingPreset};
    use std::f64::consts::PI;

    fn basis() -> Basis {
        Basis::new(Domain::new(vec![PI]).unwrap(), 64, 256).unwrap()
    }

    #[test]
    fn constant_damping_gives_exact_zeros() {
        let b = basis();
        let p = make_profile(&DampingPreset::Constant { alpha: 0.7 }, &b).unwrap();
        let scan = commutator_scan(&p, &b, &[2.0, 4.0, 8.0], 3, 1).unwrap();
        assert!(scan.norms.iter().all(|&v| v == 0.0));
        assert!(commutator_report(&scan).passed);
    }

    #[test]
    fn adjoint_is_a_transpose() {
        let b = basis();
        let p = make_profile(&DampingPreset::SquaredBump { eta: 1.0, center: vec![1.5], radius: 0.8 }, &b).unwrap();
        let sym = low_symbol(&b, FrequencyThreshold::new(4.0).unwrap());
        let op = Operator { basis: &b, a_var: p.variable_part(), high: sym.iter().map(|s| 1.0 - s).collect(), probe: 40 };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x: Vec<f64> = (0..40).map(|_| StandardNormal.sample(&mut rng)).collect();
        let y = GridField((0..b.grid_len()).map(|_| StandardNormal.sample(&mut rng)).collect());
        let tx = op.apply(&x).unwrap();
        let lhs: f64 = tx.0.iter().zip(&y.0).zip(b.quadrature_weights()).map(|((a, c), w)| a * c * w).sum();
        let rhs: f64 = op.adjoint(&y).unwrap().iter().zip(&x).map(|(a, c)| a * c).sum();
        assert!((lhs - rhs).abs() < 1e-10 * lhs.abs().max(1.0));
    }

    #[test]
    fn unresolved_thresholds_are_dropped() {
        let b = basis();
        let p = make_profile(&DampingPreset::SquaredBump { eta: 1.0, center: vec![1.5], radius: 0.8 }, &b).unwrap();
        let scan = commutator_scan(&p, &b, &[4.0, 8.0, 40.0], 2, 0).unwrap();
        assert_eq!(scan.dropped, vec![40.0]);
        assert_eq!(scan.thresholds, vec![4.0, 8.0]);
        assert!(commutator_scan(&p, &b, &[4.0], 0, 0).is_err());
    }
}
