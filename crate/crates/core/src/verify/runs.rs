use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{CheckReport, ConstantSource, Series, Witness};
use crate::basis::Basis;
use crate::dynamics::{State, Trajectory};
use crate::error::{Error, Result};
use crate::scenario::Scenario;

fn l2_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Rerun `scenario` up to `final_time` for each truncation level in `k_list`.
///
/// Runs whose level is at least the peak amplitude they ever fed to the source must
/// coincide bitwise, since `f_k = s^5` on every evaluated value. Successive
/// `sup_t ||u_{k_{i+1}} - u_{k_i}||` must not increase.
pub fn truncation_convergence(scenario: &Scenario, k_list: &[f64], final_time: f64) -> Result<CheckReport> {
    if k_list.len() < 3 || k_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter("k_list must hold at least 3 strictly increasing levels".into()));
    }
    let base = Scenario { final_time, ..scenario.clone() };
    let setup = base.setup()?;
    let initial = base.initial.state(&setup.basis)?;
    let runs: Vec<Trajectory> =
        k_list.par_iter().map(|&k| setup.run_from(&base.with_truncation(k), &initial)).collect::<Result<_>>()?;

    let mut rep = CheckReport::new("truncation_convergence");
    let mut series = Series::new("truncation_pairs", &["k_low", "k_high", "sup_l2_difference", "bitwise_identical"]);
    let mut witness = None;
    let mut diffs = Vec::new();
    for (i, w) in runs.windows(2).enumerate() {
        let d = w[0]
            .states
            .iter()
            .zip(&w[1].states)
            .map(|(a, b)| l2_distance(&a.u.0, &b.u.0))
            .fold(0.0, f64::max);
        let identical = w[0].states == w[1].states && w[0].samples == w[1].samples;
        let inactive = k_list[i] >= runs[i].peak_source_amplitude && k_list[i + 1] >= runs[i + 1].peak_source_amplitude;
        if inactive && !identical && witness.is_none() {
            witness = Some(Witness::new(
                format!("runs with k = {} and k = {} differ although the truncation is inactive", k_list[i], k_list[i + 1]),
                None,
                d,
            ));
        }
        series.push(vec![k_list[i], k_list[i + 1], d, if identical { 1.0 } else { 0.0 }]);
        diffs.push(d);
    }
    let slack = 1e-12 * diffs.iter().copied().fold(0.0, f64::max);
    for (i, w) in diffs.windows(2).enumerate() {
        if w[1] > w[0] + slack && witness.is_none() {
            witness = Some(Witness::new(format!("difference grows at k = {}", k_list[i + 2]), None, w[1]));
        }
    }
    for (k, r) in k_list.iter().zip(&runs) {
        rep.measure(&format!("peak_amplitude_k{k}"), r.peak_source_amplitude);
        if *k < r.peak_source_amplitude {
            rep.note(format!("k = {k}: truncation active (peak |u| = {})", r.peak_source_amplitude));
        }
    }
    rep.with_series(series).tolerance("monotonicity_slack", slack);
    Ok(rep.conclude(witness.is_none(), witness))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityRun {
    pub delta: f64,
    pub times: Vec<f64>,
    /// `E_w = 1/2 ||w_t||^2 + 1/2 ||grad w||^2` of the difference of the two runs.
    pub difference_energy: Vec<f64>,
    /// `max(0, max_t ln(E_w(t) / E_w(0)) / t)`.
    pub growth_rate: f64,
}

fn difference_energy(a: &State, b: &State, basis: &Basis) -> f64 {
    let lambda = basis.eigenvalues();
    (0..lambda.len())
        .map(|i| {
            let (du, dv) = (a.u.0[i] - b.u.0[i], a.v.0[i] - b.v.0[i]);
            0.5 * dv * dv + 0.5 * lambda[i] * du * du
        })
        .sum()
}

fn perturbed_run(base: &Scenario, reference: &Trajectory, basis: &Basis, setup: &crate::scenario::Setup, delta: f64) -> Result<StabilityRun> {
    let mut init = base.initial.state(basis)?;
    init.u.0[0] += delta;
    let traj = setup.run_from(base, &init)?;
    let times: Vec<f64> = traj.states.iter().map(|s| s.t).collect();
    let ew: Vec<f64> = traj.states.iter().zip(&reference.states).map(|(a, b)| difference_energy(a, b, basis)).collect();
    let mut rate = 0.0_f64;
    if ew[0] > 0.0 {
        for (t, e) in times.iter().zip(&ew).skip(1) {
            let dt = t - times[0];
            if dt > 0.0 && *e > 0.0 {
                rate = rate.max((e / ew[0]).ln() / dt);
            }
        }
    }
    Ok(StabilityRun { delta, times, difference_energy: ew, growth_rate: rate })
}

/// Continuous dependence: perturb `u0` by `delta * phi_1` and by `delta / 2 * phi_1`.
/// Passes iff `E_w(0)` scales by 4 within 5%, the empirical growth rates agree within
/// 10%, and `E_w(t) <= E_w(0) exp(rate t)` holds on both runs.
pub fn stability_probe(scenario: &Scenario, delta: f64, final_time: f64) -> Result<(CheckReport, [StabilityRun; 2])> {
    if !(delta >= 0.0) || !delta.is_finite() {
        return Err(Error::InvalidParameter(format!("perturbation size must be nonnegative (got {delta})")));
    }
    let base = Scenario { final_time, ..scenario.clone() };
    let setup = base.setup()?;
    let reference = setup.run(&base)?;
    let (full, half) = rayon::join(
        || perturbed_run(&base, &reference, &setup.basis, &setup, delta),
        || perturbed_run(&base, &reference, &setup.basis, &setup, 0.5 * delta),
    );
    let (full, half) = (full?, half?);

    let mut rep = CheckReport::new("stability_probe");
    let mut series = Series::new("difference_energy", &["t", "E_w_delta", "E_w_half_delta"]);
    for i in 0..full.times.len() {
        series.push(vec![full.times[i], full.difference_energy[i], half.difference_energy[i]]);
    }
    rep.with_series(series).constant("growth_rate", ConstantSource::Calibrated);
    if delta == 0.0 {
        let zero = full.difference_energy.iter().all(|&e| e == 0.0);
        rep.note("zero perturbation");
        let w = (!zero).then(|| Witness::new("nonzero difference for identical data", None, f64::NAN));
        return Ok((rep.conclude(zero, w), [full, half]));
    }
    let scale = full.difference_energy[0] / half.difference_energy[0];
    let (r1, r2) = (full.growth_rate, half.growth_rate);
    let rate_spread = if r1.max(r2) == 0.0 { 0.0 } else { (r1 - r2).abs() / r1.max(r2) };
    rep.measure("E_w0_ratio", scale)
        .measure("growth_rate", r1)
        .measure("growth_rate_half", r2)
        .measure("growth_rate_spread", rate_spread)
        .tolerance("E_w0_ratio_relative", 0.05)
        .tolerance("growth_rate_spread", 0.1);

    let mut witness = None;
    for run in [&full, &half] {
        let e0 = run.difference_energy[0];
        for (t, e) in run.times.iter().zip(&run.difference_energy) {
            let bound = e0 * (run.growth_rate * (t - run.times[0])).exp();
            if *e > bound * (1.0 + 1e-12) && witness.is_none() {
                witness = Some(Witness::new(format!("E_w above exp(rate t) E_w(0) for delta = {}", run.delta), Some(*t), *e));
            }
        }
    }
    if !r1.is_finite() || !r2.is_finite() {
        witness.get_or_insert(Witness::new("growth rate is not finite", None, r1));
    }
    if (scale / 4.0 - 1.0).abs() > 0.05 {
        witness.get_or_insert(Witness::new("E_w(0) does not scale as delta^2", None, scale));
    }
    if rate_spread > 0.1 {
        witness.get_or_insert(Witness::new("growth rate depends on delta", None, rate_spread));
    }
    Ok((rep.conclude(witness.is_none(), witness), [full, half]))
}
