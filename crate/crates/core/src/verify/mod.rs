//! Executable checks of the energy identity, the strong-energy bound, exponential
//! decay, commutator uniformity, tail vanishing, truncation convergence, continuous
//! dependence, the frequency-split source bound and the structural condition on `a`.
//!
//! Every check returns a [`CheckReport`]. Failed reports always carry a [`Witness`].

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

mod commutator;
mod energy;
mod runs;
mod spectral;
mod structural;

pub use commutator::{commutator_report, commutator_scan, CommutatorScan};
pub use energy::{
    bernoulli_barrier, calibrate_bernoulli, check_bernoulli_bound, check_energy_identity, decay_report, fit_decay,
    fit_decay_series, BernoulliCalibration, DecayFit, DECAY_RESOLUTION,
};
pub use runs::{stability_probe, truncation_convergence, StabilityRun};
pub use spectral::{frequency_split_report, tail_scan};
pub use structural::structural_report;

/// Where a constant used by a check comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstantSource {
    Analytic,
    Calibrated,
    Declared,
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub description: String,
    pub t: Option<f64>,
    pub value: f64,
}

impl Witness {
    pub fn new(description: impl Into<String>, t: Option<f64>, value: f64) -> Self {
        Witness { description: description.into(), t, value }
    }
}

/// A named table of raw values behind a check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Series {
    pub fn new(name: impl Into<String>, columns: &[&str]) -> Self {
        Series { name: name.into(), columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub name: String,
    pub passed: bool,
    pub measured: BTreeMap<String, f64>,
    pub tolerances: BTreeMap<String, f64>,
    pub constants: BTreeMap<String, ConstantSource>,
    pub witness: Option<Witness>,
    pub series: Vec<Series>,
    pub notes: Vec<String>,
    /// Paths of files written for this check, filled in by the caller that persists it.
    pub artifacts: Vec<String>,
}

impl CheckReport {
    pub fn new(name: impl Into<String>) -> Self {
        CheckReport {
            name: name.into(),
            passed: false,
            measured: BTreeMap::new(),
            tolerances: BTreeMap::new(),
            constants: BTreeMap::new(),
            witness: None,
            series: Vec::new(),
            notes: Vec::new(),
            artifacts: Vec::new(),
        }
    }

    pub fn measure(&mut self, key: &str, value: f64) -> &mut Self {
        self.measured.insert(key.to_string(), value);
        self
    }

    pub fn tolerance(&mut self, key: &str, value: f64) -> &mut Self {
        self.tolerances.insert(key.to_string(), value);
        self
    }

    pub fn constant(&mut self, key: &str, source: ConstantSource) -> &mut Self {
        self.constants.insert(key.to_string(), source);
        self
    }

    pub fn note(&mut self, text: impl Into<String>) -> &mut Self {
        self.notes.push(text.into());
        self
    }

    pub fn with_series(&mut self, series: Series) -> &mut Self {
        self.series.push(series);
        self
    }

    /// Set the outcome. A failure without an explicit witness gets a generic one so the
    /// report never fails silently.
    pub fn conclude(mut self, passed: bool, witness: Option<Witness>) -> Self {
        self.passed = passed;
        self.witness = match (passed, witness) {
            (_, Some(w)) => Some(w),
            (false, None) => Some(Witness::new("check failed without a localized witness", None, f64::NAN)),
            (true, None) => None,
        };
        self
    }

    pub fn get(&self, key: &str) -> Option<f64> {
        self.measured.get(key).copied()
    }
}

/// Least-squares slope of `ln y` against `ln x`.
pub(crate) fn log_log_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    linear_fit(&lx, &ly).0
}

/// `(slope, intercept, r_squared)` of an ordinary least-squares line.
pub(crate) fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_tot: f64 = y.iter().map(|b| (b - my) * (b - my)).sum();
    let ss_res: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let r2 = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else if ss_res == 0.0 { 1.0 } else { 0.0 };
    (slope, intercept, r2)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn failed_reports_carry_a_witness() {
        let r = CheckReport::new("x").conclude(false, None);
        assert!(!r.passed && r.witness.is_some());
        let r = CheckReport::new("x").conclude(true, None);
        assert!(r.passed && r.witness.is_none());
    }

    #[test]
    fn linear_fit_exact_line() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y: Vec<f64> = x.iter().map(|t| 2.0 - 0.5 * t).collect();
        let (s, i, r2) = linear_fit(&x, &y);
        assert!((s + 0.5).abs() < 1e-15 && (i - 2.0).abs() < 1e-15 && (r2 - 1.0).abs() < 1e-15);
        assert!((log_log_slope(&[1.0, 2.0, 4.0], &[3.0, 6.0, 12.0]) - 1.0).abs() < 1e-14);
    }
}
