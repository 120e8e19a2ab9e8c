//! CSV and JSON artifacts. Floats use `{:e}`, the shortest representation that
//! parses back to the same bits.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use kvwave_core::verify::{ConstantSource, Series, Witness};
use kvwave_core::{CheckReport, Trajectory};
use serde::{Deserialize, Serialize};

pub const MANIFEST_SCHEMA: &str = "kvwave.manifest/v1";

pub fn fmt_f64(x: f64) -> String {
    format!("{x:e}")
}

/// Fixed header: `t,E,Y,d,D`, then `E_low_N=<n>,E_high_N=<n>` per threshold, then `L10,L12`.
pub fn trajectory_header(thresholds: &[f64]) -> Vec<String> {
    let mut h: Vec<String> = ["t", "E", "Y", "d", "D"].iter().map(|s| s.to_string()).collect();
    for n in thresholds {
        h.push(format!("E_low_N={}", fmt_f64(*n)));
        h.push(format!("E_high_N={}", fmt_f64(*n)));
    }
    h.push("L10".into());
    h.push("L12".into());
    h
}

fn write_rows(path: &Path, header: &[String], rows: impl Iterator<Item = Vec<f64>>) -> std::io::Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    writeln!(w, "{}", header.join(","))?;
    for row in rows {
        let cells: Vec<String> = row.into_iter().map(fmt_f64).collect();
        writeln!(w, "{}", cells.join(","))?;
    }
    w.flush()
}

pub fn write_trajectory_csv(path: &Path, traj: &Trajectory) -> std::io::Result<()> {
    let header = trajectory_header(&traj.thresholds);
    let rows = traj.samples.iter().map(|s| {
        let mut row = vec![s.t, s.energy, s.strong_energy, s.dissipation_rate, s.cumulative_dissipation];
        for (lo, hi) in &s.split_energies {
            row.push(*lo);
            row.push(*hi);
        }
        row.push(s.l10);
        row.push(s.l12);
        row
    });
    write_rows(path, &header, rows)
}

pub fn write_series_csv(path: &Path, series: &Series) -> std::io::Result<()> {
    write_rows(path, &series.columns, series.rows.iter().cloned())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    pub measured: BTreeMap<String, f64>,
    pub tolerances: BTreeMap<String, f64>,
    pub constants: BTreeMap<String, ConstantSource>,
    pub witness: Option<Witness>,
    pub notes: Vec<String>,
    pub artifacts: Vec<String>,
}

impl From<&CheckReport> for CheckOutcome {
    fn from(r: &CheckReport) -> Self {
        CheckOutcome {
            name: r.name.clone(),
            passed: r.passed,
            measured: r.measured.clone(),
            tolerances: r.tolerances.clone(),
            constants: r.constants.clone(),
            witness: r.witness.clone(),
            notes: r.notes.clone(),
            artifacts: r.artifacts.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Ok,
    ChecksFailed,
    SolverFailure,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub message: String,
    /// Simulation time of a solver failure.
    pub time: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema: String,
    pub command: String,
    pub config_hash: String,
    pub code_version: String,
    pub wall_clock_seconds: f64,
    pub status: Status,
    pub failure: Option<Failure>,
    pub checks: Vec<CheckOutcome>,
    /// Paths relative to the output directory.
    pub files: Vec<String>,
}

impl Manifest {
    pub fn new(command: &str, config_hash: String) -> Self {
        Manifest {
            schema: MANIFEST_SCHEMA.into(),
            command: command.into(),
            config_hash,
            code_version: env!("CARGO_PKG_VERSION").into(),
            wall_clock_seconds: 0.0,
            status: Status::Ok,
            failure: None,
            checks: Vec::new(),
            files: Vec::new(),
        }
    }

    pub fn write(&self, path: &Path) -> std::io::Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(std::io::Error::other)?;
        fs::write(path, text + "\n")
    }
}
