//! Parameter sweeps: dotted-path overrides of a base run config, expanded as a
//! Cartesian product or zipped pairwise, deduplicated by config hash.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::commands::{execute, Job};
use crate::config::{read_text, ConfigError, RunConfig};
use crate::output::{fmt_f64, CheckOutcome, Manifest, Status};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepMode {
    #[default]
    Cartesian,
    Paired,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    /// Dotted key path into the base config, e.g. `damping.hi`.
    pub path: String,
    pub values: Vec<toml::Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    /// Base run config, relative to the sweep file.
    pub base: PathBuf,
    #[serde(default)]
    pub mode: SweepMode,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default, rename = "axis")]
    pub axes: Vec<Axis>,
}

/// One expanded sweep point.
#[derive(Debug, Clone)]
pub struct Cell {
    pub values: Vec<toml::Value>,
    pub config: RunConfig,
    pub hash: String,
}

pub fn set_path(root: &mut toml::Value, path: &str, value: toml::Value) -> Result<(), ConfigError> {
    let keys: Vec<&str> = path.split('.').collect();
    let (last, parents) = keys.split_last().expect("split yields at least one key");
    let mut cur = root;
    for k in parents {
        cur = cur
            .get_mut(*k)
            .filter(|v| v.is_table())
            .ok_or_else(|| ConfigError::Invalid(format!("sweep path `{path}`: no table `{k}` in the base config")))?;
    }
    let table = cur.as_table_mut().ok_or_else(|| ConfigError::Invalid(format!("sweep path `{path}` is not inside a table")))?;
    table.insert(last.to_string(), value);
    Ok(())
}

fn cell_hash(value: &toml::Value, seed: Option<u64>) -> Result<String, ConfigError> {
    // Tables serialize with sorted keys, so equal configs hash equally.
    let text = toml::to_string(value).map_err(|e| ConfigError::Invalid(e.to_string()))?;
    Ok(crate::config::config_hash(&text, seed))
}

/// Expand the axes into cells, dropping later duplicates of an already seen hash.
pub fn expand(sweep: &SweepConfig, base: &toml::Value, seed: Option<u64>) -> Result<Vec<Cell>, ConfigError> {
    let points: Vec<Vec<toml::Value>> = match sweep.mode {
        SweepMode::Paired => {
            let len = sweep.axes.first().map_or(1, |a| a.values.len());
            if sweep.axes.iter().any(|a| a.values.len() != len) {
                return Err(ConfigError::Invalid("paired sweep axes must have equal lengths".into()));
            }
            (0..len).map(|i| sweep.axes.iter().map(|a| a.values[i].clone()).collect()).collect()
        }
        SweepMode::Cartesian => sweep.axes.iter().fold(vec![vec![]], |acc, axis| {
            acc.iter()
                .flat_map(|p| {
                    axis.values.iter().map(move |v| {
                        let mut q = p.clone();
                        q.push(v.clone());
                        q
                    })
                })
                .collect()
        }),
    };
    let mut seen = BTreeSet::new();
    let mut cells = Vec::new();
    for values in points {
        let mut v = base.clone();
        for (axis, x) in sweep.axes.iter().zip(&values) {
            set_path(&mut v, &axis.path, x.clone())?;
        }
        let hash = cell_hash(&v, seed)?;
        if seen.insert(hash.clone()) {
            let config = RunConfig::from_value(v)?;
            cells.push(Cell { values, config, hash });
        }
    }
    Ok(cells)
}

fn metric(checks: &[CheckOutcome], check: &str, key: &str) -> String {
    checks
        .iter()
        .find(|c| c.name == check)
        .and_then(|c| c.measured.get(key))
        .map_or_else(String::new, |v| fmt_f64(*v))
}

fn value_cell(v: &toml::Value) -> String {
    match v {
        toml::Value::Float(x) => fmt_f64(*x),
        toml::Value::String(s) => s.clone(),
        other => other.to_string().replace(',', ";"),
    }
}

pub struct SweepOutcome {
    pub manifest: Manifest,
    pub failed_cells: usize,
}

pub fn cmd_sweep(sweep_path: &Path, out: Option<&Path>, seed: Option<u64>) -> Result<SweepOutcome, ConfigError> {
    let start = Instant::now();
    let text = read_text(sweep_path)?;
    let sweep: SweepConfig = toml::from_str(&text)?;
    let dir = sweep_path.parent().unwrap_or(Path::new("."));
    let base_path = dir.join(&sweep.base);
    let base_text = read_text(&base_path)?;
    let base: toml::Value = toml::from_str(&base_text)?;
    let base_dir = base_path.parent().unwrap_or(Path::new(".")).to_path_buf();
    let cells = expand(&sweep, &base, seed)?;
    let resolved = cells.iter().map(|c| c.config.resolve(&base_dir, seed)).collect::<Result<Vec<_>, _>>()?;
    let out = match (out, &sweep.output_dir) {
        (Some(o), _) => o.to_path_buf(),
        (None, Some(o)) => dir.join(o),
        (None, None) => PathBuf::from("kvwave-sweep"),
    };
    let io = |e: std::io::Error| ConfigError::Io { path: out.clone(), source: e };
    std::fs::create_dir_all(&out).map_err(io)?;

    let results: Vec<std::io::Result<Manifest>> = cells
        .par_iter()
        .zip(&resolved)
        .map(|(cell, r)| {
            let cell_out = out.join("cells").join(&cell.hash[..16]);
            execute(r, &cell_out, cell.hash.clone(), "sweep_cell", Job { write_trajectory: true, run_checks: true })
        })
        .collect();

    let mut header = vec!["cell".to_string(), "hash".to_string()];
    header.extend(sweep.axes.iter().map(|a| a.path.clone()));
    header.extend(["status", "gamma", "r_squared", "C1", "commutator_slope", "checks_passed"].map(String::from));
    let mut lines = vec![header.join(",")];
    let mut manifest = Manifest::new("sweep", crate::config::config_hash(&text, seed));
    let mut failed = 0;
    for (i, (cell, res)) in cells.iter().zip(results).enumerate() {
        let mut row = vec![i.to_string(), cell.hash.clone()];
        row.extend(cell.values.iter().map(value_cell));
        match res {
            Ok(m) => {
                if m.status != Status::Ok {
                    failed += 1;
                }
                let status = serde_json::to_value(m.status).expect("enum serializes").as_str().unwrap_or("").to_string();
                row.push(status);
                row.push(metric(&m.checks, "exponential_decay", "gamma"));
                row.push(metric(&m.checks, "exponential_decay", "r_squared"));
                row.push(metric(&m.checks, "bernoulli_bound", "C1"));
                row.push(metric(&m.checks, "commutator_uniformity", "slope"));
                row.push(format!("{}/{}", m.checks.iter().filter(|c| c.passed).count(), m.checks.len()));
                manifest.files.extend(m.files.iter().map(|f| format!("cells/{}/{f}", &cell.hash[..16])));
                manifest.checks.extend(m.checks.into_iter().map(|mut c| {
                    c.name = format!("cell{i}:{}", c.name);
                    c
                }));
            }
            Err(e) => {
                failed += 1;
                row.push("error".into());
                row.extend(std::iter::repeat_n(String::new(), 4));
                row.push(format!("io: {e}").replace(',', ";"));
            }
        }
        lines.push(row.join(","));
    }
    std::fs::write(out.join("sweep.csv"), lines.join("\n") + "\n").map_err(io)?;
    manifest.files.push("sweep.csv".into());
    manifest.files.push("manifest.json".into());
    if failed > 0 {
        manifest.status = Status::ChecksFailed;
    }
    manifest.wall_clock_seconds = start.elapsed().as_secs_f64();
    manifest.write(&out.join("manifest.json")).map_err(io)?;
    Ok(SweepOutcome { manifest, failed_cells: failed })
}
