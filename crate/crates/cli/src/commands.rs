use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use kvwave_core::verify::{
    check_bernoulli_bound, check_energy_identity, commutator_report, commutator_scan, decay_report, fit_decay,
    frequency_split_report, stability_probe, structural_report, tail_scan, truncation_convergence,
};
use kvwave_core::{Basis, CheckReport, Domain, Scenario, Setup, Trajectory};

use crate::config::{config_hash, read_text, CheckKind, ConfigError, Resolved, RunConfig};
use crate::output::{fmt_f64, write_series_csv, write_trajectory_csv, CheckOutcome, Failure, Manifest, Status};

pub const TRAJECTORY_FILE: &str = "trajectory.csv";
pub const RUN_MANIFEST: &str = "manifest.json";
pub const VERIFY_SUMMARY: &str = "summary.json";

/// Exit code for a finished command.
pub fn exit_code(status: Status) -> i32 {
    match status {
        Status::Ok => 0,
        Status::ChecksFailed => 1,
        Status::Error => 2,
        Status::SolverFailure => 3,
    }
}

#[derive(Debug, thiserror::Error)]
enum StepError {
    #[error(transparent)]
    Core(#[from] kvwave_core::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// What [`execute`] produces besides the manifest.
#[derive(Debug, Clone, Copy)]
pub struct Job {
    pub write_trajectory: bool,
    pub run_checks: bool,
}

/// A loaded config file with its hash and resolved output directory.
pub struct Loaded {
    pub resolved: Resolved,
    pub hash: String,
    pub out: PathBuf,
}

pub fn load(config_path: &Path, out: Option<&Path>, seed: Option<u64>) -> Result<Loaded, ConfigError> {
    let text = read_text(config_path)?;
    let cfg = RunConfig::parse(&text)?;
    let base = config_path.parent().unwrap_or(Path::new("."));
    let resolved = cfg.resolve(base, seed)?;
    let out = match (out, &cfg.output_dir) {
        (Some(o), _) => o.to_path_buf(),
        (None, Some(o)) if o.is_relative() => base.join(o),
        (None, Some(o)) => o.clone(),
        (None, None) => PathBuf::from("kvwave-out"),
    };
    Ok(Loaded { resolved, hash: config_hash(&text, seed), out })
}

fn relative(out: &Path, p: &Path) -> String {
    p.strip_prefix(out).unwrap_or(p).to_string_lossy().replace('\\', "/")
}

fn needs_base_run(checks: &[CheckKind]) -> bool {
    checks.iter().any(|c| matches!(c, CheckKind::EnergyIdentity | CheckKind::Decay | CheckKind::FrequencySplit))
}

fn refined(scenario: &Scenario, modes: usize) -> Scenario {
    let mut s = scenario.clone();
    s.grid_intervals = scenario.grid_intervals.map(|g| g * modes / scenario.modes_per_axis);
    s.modes_per_axis = modes;
    s
}

fn family_runs(scenario: &Scenario, r: &Resolved) -> Result<Vec<Trajectory>, kvwave_core::Error> {
    use rayon::prelude::*;
    let setup = scenario.setup()?;
    r.family
        .par_iter()
        .map(|init| {
            let s = Scenario { initial: init.clone(), ..scenario.clone() };
            setup.run(&s)
        })
        .collect()
}

fn run_check(
    kind: CheckKind,
    r: &Resolved,
    setup: &Setup,
    base: Option<&Trajectory>,
) -> Result<CheckReport, kvwave_core::Error> {
    let sc = &r.scenario;
    let p = &r.config.verify;
    let base = || base.expect("base trajectory computed for this check");
    Ok(match kind {
        CheckKind::EnergyIdentity => {
            let mut fine = sc.with_dt(0.5 * sc.scheme.dt);
            fine.sample_every = sc.sample_every * 2;
            let halved = setup.run(&fine)?;
            check_energy_identity(base(), Some(&halved), Some(p.energy_max_residual))
        }
        CheckKind::Structural => {
            let floor = p.structural_floor.unwrap_or_else(|| setup.profile.default_floor());
            structural_report(&setup.profile, &setup.basis, floor)?
        }
        CheckKind::Decay => decay_report(&fit_decay(base(), p.decay_window.map(|[a, b]| (a, b)))?),
        CheckKind::Bernoulli => {
            let m = p.bernoulli_refined_modes.unwrap_or(2 * sc.modes_per_axis);
            let fine = refined(sc, m);
            let (a, b) = rayon::join(|| family_runs(sc, r), || family_runs(&fine, r));
            check_bernoulli_bound(&a?, &b?, setup.profile.structural_constant)?
        }
        CheckKind::Commutator => {
            let scan = commutator_scan(&setup.profile, &setup.basis, &sc.thresholds, p.commutator_probes, r.seed)?;
            commutator_report(&scan)
        }
        CheckKind::Tail => {
            let init = sc.initial.state(&setup.basis)?;
            tail_scan(&init.u, &init.v, &setup.basis, &sc.thresholds)?
        }
        CheckKind::FrequencySplit => {
            frequency_split_report(base(), &setup.basis, &setup.profile, &setup.kv, &sc.thresholds)?
        }
        CheckKind::TruncationConvergence => truncation_convergence(sc, &p.k_list, sc.final_time)?,
        CheckKind::Stability => stability_probe(sc, p.delta, sc.final_time)?.0,
    })
}

fn execute_inner(r: &Resolved, out: &Path, job: Job, m: &mut Manifest) -> Result<(), StepError> {
    let setup = r.scenario.setup()?;
    let mut checks = if job.run_checks { r.config.checks.clone() } else { Vec::new() };
    checks.sort();
    checks.dedup();
    let base = if job.write_trajectory || needs_base_run(&checks) { Some(setup.run(&r.scenario)?) } else { None };
    if job.write_trajectory {
        let path = out.join(TRAJECTORY_FILE);
        write_trajectory_csv(&path, base.as_ref().expect("computed above"))?;
        m.files.push(relative(out, &path));
    }
    if !checks.is_empty() {
        fs::create_dir_all(out.join("checks"))?;
    }
    for kind in checks {
        let mut rep = run_check(kind, r, &setup, base.as_ref())?;
        for s in &rep.series {
            let path = out.join("checks").join(format!("{}__{}.csv", rep.name, s.name));
            write_series_csv(&path, s)?;
            rep.artifacts.push(relative(out, &path));
        }
        m.files.extend(rep.artifacts.iter().cloned());
        m.checks.push(CheckOutcome::from(&rep));
    }
    if m.checks.iter().any(|c| !c.passed) {
        m.status = Status::ChecksFailed;
    }
    Ok(())
}

/// Run the scenario and the requested checks, writing artifacts and a manifest to `out`.
/// Solver and check errors end up in the manifest; only I/O on the manifest itself is fatal.
pub fn execute(r: &Resolved, out: &Path, hash: String, command: &str, job: Job) -> std::io::Result<Manifest> {
    let start = Instant::now();
    fs::create_dir_all(out)?;
    let mut m = Manifest::new(command, hash);
    if let Err(e) = execute_inner(r, out, job, &mut m) {
        let (status, time) = match &e {
            StepError::Core(c) if c.is_solver_failure() => (Status::SolverFailure, c.failure_time()),
            StepError::Core(_) => (Status::Error, None),
            StepError::Io(io) => return Err(std::io::Error::new(io.kind(), io.to_string())),
        };
        m.status = status;
        m.failure = Some(Failure { message: e.to_string(), time });
    }
    m.wall_clock_seconds = start.elapsed().as_secs_f64();
    let name = if job.run_checks { VERIFY_SUMMARY } else { RUN_MANIFEST };
    m.files.push(name.into());
    m.write(&out.join(name))?;
    Ok(m)
}

pub fn cmd_run(loaded: &Loaded) -> std::io::Result<Manifest> {
    execute(&loaded.resolved, &loaded.out, loaded.hash.clone(), "run", Job { write_trajectory: true, run_checks: false })
}

pub fn cmd_verify(loaded: &Loaded) -> std::io::Result<Manifest> {
    execute(&loaded.resolved, &loaded.out, loaded.hash.clone(), "verify", Job { write_trajectory: false, run_checks: true })
}

/// Eigenvalue table, mode count and aliasing-guard status.
pub fn basis_info(config_path: &Path) -> Result<String, ConfigError> {
    use std::fmt::Write;
    let cfg = RunConfig::parse(&read_text(config_path)?)?;
    let g = cfg.grid_intervals.unwrap_or(4 * cfg.modes_per_axis);
    let basis = Basis::new(Domain::new(cfg.edge_lengths.clone())?, cfg.modes_per_axis, g)?;
    let mut s = String::new();
    writeln!(s, "dimension: {}", basis.dimension()).unwrap();
    writeln!(s, "modes per axis: {}", basis.modes_per_axis()).unwrap();
    writeln!(s, "mode count: {}", basis.mode_count()).unwrap();
    writeln!(s, "grid intervals: {g}").unwrap();
    writeln!(s, "aliasing guard (G >= 4M): ok").unwrap();
    writeln!(s, "index,mode,lambda").unwrap();
    for (j, l) in basis.eigenvalues().iter().enumerate() {
        let mode: Vec<String> = basis.multi_index(j).iter().map(|k| k.to_string()).collect();
        writeln!(s, "{j},{},{}", mode.join(":"), fmt_f64(*l)).unwrap();
    }
    Ok(s)
}
