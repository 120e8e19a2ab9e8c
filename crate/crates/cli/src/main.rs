use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use kvwave_cli::commands::{basis_info, cmd_run, cmd_verify, exit_code, load};
use kvwave_cli::config::ConfigError;
use kvwave_cli::output::Manifest;
use kvwave_cli::sweep::cmd_sweep;

#[derive(Parser)]
#[command(name = "kvwave", version, about = "Damped quintic wave simulations and their checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Worker threads for parallel scans and sweeps.
    #[arg(long, global = true, env = "KVWAVE_WORKERS")]
    workers: Option<usize>,
}

#[derive(clap::Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output_dir` in the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate a scenario and write its trajectory CSV and manifest.
    Run(Common),
    /// Run the checks listed in a config and write a summary.
    Verify(Common),
    /// Run and verify every cell of a sweep config.
    Sweep(Common),
    /// Print the eigenvalue table and the aliasing-guard status.
    BasisInfo {
        #[arg(long)]
        config: PathBuf,
    },
}

fn config_failure(e: ConfigError) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(2)
}

fn finish(result: std::io::Result<Manifest>) -> ExitCode {
    match result {
        Ok(m) => {
            if let Some(f) = &m.failure {
                eprintln!("error: {}", f.message);
            }
            for c in &m.checks {
                println!("{}: {}", c.name, if c.passed { "pass" } else { "FAIL" });
                if let (false, Some(w)) = (c.passed, &c.witness) {
                    println!("  witness: {} (value {:e})", w.description, w.value);
                }
            }
            ExitCode::from(exit_code(m.status) as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.workers {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match cli.command {
        Command::Run(c) => match load(&c.config, c.out.as_deref(), c.seed) {
            Ok(l) => finish(cmd_run(&l)),
            Err(e) => config_failure(e),
        },
        Command::Verify(c) => match load(&c.config, c.out.as_deref(), c.seed) {
            Ok(l) => finish(cmd_verify(&l)),
            Err(e) => config_failure(e),
        },
        Command::Sweep(c) => match cmd_sweep(&c.config, c.out.as_deref(), c.seed) {
            Ok(s) => {
                println!("{} cells failed", s.failed_cells);
                ExitCode::from(if s.failed_cells > 0 { 1 } else { 0 })
            }
            Err(e) => config_failure(e),
        },
        Command::BasisInfo { config } => match basis_info(&config) {
            Ok(s) => {
                print!("{s}");
                ExitCode::SUCCESS
            }
            Err(e) => config_failure(e),
        },
    }
}
