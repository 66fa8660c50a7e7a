//! `hypershell` — config-driven solver for the linear strain equation on
//! hyperbolic graph surfaces.
//!
//! Subcommands: `solve` (run the strain pipeline for a problem config),
//! `verify` (run a named verification suite), `sweep` (matched-isometry
//! defect orders or recovery-sequence shell energies). The environment
//! variable `HYPERSHELL_THREADS` caps internal parallelism.

use clap::{Parser, Subcommand};
use hypershell::cli::{cmd_solve, cmd_sweep, cmd_verify, OutputFormat, SweepKind};
use hypershell::{par, Error};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "hypershell", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the strain equation described by a problem config.
    Solve {
        /// Problem config (JSON).
        #[arg(long)]
        config: PathBuf,
        /// Output directory for artifacts.
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Override the solver grid refinement.
        #[arg(long)]
        grid: Option<usize>,
        /// Displacement artifact format.
        #[arg(long, default_value = "json")]
        format: String,
    },
    /// Run a verification suite and write its reports.
    Verify {
        /// geometry | goursat | strain | isometry | energy | all.
        #[arg(long, default_value = "all")]
        suite: String,
        /// Output directory for artifacts.
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Run a sweep experiment from a config with a sweep block.
    Sweep {
        /// Problem config (JSON) with a sweep block.
        #[arg(long)]
        config: PathBuf,
        /// match-order | recovery.
        #[arg(long)]
        kind: String,
        /// Output directory for artifacts.
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Table artifact format.
        #[arg(long, default_value = "csv")]
        format: String,
    },
}

fn run(cli: Cli) -> Result<bool, Error> {
    match cli.command {
        Command::Solve { config, out, grid, format } => {
            let report = cmd_solve(&config, &out, grid, format.parse::<OutputFormat>()?)?;
            println!(
                "solve: sup residual {:.16e}, l2 residual {:.16e}, curl defect {:.16e}, {} iterations",
                report.sup_residual, report.l2_residual, report.curl_defect, report.iterations
            );
            Ok(true)
        }
        Command::Verify { suite, out } => {
            let reports = cmd_verify(&suite, &out)?;
            Ok(reports.iter().all(|r| r.pass))
        }
        Command::Sweep { config, kind, out, format } => {
            cmd_sweep(&config, kind.parse::<SweepKind>()?, &out, format.parse::<OutputFormat>()?)?;
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    par::init_thread_pool_from_env();
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            let payload = serde_json::json!({
                "schema_version": hypershell::config::SCHEMA_VERSION,
                "error_kind": e.kind(),
                "message": e.to_string(),
            });
            eprintln!("{payload}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
