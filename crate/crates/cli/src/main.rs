use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fbp_cli::commands::{render_report, run, Command};
use fbp_cli::config::RunConfig;
use fbp_cli::{CliError, OUTPUT_ROOT_ENV};

/// Construct and verify tube solutions of the two-phase free boundary
/// problem, and minimize the two-phase energy on balls of ℝ⁸.
///
/// Exit status: 0 when every gate passes, 1 on a gate failure or corrupt
/// artifacts, 2 on a configuration error.
#[derive(Parser)]
#[command(name = "fbp", version)]
struct Cli {
    /// TOML run configuration; built-in defaults when omitted.
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,
    /// Output root (overrides $FBP_OUTPUT_ROOT; default ./fbp-out).
    #[arg(long, global = true)]
    out_root: Option<PathBuf>,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Catenoid generating curve and the n = 3 closed-form check.
    CatenoidProfile,
    /// Leaf of the Simons cone foliation and its decay towards the cone.
    SimonsLeaf,
    /// Table of the reduced multipliers and their denominators.
    KernelsTable,
    /// Reduced height equations for the odd model data.
    ReduceSolve,
    /// Full outer fixed point and residual report.
    Glue,
    /// Re-verifies the fields of a glue run from its manifest.
    Verify,
    /// Energy minimization on a ball with barrier boundary data.
    Minimize,
    /// Minimization followed by the barrier sweep.
    Sweep,
    /// Prints a run summary from a manifest (file or run directory).
    Report { manifest: PathBuf },
}

fn load_config(path: Option<&PathBuf>) -> Result<RunConfig, CliError> {
    match path {
        None => Ok(RunConfig::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
            RunConfig::parse(&text)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let command = match cli.command {
        Cmd::Report { manifest } => {
            return match render_report(&manifest) {
                Ok((text, passed)) => {
                    print!("{text}");
                    ExitCode::from(if passed { 0 } else { 1 })
                }
                Err(e) => {
                    eprintln!("{e}");
                    ExitCode::from(e.exit_code() as u8)
                }
            };
        }
        Cmd::CatenoidProfile => Command::CatenoidProfile,
        Cmd::SimonsLeaf => Command::SimonsLeaf,
        Cmd::KernelsTable => Command::KernelsTable,
        Cmd::ReduceSolve => Command::ReduceSolve,
        Cmd::Glue => Command::Glue,
        Cmd::Verify => Command::Verify,
        Cmd::Minimize => Command::Minimize,
        Cmd::Sweep => Command::Sweep,
    };
    let root = cli
        .out_root
        .or_else(|| std::env::var_os(OUTPUT_ROOT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("fbp-out"));
    let result = load_config(cli.config.as_ref()).and_then(|cfg| run(command, &cfg, &root));
    match result {
        Ok((path, manifest)) => {
            let failed: Vec<&str> = manifest.gates.iter().filter(|g| !g.passed).map(|g| g.name.as_str()).collect();
            let status = serde_json::json!({
                "status": manifest.status,
                "manifest": path.display().to_string(),
                "failed_gates": failed,
                "failure": manifest.failure,
            });
            let line = status.to_string();
            if manifest.passed() {
                println!("{line}");
                ExitCode::SUCCESS
            } else {
                eprintln!("{line}");
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
