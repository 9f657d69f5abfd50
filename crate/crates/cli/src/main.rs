//! `warpflow`: run, verify, resume and report inverse mean curvature flow
//! experiments described by a TOML configuration.

mod report;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use warpflow::diagnostics::Severity;
use warpflow::oracle::{run_identity_suite, seed_from_env, VerifyOptions};
use warpflow::run::{resume, run};
use warpflow::{emit_config, parse_config, FlowError, RunConfig, Termination, Trajectory};

const EXIT_INPUT: u8 = 2;
const EXIT_BREACH: u8 = 3;
const EXIT_NUMERICAL: u8 = 4;
const EXIT_VERIFY: u8 = 5;

#[derive(Parser)]
#[command(name = "warpflow", version, about = "Inverse mean curvature flow of graphs in warped products")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate the flow described by a configuration file.
    Run {
        config: PathBuf,
        /// Output directory, overriding `[output] dir`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check the geometric identities over three grid refinements.
    Verify {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Continue a run from a checkpoint.
    Resume {
        config: PathBuf,
        checkpoint: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Turn diagnostics CSVs into plot series and a summary.
    Report {
        /// One diagnostics CSV, or two for a side-by-side comparison.
        #[arg(num_args = 1..=2, required = true)]
        csv: Vec<PathBuf>,
        /// Defaults to `report/` next to the first CSV.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run { config, out } => cmd_run(&config, out, None),
        Command::Resume { config, checkpoint, out } => cmd_run(&config, out, Some(&checkpoint)),
        Command::Verify { config, out } => cmd_verify(&config, out),
        Command::Report { csv, out } => report::cmd_report(&csv, out),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(error_code(&e))
        }
    }
}

/// Numerical failures get their own code; everything else is bad input.
fn error_code(e: &anyhow::Error) -> u8 {
    let numerical = e.chain().filter_map(|c| c.downcast_ref::<FlowError>()).any(|f| {
        matches!(f, FlowError::NonFinite { .. } | FlowError::Degenerate { .. } | FlowError::UnstableStep { .. })
    });
    if numerical {
        EXIT_NUMERICAL
    } else {
        EXIT_INPUT
    }
}

fn load(path: &Path, out: Option<PathBuf>) -> Result<RunConfig> {
    let mut cfg = parse_config(path)?;
    if out.is_some() {
        cfg.output.dir = out;
    }
    println!("# effective configuration\n{}", emit_config(&cfg));
    Ok(cfg)
}

fn cmd_run(config: &Path, out: Option<PathBuf>, checkpoint: Option<&Path>) -> Result<u8> {
    let cfg = load(config, out)?;
    let tr = match checkpoint {
        Some(ck) => resume(&cfg, ck)?,
        None => run(&cfg)?,
    };
    Ok(summarize(&cfg, &tr))
}

fn summarize(cfg: &RunConfig, tr: &Trajectory) -> u8 {
    let warnings = tr.breaches.iter().filter(|b| b.severity == Severity::Warn).count();
    println!(
        "t = {:.6} after {} steps, {} samples, {warnings} monitor warnings",
        tr.final_state.t,
        tr.final_state.step,
        tr.records.len()
    );
    for b in tr.breaches.iter().filter(|b| b.severity == Severity::Warn).take(5) {
        println!("  {b}");
    }
    if let Some(dir) = &cfg.output.dir {
        println!("output in {}", dir.display());
    }
    let last_ck = tr.checkpoints.last().map(|p| p.display().to_string()).unwrap_or_else(|| "none written".into());
    match &tr.status {
        Termination::ReachedEnd => {
            println!("reached t_end");
            0
        }
        Termination::UserStop => {
            println!("stopped at the step limit; checkpoint {last_ck}");
            0
        }
        Termination::MonitorBreach(b) => {
            eprintln!("fatal monitor breach: {b}; checkpoint {last_ck}");
            EXIT_BREACH
        }
        Termination::Numerical(msg) => {
            eprintln!("numerical failure: {msg}; checkpoint {last_ck}");
            EXIT_NUMERICAL
        }
    }
}

fn cmd_verify(config: &Path, out: Option<PathBuf>) -> Result<u8> {
    let cfg = load(config, out)?;
    let report = run_identity_suite(&VerifyOptions {
        preset: cfg.preset,
        base_counts: cfg.nodes.clone(),
        seed: seed_from_env(),
        tolerances: cfg.tolerances,
        defect: cfg.stencil_defect,
    })?;
    print!("{report}");
    if let Some(dir) = &cfg.output.dir {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let path = dir.join("oracle.csv");
        fs::write(&path, report.to_csv()).with_context(|| format!("writing {}", path.display()))?;
        println!("residuals written to {}", path.display());
    }
    if report.passed() {
        return Ok(0);
    }
    let names: Vec<&str> = report.failing().iter().map(|r| r.identity.as_str()).collect();
    eprintln!("verification failed: {}", names.join(", "));
    Ok(EXIT_VERIFY)
}
