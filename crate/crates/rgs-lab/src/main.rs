//! Command-line front end: generate problems, run traced trials, verify
//! the kernels against theory, and plot traces.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use rgs_lab::cli::commands::{cmd_gen, cmd_run};
use rgs_lab::cli::config::ExperimentConfig;
use rgs_lab::cli::plot::{self, PlotOptions};
use rgs_lab::cli::verify::{run_checks, VerifyOptions};
use rgs_lab::cli::{artifacts, CliError};

#[derive(Parser)]
#[command(
    name = "rgslab",
    version,
    about = "Randomized Gauss-Seidel least-squares lab"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a problem instance: matrix, right-hand side, least-norm
    /// solution, and metadata with checksums.
    Gen {
        /// Experiment config (JSON).
        #[arg(long)]
        config: PathBuf,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        /// Allow the full-size problem shapes.
        #[arg(long)]
        full: bool,
    },
    /// Run the configured trials and write trace.csv.
    Run {
        /// Experiment config (JSON).
        #[arg(long)]
        config: PathBuf,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        /// Allow the full-size problem shapes.
        #[arg(long)]
        full: bool,
    },
    /// Check the solver kernels against exact identities, bounds, and
    /// Monte Carlo statistics on a seeded corpus.
    Verify {
        /// Seed for the verification corpus.
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Trials per Monte Carlo check.
        #[arg(long, default_value_t = 2500)]
        mc_trials: usize,
        /// Also build the full-size shapes and check their structure.
        #[arg(long)]
        full: bool,
        /// Write the report to this file as well as stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render one traced quantity from a trace CSV as a standalone SVG.
    Plot {
        /// Input trace.csv.
        #[arg(long)]
        csv: PathBuf,
        /// Output SVG path.
        #[arg(long)]
        out: PathBuf,
        /// Quantity to plot (needed when the trace holds several).
        #[arg(long)]
        quantity: Option<String>,
        /// Direction index (needed when the quantity was traced for several).
        #[arg(long)]
        ell: Option<usize>,
        /// Log-scale the y axis; non-positive points are dropped.
        #[arg(long)]
        log_y: bool,
        /// Plot the per-step mean over trials instead of one line per trial.
        #[arg(long)]
        mean: bool,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version go to stdout and exit 0; argument errors go
            // to stderr and exit 1 (the usage exit code).
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Gen { config, out, full } => {
            let config = ExperimentConfig::load(&config)?;
            cmd_gen(&config, &out, full)
        }
        Command::Run { config, out, full } => {
            let config = ExperimentConfig::load(&config)?;
            cmd_run(&config, &out, full)
        }
        Command::Verify {
            seed,
            mc_trials,
            full,
            out,
        } => {
            let opts = VerifyOptions {
                seed,
                mc_trials,
                full,
                step_scale: 1.0,
            };
            let report = run_checks(&opts)?;
            let text = report.render();
            print!("{text}");
            if let Some(path) = out {
                fs::write(&path, &text)
                    .map_err(|e| CliError::Runtime(format!("writing {}: {e}", path.display())))?;
            }
            if report.passed() {
                Ok(())
            } else {
                Err(CliError::VerifyFailed {
                    failed: report.failed_count(),
                    total: report.checks.len(),
                })
            }
        }
        Command::Plot {
            csv,
            out,
            quantity,
            ell,
            log_y,
            mean,
        } => {
            let text = fs::read_to_string(&csv)
                .map_err(|e| CliError::Usage(format!("reading {}: {e}", csv.display())))?;
            let rows = artifacts::read_trace_csv(&text)?;
            let opts = PlotOptions {
                quantity,
                ell,
                log_y,
                mean,
            };
            let rendered = plot::render(&rows, &opts)?;
            if rendered.dropped > 0 {
                eprintln!(
                    "note: log scale dropped {} non-positive points",
                    rendered.dropped
                );
            }
            fs::write(&out, &rendered.svg)
                .map_err(|e| CliError::Runtime(format!("writing {}: {e}", out.display())))?;
            println!("wrote {} ({} series)", out.display(), rendered.series_count);
            Ok(())
        }
    }
}
