use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use qgauge_cli::config::{load_config, validate, CheckConfig, OutputFormat, ScenarioConfig};
use qgauge_cli::output::{write_error_summary, write_outputs};
use qgauge_cli::rules::rule_table;
use qgauge_cli::runner::{fig1_config, run_scenario, RunOptions, FIG1_BETAS};

#[derive(Parser)]
#[command(name = "qgauge", version, about = "Gauge sum-rule laboratory on finite quantum systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every check of a scenario and write tables plus summary.json.
    Check {
        #[arg(long)]
        config: PathBuf,
        /// Output directory; overrides output.directory of the config.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Multiplier applied to the residual tolerances.
        #[arg(long, default_value_t = 1.0)]
        tol_scale: f64,
    },
    /// Produce the oscillator density and covariance dataset.
    Fig1 {
        /// Scenario providing system and temperatures; its checks are replaced by fig1.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        tol_scale: f64,
        /// Oscillator levels kept when no config is given.
        #[arg(long, default_value_t = 80)]
        n_max: usize,
    },
    /// Print the rule ids with class and default tolerance.
    ListRules,
    /// Parse and validate a scenario without running it.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::ListRules => {
            print!("{}", rule_table());
            Ok(true)
        }
        Command::Validate { config } => {
            let cfg = load_config(&config)?;
            println!("{}: ok ({} checks)", config.display(), cfg.checks.len());
            Ok(true)
        }
        Command::Check { config, out, tol_scale } => {
            let cfg = load_config(&config)?;
            let dir = match (out, &cfg.output.directory) {
                (Some(d), _) => d,
                (None, Some(d)) => PathBuf::from(d),
                (None, None) => bail!("no output directory: pass --out or set output.directory"),
            };
            execute(&cfg, &dir, "check", tol_scale)
        }
        Command::Fig1 { config, out, tol_scale, n_max } => {
            let cfg = match config {
                Some(path) => {
                    let mut cfg = load_config(&path)?;
                    cfg.checks = vec![CheckConfig::new("fig1")];
                    validate(&cfg).with_context(|| format!("config {} cannot produce fig1", path.display()))?;
                    cfg
                }
                None => fig1_config(n_max, &FIG1_BETAS),
            };
            execute(&cfg, &out, "fig1", tol_scale)
        }
    }
}

fn execute(cfg: &ScenarioConfig, dir: &Path, command: &str, tol_scale: f64) -> Result<bool> {
    let opts = RunOptions { tol_scale, workers: None };
    let outcome = match run_scenario(cfg, &opts) {
        Ok(o) => o,
        Err(e) => {
            let _ = write_error_summary(dir, command, tol_scale, &format!("{e:#}"));
            return Err(e);
        }
    };
    let formats: &[OutputFormat] = &cfg.output.formats;
    let summary = write_outputs(dir, command, &outcome, formats)?;
    for r in &outcome.results {
        let verdict = if r.pass { "PASS" } else { "FAIL" };
        println!("{verdict} {:<26} max_residual={:e} tolerance={:e}", r.rule, r.max_residual, r.tolerance);
    }
    println!(
        "{} in {:.2}s with {} workers; summary at {}",
        if outcome.pass { "all checks passed" } else { "some checks failed" },
        outcome.wall_time_seconds,
        outcome.workers,
        summary.display()
    );
    Ok(outcome.pass)
}
