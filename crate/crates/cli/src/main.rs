use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use qfeedback_sim::{run, validate_config, RunError, Scenario, DEFAULT_OUT, OUT_ENV};

const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

/// Reproduce the network's pulse, stability and excitation data as CSV + JSON.
#[derive(Parser)]
#[command(name = "qfeedback-sim", version)]
struct Cli {
    scenario: Scenario,
    /// Scenario config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides the config and the QFEEDBACK_OUT variable.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Concurrent sweep points (default: available cores).
    #[arg(long)]
    workers: Option<usize>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();

    let text = match std::fs::read_to_string(&cli.config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", cli.config.display());
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    let raw: serde_json::Value = match serde_json::from_str(&text) {
        Ok(v) => v,
        Err(e) => {
            eprintln!("error: {} is not valid JSON: {e}", cli.config.display());
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    let config = match validate_config(&raw, cli.scenario) {
        Ok(c) => c,
        Err(errs) => {
            eprintln!("error: invalid config {}:", cli.config.display());
            for e in errs {
                eprintln!("  {e}");
            }
            return ExitCode::from(EXIT_CONFIG);
        }
    };

    let out = cli
        .out
        .or_else(|| config.output_dir.clone())
        .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
    let workers = cli
        .workers
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));

    match run(&config, &out, workers) {
        Ok(manifest) => {
            println!(
                "{}: {} point(s), {} file(s) in {} ({:.0} ms)",
                manifest.scenario,
                config.points.len(),
                manifest.outputs.len() + 1,
                out.display(),
                manifest.timings.total_ms
            );
            ExitCode::SUCCESS
        }
        Err(e @ (RunError::OutputDir { .. } | RunError::Io { .. })) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_NUMERICAL)
        }
    }
}
