//! Command-line laboratory for spin-wave AFC memory simulations under
//! dynamical decoupling: config validation, Monte-Carlo decay sweeps,
//! decay-curve fits, and bundled reproduction scenarios.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use afcdd_cli::config::{RunConfig, Scenario};
use afcdd_cli::{scenarios, CliError};

#[derive(Parser)]
#[command(
    name = "afcdd",
    version,
    about = "Spin-wave AFC memory laboratory: dynamical-decoupling Monte Carlo, \
             spectral-diffusion models and decay-curve fitting",
    after_help = "Thread count defaults to the machine; set AFCDD_THREADS to pin it. \
                  Results are bit-identical for a given config and seed regardless of threads."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override the master RNG seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Override the trajectory count.
    #[arg(long, global = true)]
    n_traj: Option<usize>,
    /// Fail (exit 3) when the operating constraints are violated.
    #[arg(long, global = true)]
    strict: bool,
    /// Output directory for CSV/JSON results.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Validate the physical configuration against the operating constraints.
    CheckConfig,
    /// One Monte-Carlo storage efficiency at a fixed schedule.
    Simulate,
    /// Decay curve at fixed pulse count, sweeping the pulse separation.
    SweepFixedN,
    /// Decay curve at fixed pulse separation, sweeping the pulse count.
    SweepFixedTau,
    /// Fit a decay-curve CSV to a decay model.
    Fit,
    /// Run a bundled reproduction scenario:
    /// fig4, fig5, fig6a, fig6b or appendixA3.
    Reproduce { name: String },
}

#[derive(Serialize)]
struct Versions {
    afcdd: &'static str,
}

#[derive(Serialize)]
struct RunSummary {
    config: RunConfig,
    seed: Option<u64>,
    versions: Versions,
    wall_time_s: f64,
    results: serde_json::Value,
}

fn scenario_of(cmd: &Command) -> Scenario {
    match cmd {
        Command::CheckConfig => Scenario::CheckConfig,
        Command::Simulate => Scenario::Simulate,
        Command::SweepFixedN => Scenario::SweepFixedN,
        Command::SweepFixedTau => Scenario::SweepFixedTau,
        Command::Fit => Scenario::Fit,
        Command::Reproduce { .. } => Scenario::Reproduce,
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let started = Instant::now();
    let base = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let cfg = base.resolve(scenario_of(&cli.command), cli.seed, cli.n_traj, cli.out_dir)?;

    let out = match &cli.command {
        Command::CheckConfig => scenarios::check_config(&cfg, cli.strict)?,
        Command::Simulate => scenarios::simulate_point(&cfg, cli.strict)?,
        Command::SweepFixedN => scenarios::sweep_fixed_n(&cfg, cli.strict)?,
        Command::SweepFixedTau => scenarios::sweep_fixed_tau(&cfg, cli.strict)?,
        Command::Fit => scenarios::fit_curve(&cfg)?,
        Command::Reproduce { name } => scenarios::reproduce(&cfg, name, cli.strict)?,
    };

    let summary = RunSummary {
        seed: cfg.ensemble.as_ref().map(|e| e.seed),
        config: cfg,
        versions: Versions {
            afcdd: env!("CARGO_PKG_VERSION"),
        },
        wall_time_s: started.elapsed().as_secs_f64(),
        results: json!({
            "data": out.results,
            "files": out.files.iter().map(|p| p.display().to_string()).collect::<Vec<_>>(),
        }),
    };
    let text = serde_json::to_string_pretty(&summary).expect("summary serializes");
    let needs_dir =
        !out.files.is_empty() || matches!(summary.config.scenario, Some(Scenario::Simulate));
    if needs_dir {
        std::fs::create_dir_all(&summary.config.io.out_dir)
            .map_err(|e| CliError::Io(e.to_string()))?;
        let path = summary.config.io.out_dir.join("summary.json");
        std::fs::write(&path, &text)
            .map_err(|e| CliError::Io(format!("writing {}: {e}", path.display())))?;
        println!("wrote {}", path.display());
    } else {
        println!("{text}");
    }
    Ok(())
}

fn main() -> ExitCode {
    if let Ok(threads) = std::env::var("AFCDD_THREADS") {
        if let Ok(n) = threads.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global();
        }
    }
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let payload = json!({ "category": e.category(), "message": e.to_string() });
            eprintln!("{payload}");
            ExitCode::from(e.exit_code())
        }
    }
}
