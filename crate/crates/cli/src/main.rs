use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use msb_cli::commands::{cmd_check, cmd_drift, cmd_example_scalar, cmd_simulate};
use msb_cli::{defaults, error::EXIT_ERROR};

/// Bounded-input stabilization over unreliable control channels: feasibility
/// checks, policy synthesis, and Monte Carlo verification.
#[derive(Parser)]
#[command(name = "msb", version, about)]
struct Cli {
    /// Override the scenario's master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate feasibility and print the synthesized constants.
    /// Exit 0 feasible, 2 infeasible, 1 on parse/validation errors.
    Check {
        /// Scenario JSON file.
        scenario: PathBuf,
    },
    /// Run the Monte Carlo moment estimate and the boundedness verdict,
    /// writing moments.csv and verdict.json. Exit 0 PASS, 3 FAIL.
    Simulate {
        /// Scenario JSON file.
        scenario: PathBuf,
        /// Output directory.
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Burn-in fraction for the plateau windows.
        #[arg(long, default_value_t = defaults::BURN_IN)]
        burn_in: f64,
    },
    /// Estimate the per-window drift of the orthogonal state from probe
    /// states. Exit 0 when every probe passes, 3 otherwise.
    Drift {
        /// Scenario JSON file.
        scenario: PathBuf,
        /// Probe radii (comma separated); default 2J,10J,100J.
        #[arg(long, value_delimiter = ',')]
        probes: Option<Vec<f64>>,
        /// Window rollouts per probe.
        #[arg(long, default_value_t = defaults::DRIFT_SAMPLES)]
        samples: usize,
        /// Drift CSV path.
        #[arg(long, default_value = "drift.csv")]
        out: PathBuf,
    },
    /// Run the bundled scalar burst example end to end (check, simulate,
    /// drift) and print a summary.
    ExampleScalar {
        /// Output directory.
        #[arg(long, default_value = "example1_out")]
        out: PathBuf,
        /// Override the transmission probability.
        #[arg(long)]
        p: Option<f64>,
        /// Override the control authority.
        #[arg(long)]
        umax: Option<f64>,
    },
}

fn main() -> ExitCode {
    configure_threads();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Check { scenario } => cmd_check(&scenario, cli.seed).map(|o| o.exit),
        Command::Simulate {
            scenario,
            out,
            burn_in,
        } => cmd_simulate(&scenario, &out, cli.seed, burn_in).map(|o| o.exit),
        Command::Drift {
            scenario,
            probes,
            samples,
            out,
        } => cmd_drift(&scenario, probes, samples, &out, cli.seed).map(|o| o.exit),
        Command::ExampleScalar { out, p, umax } => {
            cmd_example_scalar(&out, p, umax, cli.seed).map(|o| o.exit)
        }
    };
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

/// Cap the worker pool from MSB_THREADS, when set.
fn configure_threads() {
    if let Ok(value) = std::env::var("MSB_THREADS") {
        match value.parse::<usize>() {
            Ok(n) if n >= 1 => {
                let _ = rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build_global();
            }
            _ => {
                eprintln!("error: invalid MSB_THREADS={value} (expected a positive integer)");
                std::process::exit(EXIT_ERROR);
            }
        }
    }
}
