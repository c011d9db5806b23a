use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use svi::systems::Preset;
use svibench::config::{ExperimentConfig, Overrides};
use svibench::metrics::{fit_convergence_slope_above, SLOPE_FLOOR};
use svibench::runner::{read_csv, run_experiment, write_results};
use svibench::BenchError;

/// Convergence and timing benchmarks for variational and Runge–Kutta integrators.
#[derive(Parser)]
#[command(name = "svibench", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a TOML config.
    Run {
        /// Config file; omit to describe the experiment entirely with flags.
        config: Option<PathBuf>,
        #[command(flatten)]
        overrides: OverrideArgs,
    },
    /// List the preset systems.
    Presets,
    /// Fit the convergence slope of a result CSV.
    Slope {
        csv: PathBuf,
        /// Points with e_l2 at or below this are left out.
        #[arg(long, default_value_t = SLOPE_FLOOR)]
        floor: f64,
    },
}

#[derive(Args)]
struct OverrideArgs {
    #[arg(long)]
    system: Option<String>,
    /// Integrator id; repeat for several (`surrogate-vi,4` selects a series order).
    #[arg(long = "integrator")]
    integrators: Vec<String>,
    /// Comma-separated step sizes.
    #[arg(long, value_delimiter = ',')]
    h: Option<Vec<f64>>,
    #[arg(long)]
    t_final: Option<f64>,
    #[arg(long)]
    eps_tol: Option<f64>,
    /// Timed repetitions per step size.
    #[arg(long)]
    reps: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Use self-refined benchmarks at this step size.
    #[arg(long)]
    benchmark_h: Option<f64>,
}

impl From<OverrideArgs> for Overrides {
    fn from(a: OverrideArgs) -> Self {
        Overrides {
            system: a.system,
            integrators: a.integrators,
            h: a.h,
            t_final: a.t_final,
            eps_tol: a.eps_tol,
            repetitions: a.reps,
            benchmark_h: a.benchmark_h,
            out: a.out,
        }
    }
}

fn run(command: Command) -> Result<(), BenchError> {
    match command {
        Command::Run { config, overrides } => {
            let overrides = Overrides::from(overrides);
            let config = match config {
                Some(path) => ExperimentConfig::load(&path, &overrides)?,
                None => ExperimentConfig::from_overrides(&overrides)?,
            };
            let results = run_experiment(&config)?;
            for path in write_results(&config, &results)? {
                println!("{}", path.display());
            }
        }
        Command::Presets => {
            for p in Preset::ALL {
                println!("{:<24} T = {:>5} s   {}", p.name(), p.t_final(), p.description());
            }
        }
        Command::Slope { csv, floor } => {
            let slope = fit_convergence_slope_above(&read_csv(&csv)?, floor)?;
            println!("{slope:.6}");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("svibench: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
