use std::f64::consts::FRAC_PI_2;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use chaos_sensor::classical::{lyapunov_estimate, ClassicalState, LyapunovConfig};
use chaos_sensor::exec::{with_workers, Execution};
use chaos_sensor::floquet::KickedTopParams;
use chaos_sensor::runner::{effective_workers, preset, run, Experiment, ExperimentConfig, RunOptions, RunReport};
use chaos_sensor::spin::PhaseAngles;
use chaos_sensor::Error;

#[derive(Parser)]
#[command(name = "chaos-sensor", version, about = "Kicked-top sensing experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment from a JSON config.
    Run {
        config: PathBuf,
        /// Override the output CSV path.
        #[arg(long)]
        output: Option<PathBuf>,
        /// Ignore an existing checkpoint.
        #[arg(long)]
        fresh: bool,
        #[arg(long)]
        sequential: bool,
    },
    /// Print a named preset as JSON, or run it with --run.
    Preset {
        name: String,
        /// Full problem sizes instead of desk-scale ones.
        #[arg(long)]
        full: bool,
        #[arg(long)]
        run: bool,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Classical Lyapunov exponent around one phase-space point.
    Lyapunov {
        #[arg(long, default_value_t = 30.0)]
        k: f64,
        #[arg(long, default_value_t = FRAC_PI_2)]
        alpha: f64,
        #[arg(long, default_value_t = FRAC_PI_2)]
        theta: f64,
        #[arg(long, default_value_t = FRAC_PI_2)]
        phi: f64,
        /// Sampling disk area is 1/j.
        #[arg(long, default_value_t = 100.0)]
        j: f64,
        #[arg(long, default_value_t = 100)]
        samples: usize,
        #[arg(long, default_value_t = 10_000)]
        steps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Kicked against unkicked SERF magnetometer.
    Serf {
        /// Number of 1 ms periods (default 60000).
        #[arg(long)]
        periods: Option<usize>,
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long)]
        fresh: bool,
    },
    /// Check a config without running it.
    Validate { config: PathBuf },
}

/// Exit statuses: 1 for configuration problems, 2 for numerical failures.
enum Failure {
    Config(String),
    Numeric(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) => Failure::Config(e.to_string()),
            other => Failure::Numeric(other.to_string()),
        }
    }
}

fn execute(config: &ExperimentConfig, fresh: bool, sequential: bool) -> Result<RunReport, Failure> {
    let exec = if sequential { Execution::Sequential } else { Execution::Parallel };
    let report = run(config, RunOptions { exec, resume: !fresh })?;
    println!("wrote {} rows to {}", report.rows, report.csv.display());
    println!("sidecar {}", report.sidecar.display());
    if report.resumed_units > 0 {
        println!("{} units taken from the checkpoint", report.resumed_units);
    }
    println!("{}", serde_json::to_string_pretty(&report.summary).unwrap_or_default());
    if report.flagged > 0 {
        return Err(Failure::Numeric(format!("{} rows failed; see the status column", report.flagged)));
    }
    Ok(report)
}

fn dispatch(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Run { config, output, fresh, sequential } => {
            let mut c = ExperimentConfig::load(&config)?;
            if let Some(o) = output {
                c.output = o;
            }
            execute(&c, fresh, sequential)?;
        }
        Command::Preset { name, full, run, output } => {
            let mut c = preset(&name, full)?;
            if let Some(o) = output {
                c.output = o;
            }
            if run {
                execute(&c, false, false)?;
            } else {
                println!("{}", serde_json::to_string_pretty(&c).map_err(Error::from)?);
            }
        }
        Command::Lyapunov { k, alpha, theta, phi, j, samples, steps, seed } => {
            let params = KickedTopParams::new(alpha, k)?;
            let center = ClassicalState::from_angles(PhaseAngles::new(theta, phi)?);
            let cfg = LyapunovConfig { n_samples: samples, n_steps: steps, seed, ..LyapunovConfig::for_spin(j) };
            let est = with_workers(effective_workers(0), || lyapunov_estimate(&center, params, &cfg, Execution::Parallel))?;
            println!("lambda = {:.6} +- {:.6} ({} samples, {} steps)", est.mean, est.std_error, samples, steps);
        }
        Command::Serf { periods, output, fresh } => {
            let mut c = preset("fig7", false)?;
            if let Experiment::Serf(s) = &mut c.experiment {
                if let Some(p) = periods {
                    s.schedule.periods = p;
                    s.schedule.record_every = s.schedule.record_every.min(p.max(1));
                }
            }
            c.output = output.unwrap_or_else(|| PathBuf::from("results/serf.csv"));
            execute(&c, fresh, false)?;
        }
        Command::Validate { config } => {
            let c = ExperimentConfig::load(&config)?;
            c.validate()?;
            println!("{}: ok ({}), hash {}", config.display(), c.experiment.kind(), c.hash());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Numeric(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
