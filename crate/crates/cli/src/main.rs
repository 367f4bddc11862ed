//! Command-line runner for adiabatic schedule experiments.

mod build;
mod commands;
mod config;
mod error;
mod output;
mod presets;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::{ExperimentConfig, Overrides};
use crate::error::CliError;
use crate::presets::Preset;

#[derive(Parser)]
#[command(name = "adiabat", version, about = "Adiabatic state preparation experiments")]
struct Cli {
    /// Worker threads for sweeps and gap profiles (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// More log output; repeat for debug messages.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Tabulate schedules and report their boundary order.
    Schedule {
        #[command(flatten)]
        common: Common,
        /// Number of x samples in the table.
        #[arg(long, default_value_t = 1001)]
        points: usize,
    },
    /// Tabulate the lowest spectral gap along the model's path.
    Gap {
        #[command(flatten)]
        common: Common,
    },
    /// Evolve one schedule at one total time and record the trajectory.
    Evolve {
        #[command(flatten)]
        common: Common,
    },
    /// Final infidelity of every schedule at every total time.
    Sweep {
        #[command(flatten)]
        common: Common,
    },
    /// Fit scaling regimes to a sweep table.
    Fit {
        /// Sweep CSV written by `adiabat sweep`.
        input: PathBuf,
        /// Output directory [default: the input's directory].
        #[arg(long, env = "ADIABAT_OUTPUT_DIR")]
        output_dir: Option<PathBuf>,
    },
    /// Run a pinned figure-scale experiment (sweep and fit).
    Preset {
        name: Preset,
        /// Print the preset's configuration as TOML instead of running it.
        #[arg(long)]
        print_config: bool,
        #[command(flatten)]
        overrides: OverrideArgs,
    },
}

#[derive(Args)]
struct Common {
    /// Experiment configuration (TOML).
    #[arg(short, long)]
    config: PathBuf,
    #[command(flatten)]
    overrides: OverrideArgs,
}

#[derive(Args, Default)]
struct OverrideArgs {
    /// Number of sites.
    #[arg(short = 'L', long = "sites")]
    sites: Option<usize>,
    /// Total times, comma separated.
    #[arg(short = 'T', long = "total-time", value_delimiter = ',', conflicts_with = "epsilon")]
    total_time: Option<Vec<f64>>,
    /// Inverse total times, comma separated.
    #[arg(long, value_delimiter = ',')]
    epsilon: Option<Vec<f64>>,
    #[arg(long)]
    tolerance: Option<f64>,
    /// Trajectory sample intervals.
    #[arg(long)]
    samples: Option<usize>,
    #[arg(short, long, env = "ADIABAT_OUTPUT_DIR")]
    output_dir: Option<PathBuf>,
    /// Leave the runtime column empty so tables are byte-reproducible.
    #[arg(long)]
    no_runtime: bool,
}

impl OverrideArgs {
    fn to_overrides(&self) -> Overrides {
        Overrides {
            sites: self.sites,
            total_times: self.total_time.clone(),
            epsilon: self.epsilon.clone(),
            tolerance: self.tolerance,
            samples: self.samples,
            output_dir: self.output_dir.clone(),
            record_runtime: self.no_runtime.then_some(false),
        }
    }
}

fn load(common: &Common) -> Result<ExperimentConfig, CliError> {
    let mut cfg = ExperimentConfig::load(&common.config)?;
    cfg.apply(&common.overrides.to_overrides());
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Schedule { common, points } => {
            if points < 2 {
                return Err(CliError::Config("--points must be at least 2".into()));
            }
            commands::schedule(&load(&common)?, points)
        }
        Command::Gap { common } => commands::gap(&load(&common)?),
        Command::Evolve { common } => commands::evolve_one(&load(&common)?),
        Command::Sweep { common } => commands::sweep_cmd(&load(&common)?),
        Command::Fit { input, output_dir } => {
            let dir = output_dir.unwrap_or_else(|| {
                input.parent().map(PathBuf::from).unwrap_or_else(|| PathBuf::from("."))
            });
            commands::fit(&input, &dir)
        }
        Command::Preset {
            name,
            print_config,
            overrides,
        } => {
            let o = overrides.to_overrides();
            for (part, mut cfg) in presets::configs(name) {
                cfg.apply(&o);
                cfg.output.directory = cfg.output.directory.join(name.name()).join(&part);
                cfg.validate()?;
                if print_config {
                    if !part.is_empty() {
                        println!("# part {part}");
                    }
                    let text = toml::to_string(&cfg).map_err(|e| CliError::Config(e.to_string()))?;
                    println!("{text}");
                } else {
                    commands::sweep_and_fit(&cfg)?;
                }
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    if let Some(j) = cli.jobs {
        if j == 0 {
            eprintln!("error: --jobs must be at least 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(j).build_global() {
            eprintln!("error: cannot start worker pool: {e}");
            return ExitCode::from(3);
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
