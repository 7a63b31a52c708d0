//! Command-line runner: configuration, orchestration, and bit-stable output.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod output;

use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use config::{Format, Overrides, RunConfig};
use output::{Table, Writer};

/// Exit code for configuration and validation failures.
pub const EXIT_CONFIG: i32 = 2;
/// Exit code for failures while running.
pub const EXIT_RUNTIME: i32 = 3;

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("runtime error: {0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Runtime(_) => EXIT_RUNTIME,
        }
    }
}

impl From<qtransfer::Error> for CliError {
    fn from(e: qtransfer::Error) -> Self {
        use qtransfer::Error as E;
        match e {
            E::InvalidParameter { .. } | E::StabilityGuard { .. } | E::PostselectionDomain(_) => {
                CliError::Config(e.to_string())
            }
            other => CliError::Runtime(other.to_string()),
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "qtransfer", version, about = "Two-qubit dissipative transfer experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Master-equation populations, trace and purity.
    Lindblad(RunArgs),
    /// One stochastic trajectory and its click record.
    Trajectory(RunArgs),
    /// Ensemble means with standard errors and click counts per interval.
    Ensemble(RunArgs),
    /// Local-jump histogram of qubit 1 versus qubit 2 emissions.
    Histogram(RunArgs),
    /// Postselected populations from the master equation and from trajectories.
    Postselect(RunArgs),
    /// Closed-form no-click populations, survival and transfer fidelity.
    Analytic(RunArgs),
    /// Maxwell-demon protocol: heat ledgers and phase timeline.
    Demon(RunArgs),
    /// Print a preset configuration as JSON.
    Preset {
        #[arg(value_parser = config::PRESETS)]
        name: String,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Csv,
    Json,
}

#[derive(Args, Debug, Clone, Default)]
pub struct RunArgs {
    /// JSON configuration file; its keys override the preset.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Start from a named preset (fig2, fig3, fig4, alt_083).
    #[arg(long, value_parser = config::PRESETS)]
    pub preset: Option<String>,
    /// Master seed (trajectory seed for `trajectory`).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Number of trajectories.
    #[arg(long)]
    pub n_traj: Option<usize>,
    /// Final time, in the same absolute units as the rates.
    #[arg(long)]
    pub t_max: Option<f64>,
    /// Internal integration step.
    #[arg(long)]
    pub dt: Option<f64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<String>,
    #[arg(long, value_enum)]
    pub format: Option<FormatArg>,
    /// Worker threads for ensembles (results do not depend on it).
    #[arg(long)]
    pub workers: Option<usize>,
}

impl RunArgs {
    pub fn resolve(&self) -> Result<RunConfig, CliError> {
        let flags = Overrides {
            seed: self.seed,
            n_traj: self.n_traj,
            t_max: self.t_max,
            dt: self.dt,
            out: self.out.clone(),
            format: self.format.map(|f| match f {
                FormatArg::Csv => Format::Csv,
                FormatArg::Json => Format::Json,
            }),
            workers: self.workers,
        };
        config::resolve(self.preset.as_deref(), self.config.as_deref(), &flags)
    }
}

type Job = fn(&RunConfig) -> Result<Vec<Table>, CliError>;

/// Runs one subcommand, writing its tables and manifest. Returns the
/// manifest path (`None` for `preset`, which prints to stdout).
pub fn run(cli: &Cli) -> Result<Option<PathBuf>, CliError> {
    let (name, args, job): (&str, &RunArgs, Job) = match &cli.command {
        Command::Preset { name } => {
            let cfg = config::preset(name)?;
            println!("{}", serde_json::to_string_pretty(&cfg).expect("config serializes"));
            return Ok(None);
        }
        Command::Lindblad(a) => ("lindblad", a, commands::lindblad),
        Command::Trajectory(a) => ("trajectory", a, commands::trajectory),
        Command::Ensemble(a) => ("ensemble", a, commands::ensemble),
        Command::Histogram(a) => ("histogram", a, commands::histogram),
        Command::Postselect(a) => ("postselect", a, commands::postselect),
        Command::Analytic(a) => ("analytic", a, commands::analytic),
        Command::Demon(a) => ("demon", a, commands::demon),
    };
    let cfg = args.resolve()?;
    let start = Instant::now();
    let tables = job(&cfg)?;
    let mut writer = Writer::new(&cfg)?;
    for t in &tables {
        writer.write(t)?;
    }
    let manifest = writer.finish(name, &cfg, start.elapsed().as_secs_f64())?;
    Ok(Some(manifest))
}
