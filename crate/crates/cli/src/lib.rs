//! Command-line front end for swarm simulations and drift certification.
//!
//! Exit status: 0 on success, 1 when an input violates a contract (bad
//! flag, bad config key, conditions that do not hold), 2 on I/O failure.

mod commands;

use std::ffi::OsString;
use std::fmt;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use commands::{
    bt_config, scenario_config, sojourn_table, SojournRow, SojournTableParams, TableEntry,
};

/// Environment variable naming the default output directory.
pub const OUT_ENV: &str = "SWARMLAB_OUT";

#[derive(Debug)]
pub enum CliError {
    Contract(String),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Contract(_) => 1,
            CliError::Io(_) => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Contract(m) | CliError::Io(m) => f.write_str(m),
        }
    }
}

impl std::error::Error for CliError {}

impl From<swarmlab_core::Error> for CliError {
    fn from(e: swarmlab_core::Error) -> Self {
        if e.is_io() {
            CliError::Io(e.to_string())
        } else {
            CliError::Contract(e.to_string())
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Parser, Debug)]
#[command(name = "swarmlab", version, about = "Peer-to-peer swarm simulator and stability certifier")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Run continuous-time replications of one scenario
    Simulate(SimulateArgs),
    /// Run the round-based client model
    BtSimulate(BtArgs),
    /// Mean sojourn times for each protocol and file size
    SojournTable(SojournArgs),
    /// Derive the potential-function constants and check every condition
    LyapunovConstants(ConstantsArgs),
    /// Scan drift over shells and emit a certifier report
    LyapunovScan(ScanArgs),
    /// Repeat a simulation over a list of arrival rates or piece counts
    Sweep(SweepArgs),
    /// Render columns of a CSV file as an SVG line chart
    Plot(PlotArgs),
}

#[derive(Args, Debug, Clone)]
pub struct OutputArgs {
    /// Output directory
    #[arg(long, env = OUT_ENV, default_value = "swarmlab-out")]
    pub out: PathBuf,
    /// File name prefix
    #[arg(long)]
    pub name: Option<String>,
    /// Also write an SVG chart
    #[arg(long)]
    pub svg: bool,
}

/// Flags overriding a scenario config file; unset flags keep file values.
#[derive(Args, Debug, Clone, Default)]
pub struct ScenarioArgs {
    /// TOML scenario file
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub protocol: Option<String>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub us: Option<f64>,
    #[arg(long)]
    pub mu: Option<f64>,
    /// empty | one_club:N | bt_mixed:A,B | custom:P,P,...
    #[arg(long)]
    pub init: Option<String>,
    #[arg(long)]
    pub horizon: Option<f64>,
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub sample_dt: Option<f64>,
    /// Contacts per attempt under common chunk
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long)]
    pub warmup: Option<f64>,
    /// Stop once this many departures after warmup are seen
    #[arg(long)]
    pub stop_after: Option<usize>,
    #[arg(long)]
    pub population_cap: Option<usize>,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    #[command(flatten)]
    pub output: OutputArgs,
    /// Fit the population slope over this window, `lo:hi`
    #[arg(long)]
    pub slope_window: Option<String>,
}

#[derive(Args, Debug)]
pub struct BtArgs {
    /// TOML config file
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub k: Option<usize>,
    /// Arrivals per round
    #[arg(long, conflicts_with = "lambda")]
    pub arrivals: Option<usize>,
    /// Arrivals per second; converted to a per-round count
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Enable group suppression
    #[arg(long)]
    pub gs: bool,
    #[arg(long)]
    pub init: Option<String>,
    /// Horizon in seconds
    #[arg(long, conflicts_with = "rounds")]
    pub horizon: Option<f64>,
    #[arg(long)]
    pub rounds: Option<u64>,
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub neighbor_max: Option<usize>,
    #[arg(long)]
    pub tracker_topup_threshold: Option<usize>,
    #[arg(long)]
    pub tracker_response: Option<usize>,
    #[arg(long)]
    pub population_cap: Option<usize>,
    #[command(flatten)]
    pub output: OutputArgs,
    /// Fit the population slope over this window, `lo:hi` seconds
    #[arg(long)]
    pub slope_window: Option<String>,
}

#[derive(Args, Debug)]
pub struct SojournArgs {
    /// Comma-separated protocols; `cc:M` selects the contact count
    #[arg(long, default_value = "gs,dgs,waiting,ff,cc:5,cc:3")]
    pub protocols: String,
    #[arg(long, default_value = "25,50,100")]
    pub ks: String,
    #[arg(long, default_value_t = 6.0)]
    pub lambda: f64,
    #[arg(long, default_value_t = 1.0)]
    pub us: f64,
    #[arg(long, default_value_t = 1.0)]
    pub mu: f64,
    #[arg(long, default_value = "one_club:500")]
    pub init: String,
    #[arg(long, default_value_t = 2000.0)]
    pub warmup: f64,
    /// Departures counted per replication after warmup
    #[arg(long, default_value_t = 500)]
    pub departures: usize,
    #[arg(long, default_value_t = 20)]
    pub reps: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Hard time limit per replication
    #[arg(long, default_value_t = 20_000.0)]
    pub horizon: f64,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug)]
pub struct ConstantsArgs {
    /// Arrival rate, exact (`4`, `0.5`, `1/2`)
    #[arg(long)]
    pub lambda: String,
    /// Seed rate, exact
    #[arg(long)]
    pub us: String,
    /// Preset `c1,c3,c4`
    #[arg(long, default_value = "32,20,10")]
    pub preset: String,
    /// Print JSON instead of text
    #[arg(long)]
    pub json: bool,
}

#[derive(Args, Debug)]
pub struct ScanArgs {
    #[arg(long)]
    pub lambda: String,
    #[arg(long)]
    pub us: String,
    #[arg(long, default_value = "1")]
    pub mu: String,
    /// Preset `c1,c3,c4`
    #[arg(long, default_value = "32,20,10")]
    pub preset: String,
    /// `a:step:b` or a comma list
    #[arg(long, default_value = "100:50:2000")]
    pub shells: String,
    /// full | grid
    #[arg(long, default_value = "full")]
    pub mode: String,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    /// lambda | k
    #[arg(long)]
    pub param: String,
    /// Comma-separated values
    #[arg(long)]
    pub values: String,
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    #[command(flatten)]
    pub output: OutputArgs,
    /// Slope window `lo:hi`; defaults to the second half of the horizon
    #[arg(long)]
    pub slope_window: Option<String>,
}

#[derive(Args, Debug)]
pub struct PlotArgs {
    /// CSV whose first column is time
    #[arg(long)]
    pub input: PathBuf,
    /// Columns to draw
    #[arg(long, default_value = "population")]
    pub columns: String,
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long, default_value = "")]
    pub title: String,
}

/// Parse `args` (program name first) and run; returns the exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match commands::execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
