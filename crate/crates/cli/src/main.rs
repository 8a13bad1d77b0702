//! `mrca`: train, evaluate, sweep, plot and replay.
//!
//! Exit status is 0 on success, 1 for usage errors and 2 for runtime failures.

mod commands;
mod config;
mod plot;
mod replay;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mrca_core::sim::ScenarioKind;

use config::Precision;

#[derive(Parser, Debug)]
#[command(name = "mrca", version, about = "Decentralized multi-robot collision avoidance workbench")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Options shared by every command that reads a run configuration.
#[derive(Args, Debug, Clone, Default)]
pub struct Common {
    /// TOML run configuration; defaults apply to anything it leaves out.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory (overrides `out_dir`).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads.
    #[arg(long)]
    pub jobs: Option<usize>,
    #[arg(long, value_enum)]
    pub precision: Option<Precision>,
}

#[derive(Args, Debug, Clone, Default)]
pub struct TrainArgs {
    #[command(flatten)]
    pub common: Common,
    /// Curriculum stage; switches to that stage's scenarios and learning rate.
    #[arg(long)]
    pub stage: Option<u8>,
    /// Stage-1 checkpoint to start stage 2 from.
    #[arg(long)]
    pub init_from: Option<PathBuf>,
    /// Continue an interrupted run from one of its checkpoints.
    #[arg(long, conflicts_with_all = ["init_from", "stage", "config"])]
    pub resume: Option<PathBuf>,
    #[arg(long)]
    pub iterations: Option<usize>,
    /// Lidar beams (network input width).
    #[arg(long)]
    pub beams: Option<usize>,
}

#[derive(Args, Debug, Clone, Default)]
pub struct EvalArgs {
    #[command(flatten)]
    pub common: Common,
    /// Training checkpoint holding the policy (not needed for `scripted`).
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// learned, hybrid or scripted.
    #[arg(long)]
    pub controller: Option<String>,
    /// Hybrid radii profile: paper or conservative.
    #[arg(long)]
    pub profile: Option<String>,
    /// Evaluate a single scenario of this kind instead of the configured list.
    #[arg(long, value_parser = parse_kind)]
    pub scenario: Option<ScenarioKind>,
    #[arg(long, default_value_t = 4)]
    pub agents: usize,
    /// Circle radius, meters (circle scenarios only; 0 derives it from the agent count).
    #[arg(long, default_value_t = 2.5)]
    pub circle_radius: f64,
    /// Spawn jitter, meters.
    #[arg(long, default_value_t = 0.1)]
    pub jitter: f64,
    #[arg(long)]
    pub trials: Option<usize>,
    /// Decision interval in simulator ticks.
    #[arg(long)]
    pub control_period: Option<usize>,
    /// Run a robustness sweep over this parameter.
    #[arg(long, value_parser = parse_protocol)]
    pub sweep: Option<mrca_core::eval::SweepProtocol>,
    /// Comma-separated sweep values (defaults to the protocol's grid).
    #[arg(long, value_delimiter = ',')]
    pub grid: Vec<f64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train the policy and value networks with PPO.
    Train(TrainArgs),
    /// Evaluate a controller over repeated trials.
    Eval(EvalArgs),
    /// Evaluate a controller across a parameter grid.
    Sweep {
        #[arg(value_parser = parse_protocol)]
        protocol: mrca_core::eval::SweepProtocol,
        #[command(flatten)]
        eval: EvalArgs,
    },
    /// Render a trajectory log as SVG.
    Plot {
        log: PathBuf,
        /// Output file (defaults to the log path with an .svg extension).
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Print the states recorded in a trajectory log.
    Replay {
        log: PathBuf,
        #[arg(long)]
        from: Option<usize>,
        #[arg(long)]
        to: Option<usize>,
    },
}

fn parse_kind(s: &str) -> Result<ScenarioKind, String> {
    ScenarioKind::ALL
        .into_iter()
        .find(|k| k.name() == s)
        .ok_or_else(|| format!("unknown scenario `{s}`"))
}

fn parse_protocol(s: &str) -> Result<mrca_core::eval::SweepProtocol, String> {
    mrca_core::eval::SweepProtocol::parse(s).ok_or_else(|| format!("unknown sweep protocol `{s}`"))
}

/// Error class that maps to exit status 1.
#[derive(Debug)]
pub struct Usage(pub String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Train(a) => commands::train(&a),
        Command::Eval(a) => commands::eval(&a),
        Command::Sweep { protocol, mut eval } => {
            eval.sweep = Some(protocol);
            commands::eval(&eval)
        }
        Command::Plot { log, output } => commands::plot(&log, output.as_deref()),
        Command::Replay { log, from, to } => commands::replay(&log, from, to),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<Usage>().is_some() {
                ExitCode::from(1)
            } else {
                ExitCode::from(2)
            }
        }
    }
}
