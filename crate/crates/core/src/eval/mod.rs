//! Benchmark harness: episode runner, metrics, repeated trials, sweeps and trajectory logs.

mod episode;
mod metrics;
mod sweep;
pub mod trajectory;

pub use episode::{run_episode, AgentTrace, Controller, EpisodeLog, TraceStep};
pub use metrics::{average_speed, classify_failures, extra_distance, extra_time, FailureRates, MetricsReport, Stat};
pub use sweep::{evaluate, run_trials, sweep, trial_spec, SweepPoint, SweepProtocol, TrialSettings, DEFAULT_TRIALS};
