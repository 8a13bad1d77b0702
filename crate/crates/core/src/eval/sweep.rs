use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::episode::{run_episode, Controller, EpisodeLog};
use super::metrics::MetricsReport;
use crate::error::{Error, Result};
use crate::seed::derive_seed;
use crate::sim::{ScenarioKind, ScenarioSpec, SimConfig, WorldState};

/// Repetitions per scenario unless overridden.
pub const DEFAULT_TRIALS: usize = 50;

/// Repeated-trial evaluation of one scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrialSettings {
    pub trials: usize,
    /// Decision interval in simulator ticks.
    pub control_period: usize,
    pub seed: u64,
    /// Run trials on the rayon pool. Results do not depend on it.
    pub parallel: bool,
}

impl Default for TrialSettings {
    fn default() -> Self {
        Self {
            trials: DEFAULT_TRIALS,
            control_period: 1,
            seed: 0,
            parallel: false,
        }
    }
}

/// Scenario used by trial `k`: same layout parameters, private seed.
pub fn trial_spec(spec: &ScenarioSpec, seed: u64, k: usize) -> ScenarioSpec {
    spec.clone().with_seed(derive_seed(seed, &[30, k as u64]))
}

/// Runs `settings.trials` independent episodes of `spec`.
pub fn run_trials(spec: &ScenarioSpec, sim: &SimConfig, controller: Controller, settings: &TrialSettings) -> Result<Vec<EpisodeLog>> {
    spec.validate()?;
    if settings.trials == 0 {
        return Err(Error::Config("trial count must be positive".into()));
    }
    let one = |k: usize| -> Result<EpisodeLog> {
        let s = trial_spec(spec, settings.seed, k);
        let world = WorldState::from_scenario(&s, sim)?;
        run_episode(world, controller, settings.control_period, Some(&s))
    };
    if settings.parallel {
        (0..settings.trials).into_par_iter().map(one).collect()
    } else {
        (0..settings.trials).map(one).collect()
    }
}

/// Runs the trials and summarizes them.
pub fn evaluate(spec: &ScenarioSpec, sim: &SimConfig, controller: Controller, settings: &TrialSettings) -> Result<(MetricsReport, Vec<EpisodeLog>)> {
    let logs = run_trials(spec, sim, controller, settings)?;
    let label = format!("{}-{}", spec.kind.name(), spec.agents);
    Ok((MetricsReport::from_logs(controller.name(), &label, &logs), logs))
}

/// Robustness sweeps over one scenario parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepProtocol {
    /// Agent count in the 7×7 m open arena.
    Density,
    /// Agent radius, meters.
    Radius,
    /// Linear speed limit, m/s.
    Velocity,
    /// Decision interval, seconds.
    ControlPeriod,
}

impl SweepProtocol {
    pub const ALL: [SweepProtocol; 4] = [
        SweepProtocol::Density,
        SweepProtocol::Radius,
        SweepProtocol::Velocity,
        SweepProtocol::ControlPeriod,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SweepProtocol::Density => "density",
            SweepProtocol::Radius => "radius",
            SweepProtocol::Velocity => "velocity",
            SweepProtocol::ControlPeriod => "control_period",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|p| p.as_str() == s)
    }

    pub fn default_grid(self) -> Vec<f64> {
        match self {
            SweepProtocol::Density => vec![20.0, 30.0, 40.0, 50.0, 60.0],
            SweepProtocol::Radius => vec![0.12, 0.18, 0.24, 0.30, 0.36],
            SweepProtocol::Velocity => vec![1.0, 1.5, 2.0, 2.5, 3.0],
            SweepProtocol::ControlPeriod => vec![0.1, 0.2, 0.4, 0.6, 0.8, 1.0],
        }
    }

    /// Scenario and decision interval (ticks) for one grid value.
    pub fn configure(self, base: &ScenarioSpec, base_period: usize, dt: f64, value: f64) -> Result<(ScenarioSpec, usize)> {
        if !(value > 0.0 && value.is_finite()) {
            return Err(Error::Config(format!("{} grid values must be positive, got {value}", self.as_str())));
        }
        let mut spec = base.clone();
        let mut period = base_period;
        match self {
            SweepProtocol::Density => {
                if value.fract() != 0.0 {
                    return Err(Error::Config(format!("density grid holds agent counts, got {value}")));
                }
                spec.kind = ScenarioKind::RandomOpen;
                spec.agents = value as usize;
            }
            SweepProtocol::Radius => spec.agent_radius = value,
            SweepProtocol::Velocity => spec.v_max = value,
            SweepProtocol::ControlPeriod => period = ((value / dt).round() as usize).max(1),
        }
        Ok((spec, period))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub protocol: SweepProtocol,
    pub value: f64,
    pub report: MetricsReport,
}

/// Evaluates every grid point with the same trial seeds.
pub fn sweep(
    protocol: SweepProtocol,
    grid: &[f64],
    base: &ScenarioSpec,
    sim: &SimConfig,
    controller: Controller,
    settings: &TrialSettings,
) -> Result<Vec<SweepPoint>> {
    grid.iter()
        .map(|&value| {
            let (spec, period) = protocol.configure(base, settings.control_period, sim.dt, value)?;
            let s = TrialSettings {
                control_period: period,
                ..settings.clone()
            };
            let (mut report, _) = evaluate(&spec, sim, controller, &s)?;
            report.scenario = format!("{}={value}", protocol.as_str());
            Ok(SweepPoint { protocol, value, report })
        })
        .collect()
}
