use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hybrid::{hybrid_act, HybridConfig, LearnedPolicy, PidGains, SubPolicyKind};
use crate::sim::{Action, AgentState, AgentStatus, ObservationFrame, RewardTerms, ScenarioSpec, WorldState};
use crate::world::{normalize_angle, ObstacleSet, Pose, Vec2};

/// Heading error below which the scripted controller drives.
const SCRIPTED_ALIGNED: f64 = 1e-3;

/// Who drives the agents during evaluation.
#[derive(Clone, Copy)]
pub enum Controller<'a> {
    /// Mean action of the learned policy.
    Learned(&'a dyn LearnedPolicy),
    Hybrid {
        learned: &'a dyn LearnedPolicy,
        config: &'a HybridConfig,
        gains: &'a PidGains,
    },
    /// Turn in place toward the goal, then drive straight at full speed.
    Scripted,
}

impl Controller<'_> {
    pub fn name(&self) -> &'static str {
        match self {
            Controller::Learned(_) => "learned",
            Controller::Hybrid { .. } => "hybrid",
            Controller::Scripted => "scripted",
        }
    }

    /// Command for one agent. Policy outputs live in the unit action box and are
    /// scaled to the agent's own limits.
    pub fn act(&self, obs: &ObservationFrame, agent: &AgentState, dt: f64) -> Result<(Action, Option<SubPolicyKind>)> {
        let scale = |a: Action| Action::new(a.v * agent.v_max, a.w * agent.w_max);
        match self {
            Controller::Learned(p) => Ok((scale(p.act(obs)?), None)),
            Controller::Hybrid { learned, config, gains } => {
                let g = PidGains {
                    v_max: agent.v_max,
                    w_max: agent.w_max,
                    ..(*gains).clone()
                };
                let (a, kind) = hybrid_act(obs, *learned, config, &g)?;
                let a = if kind == SubPolicyKind::Learned { scale(a) } else { a };
                Ok((a, Some(kind)))
            }
            Controller::Scripted => {
                let (d, bearing) = obs.goal_polar;
                let err = normalize_angle(bearing);
                let w = (err / dt).clamp(-agent.w_max, agent.w_max);
                let v = if err.abs() <= SCRIPTED_ALIGNED { agent.v_max.min(d / dt) } else { 0.0 };
                Ok((Action::new(v, w), None))
            }
        }
    }
}

/// Per-tick record of one agent. Index 0 of a trace is the spawn state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub pose: Pose,
    /// Command executed during the tick that ended here.
    pub action: Action,
    pub reward: RewardTerms,
    pub kind: Option<SubPolicyKind>,
    pub status: AgentStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentTrace {
    pub goal: Vec2,
    pub radius: f64,
    pub v_max: f64,
    pub w_max: f64,
    /// Entry `k` is the state after tick `k`, up to and including the terminal tick.
    pub steps: Vec<TraceStep>,
}

impl AgentTrace {
    pub fn start(&self) -> Vec2 {
        self.steps[0].pose.position
    }

    pub fn status(&self) -> AgentStatus {
        self.steps.last().expect("trace has a spawn entry").status
    }

    /// Tick at which the agent became terminal.
    pub fn end_tick(&self) -> Option<usize> {
        self.status().is_terminal().then(|| self.steps.len() - 1)
    }

    /// Length of the executed polyline.
    pub fn path_length(&self) -> f64 {
        self.steps
            .windows(2)
            .map(|w| w[0].pose.position.distance(w[1].pose.position))
            .sum()
    }

    pub fn total_reward(&self) -> f64 {
        self.steps.iter().map(|s| s.reward.total).sum()
    }
}

/// Everything needed to score and draw one episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeLog {
    pub scenario: Option<ScenarioSpec>,
    pub seed: u64,
    pub dt: f64,
    pub controller: String,
    pub obstacles: ObstacleSet,
    pub agents: Vec<AgentTrace>,
}

impl EpisodeLog {
    /// Ticks simulated.
    pub fn ticks(&self) -> usize {
        self.agents.iter().map(|a| a.steps.len() - 1).max().unwrap_or(0)
    }

    /// (tick, agent) of every collision, in tick order.
    pub fn collision_events(&self) -> Vec<(usize, usize)> {
        let mut ev: Vec<(usize, usize)> = self
            .agents
            .iter()
            .enumerate()
            .filter(|(_, a)| a.status() == AgentStatus::Collided)
            .map(|(i, a)| (a.steps.len() - 1, i))
            .collect();
        ev.sort_unstable();
        ev
    }
}

/// Steps `world` until every agent is terminal, deciding every `control_period`
/// ticks and holding the last command in between.
pub fn run_episode(mut world: WorldState, controller: Controller, control_period: usize, scenario: Option<&ScenarioSpec>) -> Result<EpisodeLog> {
    if control_period == 0 {
        return Err(Error::Config("control period must be at least one tick".into()));
    }
    let dt = world.config.dt;
    let mut agents: Vec<AgentTrace> = world
        .agents
        .iter()
        .map(|a| AgentTrace {
            goal: a.goal,
            radius: a.radius,
            v_max: a.v_max,
            w_max: a.w_max,
            steps: vec![TraceStep {
                pose: a.pose,
                action: Action::STOP,
                reward: RewardTerms::default(),
                kind: None,
                status: a.status,
            }],
        })
        .collect();
    let mut held: Vec<(Action, Option<SubPolicyKind>)> = vec![(Action::STOP, None); world.agents.len()];
    while !world.all_terminal() {
        let active = world.active_indices();
        if world.step.is_multiple_of(control_period) {
            for &i in &active {
                let obs = world.observe(i);
                held[i] = controller.act(&obs, &world.agents[i], dt).map_err(|e| episode_error(e, world.step))?;
            }
        }
        let actions: Vec<Action> = active.iter().map(|&i| held[i].0).collect();
        let results = world.step_world(&actions).map_err(|e| episode_error(e, world.step))?;
        for r in &results {
            let a = &world.agents[r.agent];
            if !a.pose.is_finite() {
                return Err(Error::NonFinite {
                    context: "episode",
                    detail: format!("agent {} pose {:?} at tick {}", r.agent, a.pose, world.step),
                });
            }
            agents[r.agent].steps.push(TraceStep {
                pose: a.pose,
                action: a.velocity,
                reward: r.reward,
                kind: held[r.agent].1,
                status: r.status,
            });
        }
    }
    Ok(EpisodeLog {
        scenario: scenario.cloned(),
        seed: scenario.map_or(0, |s| s.seed),
        dt,
        controller: controller.name().to_string(),
        obstacles: world.obstacles.clone(),
        agents,
    })
}

fn episode_error(e: Error, tick: usize) -> Error {
    Error::Episode {
        tick,
        source: Box::new(e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::SimConfig;
    use crate::world::LidarSpec;

    fn cfg() -> crate::sim::SimConfig {
        SimConfig {
            lidar: LidarSpec {
                beam_count: 32,
                ..LidarSpec::default()
            },
            ..SimConfig::default()
        }
    }

    fn world(agents: Vec<AgentState>) -> WorldState {
        WorldState::new(agents, ObstacleSet::new(), cfg(), 0).unwrap()
    }

    #[test]
    fn scripted_straight_line_arrives_on_time() {
        let a = AgentState::new(Pose::new(0.0, 0.0, 0.0), Vec2::new(5.0, 0.0), 0.12);
        let log = run_episode(world(vec![a]), Controller::Scripted, 1, None).unwrap();
        assert_eq!(log.agents[0].status(), AgentStatus::Arrived);
        let travel = log.agents[0].end_tick().unwrap() as f64 * log.dt;
        assert!((travel - 5.0).abs() <= log.dt + 1e-12, "travel {travel}");
    }

    #[test]
    fn head_on_scripted_agents_collide() {
        let agents = vec![
            AgentState::new(Pose::new(-1.0, 0.0, 0.0), Vec2::new(3.0, 0.0), 0.12),
            AgentState::new(Pose::new(1.0, 0.0, std::f64::consts::PI), Vec2::new(-3.0, 0.0), 0.12),
        ];
        let log = run_episode(world(agents), Controller::Scripted, 1, None).unwrap();
        assert!(log.agents.iter().all(|a| a.status() == AgentStatus::Collided));
        assert_eq!(log.collision_events().len(), 2);
    }

    #[test]
    fn held_actions_change_only_on_decision_ticks() {
        let a = AgentState::new(Pose::new(0.0, 0.0, 1.0), Vec2::new(5.0, 0.0), 0.12);
        let log = run_episode(world(vec![a]), Controller::Scripted, 4, None).unwrap();
        let steps = &log.agents[0].steps;
        for k in 1..steps.len() - 1 {
            if (k - 1) % 4 != 0 {
                assert_eq!(steps[k].action, steps[k - 1].action, "tick {k}");
            }
        }
    }

    #[test]
    fn zero_control_period_is_rejected() {
        let a = AgentState::new(Pose::default(), Vec2::new(1.0, 0.0), 0.12);
        assert!(run_episode(world(vec![a]), Controller::Scripted, 0, None).is_err());
    }
}
