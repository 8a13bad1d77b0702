use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::agent::{step_kinematics, Action, AgentState, AgentStatus};
use super::observation::{assemble_observation, ObservationFrame};
use super::reward::{compute_reward, RewardConfig, RewardTerms};
use super::scenario::{generate_layout, ScenarioSpec};
use crate::error::{Error, Result};
use crate::world::{detect_collisions, raycast, CollisionEvent, LidarSpec, ObstacleSet, Vec2};

/// Simulator settings shared by every scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub lidar: LidarSpec,
    /// Tick length, seconds.
    pub dt: f64,
    /// Episode length limit in ticks.
    pub max_steps: usize,
    pub reward: RewardConfig,
    /// Standard deviation of additive Gaussian range noise, meters.
    pub range_noise: f64,
    /// Raycast agents on the rayon pool.
    pub parallel: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            lidar: LidarSpec::default(),
            dt: 0.1,
            max_steps: 1000,
            reward: RewardConfig::default(),
            range_noise: 0.0,
            parallel: false,
        }
    }
}

/// Outcome for one agent that was active at the start of a tick.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentStep {
    pub agent: usize,
    pub observation: ObservationFrame,
    pub reward: RewardTerms,
    /// The agent reached a terminal status this tick.
    pub done: bool,
    /// Terminal because of the time limit rather than arrival or collision.
    pub truncated: bool,
    pub status: AgentStatus,
}

/// Ground-truth state of one simulated episode.
#[derive(Debug, Clone)]
pub struct WorldState {
    pub agents: Vec<AgentState>,
    pub obstacles: ObstacleSet,
    pub config: SimConfig,
    /// Ticks elapsed since reset.
    pub step: usize,
    noise_rng: ChaCha8Rng,
}

impl WorldState {
    /// Builds a world and takes the initial scan for every agent.
    pub fn new(agents: Vec<AgentState>, obstacles: ObstacleSet, config: SimConfig, noise_seed: u64) -> Result<Self> {
        config.lidar.validate().map_err(Error::Config)?;
        obstacles.validate().map_err(Error::Config)?;
        if !(config.dt > 0.0) {
            return Err(Error::Config(format!("dt must be positive, got {}", config.dt)));
        }
        if let Some(a) = agents.iter().find(|a| !(a.radius > 0.0 && a.v_max > 0.0)) {
            return Err(Error::Config(format!(
                "agent radius and v_max must be positive, got {} and {}",
                a.radius, a.v_max
            )));
        }
        let mut world = Self {
            agents,
            obstacles,
            config,
            step: 0,
            noise_rng: ChaCha8Rng::seed_from_u64(noise_seed),
        };
        for a in &mut world.agents {
            a.lidar_history.clear();
        }
        let all: Vec<usize> = (0..world.agents.len()).collect();
        world.scan(&all);
        Ok(world)
    }

    /// Generates the scenario and wraps it in a world.
    pub fn from_scenario(spec: &ScenarioSpec, config: &SimConfig) -> Result<Self> {
        let layout = generate_layout(spec)?;
        Self::new(
            layout.agents,
            layout.obstacles,
            config.clone(),
            spec.seed ^ 0x05ee_d0fa_015e,
        )
    }

    pub fn active_indices(&self) -> Vec<usize> {
        (0..self.agents.len()).filter(|&i| self.agents[i].is_active()).collect()
    }

    pub fn all_terminal(&self) -> bool {
        self.agents.iter().all(|a| !a.is_active())
    }

    pub fn time(&self) -> f64 {
        self.step as f64 * self.config.dt
    }

    pub fn observe(&self, agent: usize) -> ObservationFrame {
        assemble_observation(&self.agents[agent])
    }

    /// Disc list of every agent except `skip`.
    fn others(&self, skip: usize) -> Vec<(Vec2, f64)> {
        self.agents
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != skip)
            .map(|(_, a)| (a.pose.position, a.radius))
            .collect()
    }

    /// Raycasts for the listed agents against the current snapshot and pushes the scans.
    fn scan(&mut self, which: &[usize]) {
        let lidar = self.config.lidar;
        let snapshot = &*self;
        let cast = |&i: &usize| {
            let a = &snapshot.agents[i];
            raycast(&a.pose, &lidar, &snapshot.obstacles, &snapshot.others(i))
        };
        let mut scans: Vec<Vec<f64>> = if self.config.parallel && which.len() > 1 {
            which.par_iter().map(cast).collect()
        } else {
            which.iter().map(cast).collect()
        };
        if self.config.range_noise > 0.0 {
            let noise = Normal::new(0.0, self.config.range_noise).expect("noise std is finite");
            for scan in &mut scans {
                for r in scan.iter_mut() {
                    *r = (*r + noise.sample(&mut self.noise_rng)).clamp(0.0, lidar.max_range);
                }
            }
        }
        for (&i, s) in which.iter().zip(scans) {
            self.agents[i].push_scan(s);
        }
    }

    /// Advances every active agent by one tick.
    ///
    /// `actions` holds one command per active agent, in agent-index order. Commands are
    /// clamped to each agent's velocity box. Terminal agents stay in place and keep
    /// occupying their disc.
    pub fn step_world(&mut self, actions: &[Action]) -> Result<Vec<AgentStep>> {
        let active = self.active_indices();
        if actions.len() != active.len() {
            return Err(Error::ActionCount {
                expected: active.len(),
                got: actions.len(),
            });
        }
        let dt = self.config.dt;
        let arrival_radius = self.config.reward.arrival_radius;
        let prev: Vec<AgentState> = active.iter().map(|&i| self.agents[i].clone()).collect();

        for (&i, act) in active.iter().zip(actions) {
            let a = &mut self.agents[i];
            if a.goal_distance() < arrival_radius {
                // Already at the goal: hold position.
                a.velocity = Action::STOP;
                continue;
            }
            let cmd = act.clamped(a.v_max, a.w_max);
            a.pose = step_kinematics(a.pose, cmd, dt);
            a.velocity = cmd;
        }
        self.step += 1;

        let mut collided = vec![false; self.agents.len()];
        for ev in detect_collisions(&self.agents, &self.obstacles) {
            match ev {
                CollisionEvent::Agents(i, j) => {
                    collided[i] = true;
                    collided[j] = true;
                }
                CollisionEvent::Obstacle(i) => collided[i] = true,
            }
        }

        let timeout = self.step >= self.config.max_steps;
        let mut results = Vec::with_capacity(active.len());
        for (k, &i) in active.iter().enumerate() {
            let hit = collided[i];
            let reward = compute_reward(&prev[k], &self.agents[i], hit, &self.config.reward);
            let a = &mut self.agents[i];
            let status = if hit {
                AgentStatus::Collided
            } else if a.goal_distance() < arrival_radius {
                AgentStatus::Arrived
            } else if timeout {
                AgentStatus::TimedOut
            } else {
                AgentStatus::Active
            };
            a.status = status;
            results.push((i, reward, status));
        }

        self.scan(&active);

        Ok(results
            .into_iter()
            .map(|(i, reward, status)| AgentStep {
                agent: i,
                observation: self.observe(i),
                reward,
                done: status.is_terminal(),
                truncated: status == AgentStatus::TimedOut,
                status,
            })
            .collect())
    }
}

/// Free-function form of [`WorldState::step_world`].
pub fn step_world(world: &mut WorldState, actions: &[Action]) -> Result<Vec<AgentStep>> {
    world.step_world(actions)
}

/// Generates a scenario instance ready for stepping.
pub fn generate_scenario(spec: &ScenarioSpec, config: &SimConfig) -> Result<WorldState> {
    WorldState::from_scenario(spec, config)
}
