//! Multi-agent episode engine: kinematics, observations, rewards and scenarios.

mod agent;
mod engine;
mod normalizer;
mod observation;
mod reward;
mod scenario;

pub use agent::{step_kinematics, Action, AgentState, AgentStatus, HISTORY_FRAMES};
pub use engine::{generate_scenario, step_world, AgentStep, SimConfig, WorldState};
pub use normalizer::{RunningNormalizer, MIN_VARIANCE, Z_CLIP};
pub use observation::{assemble_observation, ObservationFrame};
pub use reward::{compute_reward, RewardConfig, RewardTerms};
pub use scenario::{generate_layout, Layout, ScenarioKind, ScenarioSpec, CIRCLE_DENSITY};
