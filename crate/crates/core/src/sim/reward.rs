use serde::{Deserialize, Serialize};

use super::agent::AgentState;

/// Reward constants used during training.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardConfig {
    pub r_arrival: f64,
    /// Weight on goal-distance progress.
    pub w_goal: f64,
    pub r_collision: f64,
    /// Weight on |w| above the threshold (negative).
    pub w_rotation: f64,
    pub rotation_threshold: f64,
    pub arrival_radius: f64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self {
            r_arrival: 15.0,
            w_goal: 2.5,
            r_collision: -15.0,
            w_rotation: -0.1,
            rotation_threshold: 0.7,
            arrival_radius: 0.1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RewardTerms {
    pub total: f64,
    pub goal: f64,
    pub collision: f64,
    pub rotation: f64,
}

impl RewardTerms {
    pub fn new(goal: f64, collision: f64, rotation: f64) -> Self {
        Self {
            total: goal + collision + rotation,
            goal,
            collision,
            rotation,
        }
    }
}

/// Reward for one agent over one tick. `next.velocity` is the command executed.
pub fn compute_reward(prev: &AgentState, next: &AgentState, collided: bool, cfg: &RewardConfig) -> RewardTerms {
    let d_next = next.goal_distance();
    let goal = if d_next < cfg.arrival_radius {
        cfg.r_arrival
    } else {
        cfg.w_goal * (prev.goal_distance() - d_next)
    };
    let collision = if collided { cfg.r_collision } else { 0.0 };
    let w = next.velocity.w.abs();
    let rotation = if w > cfg.rotation_threshold {
        cfg.w_rotation * w
    } else {
        0.0
    };
    RewardTerms::new(goal, collision, rotation)
}
