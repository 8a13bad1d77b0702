use serde::{Deserialize, Serialize};

use super::agent::{AgentState, HISTORY_FRAMES};

/// Partial observation of one agent: stacked scans, polar goal and own velocity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationFrame {
    /// `HISTORY_FRAMES` scans, oldest first, concatenated.
    pub lidar_stack: Vec<f64>,
    pub beam_count: usize,
    /// (distance, bearing relative to heading).
    pub goal_polar: (f64, f64),
    /// (v, w).
    pub velocity: (f64, f64),
}

impl ObservationFrame {
    /// Length of the flat vector for a given beam count.
    pub fn flat_len(beam_count: usize) -> usize {
        HISTORY_FRAMES * beam_count + 4
    }

    /// Flat layout: scans (frame-major), goal (d, angle), velocity (v, w).
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.lidar_stack.len() + 4);
        v.extend_from_slice(&self.lidar_stack);
        v.extend_from_slice(&[self.goal_polar.0, self.goal_polar.1, self.velocity.0, self.velocity.1]);
        v
    }

    pub fn frame(&self, k: usize) -> &[f64] {
        &self.lidar_stack[k * self.beam_count..(k + 1) * self.beam_count]
    }

    /// The newest scan.
    pub fn latest_frame(&self) -> &[f64] {
        self.frame(HISTORY_FRAMES - 1)
    }
}

/// Builds the observation from an agent's scan history and pose.
///
/// An empty history is a caller error; the engine always scans on reset.
pub fn assemble_observation(agent: &AgentState) -> ObservationFrame {
    let latest = agent
        .latest_scan()
        .expect("agent has no scan; reset the world before observing");
    let beam_count = latest.len();
    let mut lidar_stack = Vec::with_capacity(HISTORY_FRAMES * beam_count);
    // Short histories repeat the oldest frame at the front.
    let missing = HISTORY_FRAMES.saturating_sub(agent.lidar_history.len());
    for _ in 0..missing {
        lidar_stack.extend_from_slice(&agent.lidar_history[0]);
    }
    for frame in agent.lidar_history.iter().skip(agent.lidar_history.len().saturating_sub(HISTORY_FRAMES)) {
        lidar_stack.extend_from_slice(frame);
    }
    ObservationFrame {
        lidar_stack,
        beam_count,
        goal_polar: agent.pose.polar_of(agent.goal),
        velocity: (agent.velocity.v, agent.velocity.w),
    }
}
