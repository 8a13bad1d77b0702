use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::world::{normalize_angle, Body, Pose, Vec2};

/// Number of lidar frames stacked into one observation.
pub const HISTORY_FRAMES: usize = 3;

/// Velocity command of a differential-drive robot.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Action {
    /// Translational velocity, m/s.
    pub v: f64,
    /// Rotational velocity, rad/s.
    pub w: f64,
}

impl Action {
    pub const STOP: Action = Action { v: 0.0, w: 0.0 };

    pub fn new(v: f64, w: f64) -> Self {
        Self { v, w }
    }

    /// Projects onto `v ∈ [0, v_max]`, `w ∈ [-w_max, w_max]`. Non-finite components become 0.
    pub fn clamped(self, v_max: f64, w_max: f64) -> Action {
        let fix = |x: f64| if x.is_finite() { x } else { 0.0 };
        Action {
            v: fix(self.v).clamp(0.0, v_max),
            w: fix(self.w).clamp(-w_max, w_max),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentStatus {
    Active,
    Arrived,
    Collided,
    TimedOut,
}

impl AgentStatus {
    pub fn is_terminal(self) -> bool {
        self != AgentStatus::Active
    }

    pub fn as_str(self) -> &'static str {
        match self {
            AgentStatus::Active => "active",
            AgentStatus::Arrived => "arrived",
            AgentStatus::Collided => "collided",
            AgentStatus::TimedOut => "timed_out",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "active" => AgentStatus::Active,
            "arrived" => AgentStatus::Arrived,
            "collided" => AgentStatus::Collided,
            "timed_out" => AgentStatus::TimedOut,
            _ => return None,
        })
    }
}

/// Ground-truth state of one disc robot.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentState {
    pub pose: Pose,
    /// Velocity executed during the last tick.
    pub velocity: Action,
    pub goal: Vec2,
    pub radius: f64,
    pub v_max: f64,
    pub w_max: f64,
    pub status: AgentStatus,
    /// Most recent scans, oldest first, at most [`HISTORY_FRAMES`].
    pub lidar_history: VecDeque<Vec<f64>>,
}

impl AgentState {
    pub fn new(pose: Pose, goal: Vec2, radius: f64) -> Self {
        Self {
            pose,
            velocity: Action::STOP,
            goal,
            radius,
            v_max: 1.0,
            w_max: 1.0,
            status: AgentStatus::Active,
            lidar_history: VecDeque::with_capacity(HISTORY_FRAMES),
        }
    }

    pub fn with_limits(mut self, v_max: f64, w_max: f64) -> Self {
        self.v_max = v_max;
        self.w_max = w_max;
        self
    }

    pub fn goal_distance(&self) -> f64 {
        self.pose.position.distance(self.goal)
    }

    pub fn is_active(&self) -> bool {
        self.status == AgentStatus::Active
    }

    /// Appends a scan; the first scan of an episode fills the whole history.
    pub fn push_scan(&mut self, scan: Vec<f64>) {
        if self.lidar_history.is_empty() {
            for _ in 1..HISTORY_FRAMES {
                self.lidar_history.push_back(scan.clone());
            }
        }
        self.lidar_history.push_back(scan);
        while self.lidar_history.len() > HISTORY_FRAMES {
            self.lidar_history.pop_front();
        }
    }

    pub fn latest_scan(&self) -> Option<&[f64]> {
        self.lidar_history.back().map(Vec::as_slice)
    }
}

impl Body for AgentState {
    fn center(&self) -> Vec2 {
        self.pose.position
    }
    fn radius(&self) -> f64 {
        self.radius
    }
}

/// Unicycle update: translate along the current heading, then rotate.
pub fn step_kinematics(pose: Pose, action: Action, dt: f64) -> Pose {
    let (s, c) = pose.heading.sin_cos();
    Pose {
        position: Vec2::new(
            pose.position.x + action.v * c * dt,
            pose.position.y + action.v * s * dt,
        ),
        heading: normalize_angle(pose.heading + action.w * dt),
    }
}
