//! Switching controller: PID in open space, the learned policy in complex
//! scenes, and a slowed-down learned policy when obstacles are close.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::Scalar;
use crate::ppo::PolicySnapshot;
use crate::sim::{Action, ObservationFrame};
use crate::world::normalize_angle;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubPolicyKind {
    Pid,
    Learned,
    Safe,
}

impl SubPolicyKind {
    pub const ALL: [SubPolicyKind; 3] = [SubPolicyKind::Pid, SubPolicyKind::Learned, SubPolicyKind::Safe];

    pub fn as_str(self) -> &'static str {
        match self {
            SubPolicyKind::Pid => "pid",
            SubPolicyKind::Learned => "learned",
            SubPolicyKind::Safe => "safe",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.as_str() == s)
    }
}

/// Classification radii and safe-policy limits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HybridConfig {
    /// Scans entirely beyond this range count as open space, meters.
    pub r_safe: f64,
    /// Any reading within this range triggers the safe policy, meters.
    pub r_risk: f64,
    /// Readings are divided by this before the safe policy consults the learned one.
    pub p_scale: f64,
    /// Speed bound of the safe policy.
    pub v_max_safe: f64,
}

impl Default for HybridConfig {
    fn default() -> Self {
        Self::paper()
    }
}

impl HybridConfig {
    pub const PROFILES: [&'static str; 2] = ["paper", "conservative"];

    /// The published radii: r_safe = 0.1 m, r_risk = 0.8 m.
    pub fn paper() -> Self {
        Self {
            r_safe: 0.1,
            r_risk: 0.8,
            p_scale: 1.25,
            v_max_safe: 0.5,
        }
    }

    /// Open space means nothing within 1.0 m; the safe policy takes over within 0.15 m.
    pub fn conservative() -> Self {
        Self {
            r_safe: 1.0,
            r_risk: 0.15,
            ..Self::paper()
        }
    }

    pub fn profile(name: &str) -> Result<Self> {
        match name {
            "paper" => Ok(Self::paper()),
            "conservative" => Ok(Self::conservative()),
            other => Err(Error::Config(format!(
                "unknown hybrid profile {other:?} (expected one of {:?})",
                Self::PROFILES
            ))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.r_safe, self.r_risk, self.p_scale, self.v_max_safe];
        if all.iter().all(|v| *v > 0.0 && v.is_finite()) {
            Ok(())
        } else {
            Err(Error::Config(format!("hybrid parameters must be positive: {self:?}")))
        }
    }
}

/// Goal-seeking controller gains.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PidGains {
    /// Proportional heading gain, 1/s.
    pub k_theta: f64,
    /// Derivative heading gain, s.
    pub k_d: f64,
    /// Integral heading gain (a static goal needs none).
    pub k_i: f64,
    /// Cruise speed per meter of goal distance, 1/s.
    pub k_v: f64,
    pub v_max: f64,
    pub w_max: f64,
    pub arrival_radius: f64,
}

impl Default for PidGains {
    fn default() -> Self {
        Self {
            k_theta: 2.0,
            k_d: 0.2,
            k_i: 0.0,
            k_v: 1.5,
            v_max: 1.0,
            w_max: 1.0,
            arrival_radius: 0.1,
        }
    }
}

/// Anything that maps an observation to an action.
pub trait LearnedPolicy: Sync {
    fn act(&self, obs: &ObservationFrame) -> Result<Action>;
}

impl<F: Scalar> LearnedPolicy for PolicySnapshot<F> {
    fn act(&self, obs: &ObservationFrame) -> Result<Action> {
        self.mean_action(obs)
    }
}

/// Adapts a closure into a [`LearnedPolicy`].
pub struct FnPolicy<T>(pub T);

impl<T: Fn(&ObservationFrame) -> Action + Sync> LearnedPolicy for FnPolicy<T> {
    fn act(&self, obs: &ObservationFrame) -> Result<Action> {
        Ok((self.0)(obs))
    }
}

/// Scene category from the newest scan and the goal distance.
pub fn classify(o_z: &[f64], goal_distance: f64, cfg: &HybridConfig) -> SubPolicyKind {
    assert!(!o_z.is_empty(), "classification needs at least one reading");
    let nearest = o_z.iter().copied().fold(f64::INFINITY, f64::min);
    if nearest > cfg.r_safe || nearest > goal_distance {
        SubPolicyKind::Pid
    } else if nearest <= cfg.r_risk {
        SubPolicyKind::Safe
    } else {
        SubPolicyKind::Learned
    }
}

/// Turn toward the goal and drive, slowing down near it.
///
/// For a static goal the heading error changes at `-w`, so the derivative term
/// `k_d·ė = -k_d·w` closes an algebraic loop, solved here in closed form:
/// `w = k_θ·e / (1 + k_d)`.
pub fn pid_policy(goal_polar: (f64, f64), gains: &PidGains) -> Action {
    let (d, bearing) = goal_polar;
    if d < gains.arrival_radius {
        return Action::STOP;
    }
    let err = normalize_angle(bearing);
    let w = (gains.k_theta * err / (1.0 + gains.k_d)).clamp(-gains.w_max, gains.w_max);
    let v = (gains.k_v * d).min(gains.v_max) * err.cos().max(0.0);
    Action::new(v, w)
}

/// Moves cautiously: stops when fast, otherwise asks the learned policy with
/// obstacles made to look closer and bounds its answer.
pub fn safe_policy(obs: &ObservationFrame, learned: &dyn LearnedPolicy, cfg: &HybridConfig) -> Result<Action> {
    if obs.velocity.0 > cfg.v_max_safe {
        return Ok(Action::STOP);
    }
    let mut scaled = obs.clone();
    for r in &mut scaled.lidar_stack {
        *r /= cfg.p_scale;
    }
    let a = learned.act(&scaled)?;
    let lim = cfg.v_max_safe;
    Ok(Action::new(a.v.clamp(0.0, lim), a.w.clamp(-lim, lim)))
}

/// Classifies the scene and runs the matching sub-policy.
pub fn hybrid_act(
    obs: &ObservationFrame,
    learned: &dyn LearnedPolicy,
    cfg: &HybridConfig,
    gains: &PidGains,
) -> Result<(Action, SubPolicyKind)> {
    let kind = classify(obs.latest_frame(), obs.goal_polar.0, cfg);
    let action = match kind {
        SubPolicyKind::Pid => pid_policy(obs.goal_polar, gains),
        SubPolicyKind::Safe => safe_policy(obs, learned, cfg)?,
        SubPolicyKind::Learned => learned.act(obs)?,
    };
    Ok((action, kind))
}
