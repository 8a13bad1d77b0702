use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Training hyper-parameters. Defaults are the stage-1 values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PpoHyperParams {
    pub lambda: f64,
    pub gamma: f64,
    /// Minimum number of transitions per iteration.
    pub t_max: usize,
    pub policy_epochs: usize,
    pub value_epochs: usize,
    pub beta_init: f64,
    pub kl_target: f64,
    /// Weight of the quadratic hinge on large KL.
    pub xi: f64,
    pub lr_policy: f64,
    pub lr_value: f64,
    pub beta_high: f64,
    pub beta_low: f64,
    pub alpha: f64,
    /// Hinge threshold as a multiple of `kl_target`.
    pub hinge_multiplier: f64,
    /// Policy epochs stop once KL exceeds this multiple of `kl_target`.
    pub break_multiplier: f64,
    /// Standardize advantages per batch before the surrogate.
    pub normalize_advantages: bool,
    /// Samples per forward/backward chunk during updates (memory bound only).
    pub chunk_size: usize,
}

pub const STAGE1_LR_POLICY: f64 = 5e-5;
pub const STAGE2_LR_POLICY: f64 = 2e-5;

impl Default for PpoHyperParams {
    fn default() -> Self {
        Self {
            lambda: 0.95,
            gamma: 0.99,
            t_max: 8000,
            policy_epochs: 20,
            value_epochs: 10,
            beta_init: 1.0,
            kl_target: 15e-4,
            xi: 50.0,
            lr_policy: STAGE1_LR_POLICY,
            lr_value: 1e-3,
            beta_high: 2.0,
            beta_low: 0.5,
            alpha: 1.5,
            hinge_multiplier: 2.0,
            break_multiplier: 4.0,
            normalize_advantages: true,
            chunk_size: 1024,
        }
    }
}

impl PpoHyperParams {
    /// Defaults for curriculum stage 1 or 2 (only the policy learning rate differs).
    pub fn for_stage(stage: u8) -> Self {
        Self {
            lr_policy: if stage >= 2 { STAGE2_LR_POLICY } else { STAGE1_LR_POLICY },
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Config(format!("ppo: {what}")));
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return bad("gamma must lie in (0, 1]");
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return bad("lambda must lie in [0, 1]");
        }
        if self.t_max == 0 || self.policy_epochs == 0 || self.value_epochs == 0 || self.chunk_size == 0 {
            return bad("t_max, epoch counts and chunk_size must be positive");
        }
        let positive = [
            self.beta_init,
            self.kl_target,
            self.alpha,
            self.beta_high,
            self.beta_low,
            self.hinge_multiplier,
            self.break_multiplier,
        ];
        if positive.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return bad("beta_init, kl_target, alpha and the KL multipliers must be positive");
        }
        if !(self.xi >= 0.0 && self.lr_policy >= 0.0 && self.lr_value >= 0.0) {
            return bad("xi and learning rates must be non-negative");
        }
        Ok(())
    }

    /// Penalty adaptation after an update that measured `kl`.
    pub fn adapt_beta(&self, beta: f64, kl: f64) -> f64 {
        if kl > self.beta_high * self.kl_target {
            beta * self.alpha
        } else if kl < self.beta_low * self.kl_target {
            beta / self.alpha
        } else {
            beta
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn beta_transitions() {
        let hp = PpoHyperParams::default();
        let t = hp.kl_target;
        let cases = [(0.0, 1.0 / 1.5), (0.5, 1.0), (1.0, 1.0), (2.0, 1.0), (3.0, 1.5), (5.0, 1.5)];
        for (m, factor) in cases {
            assert_eq!(hp.adapt_beta(2.0, m * t), 2.0 * factor, "kl = {m}·target");
        }
    }

    #[test]
    fn stage_rates() {
        assert_eq!(PpoHyperParams::for_stage(1).lr_policy, 5e-5);
        assert_eq!(PpoHyperParams::for_stage(2).lr_policy, 2e-5);
        assert!(PpoHyperParams::default().validate().is_ok());
        let bad = PpoHyperParams { gamma: 0.0, ..Default::default() };
        assert!(bad.validate().is_err());
    }
}
