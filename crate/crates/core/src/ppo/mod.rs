//! KL-penalized proximal policy optimization over parallel multi-agent rollouts.

mod gae;
mod hyper;
mod policy;
mod rollout;
mod train;
mod update;

pub use gae::{compute_gae, compute_returns, discounted_returns};
pub use hyper::{PpoHyperParams, STAGE1_LR_POLICY, STAGE2_LR_POLICY};
pub use policy::PolicySnapshot;
pub use rollout::{collect_rollouts, collect_rollouts_with, EpisodeSummary, RolloutBatch, WorldFactory};
pub use train::{curve, load_policy, read_normalizer, stage2_scenarios, IterationRecord, TrainConfig, Trainer, STAGE2_KINDS};
pub use update::{objective_gradcheck, ppo_update, standardize, synthetic_batch, value_objective, PolicyObjective, PolicyPass, UpdateStats};
