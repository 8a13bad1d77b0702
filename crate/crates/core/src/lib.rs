//! Decentralized multi-robot collision avoidance from raw range scans.
//!
//! The crate is organized bottom-up:
//!
//! - [`world`]: planar geometry, simulated lidar and contact queries
//! - [`sim`]: differential-drive episodes, observations, rewards and scenarios
//! - [`nn`]: the policy and value networks with hand-written gradients, plus Adam
//! - [`ppo`]: rollout collection, advantage estimation and the KL-penalized update
//! - [`hybrid`]: scenario classification and the PID / safe / learned dispatcher
//! - [`eval`]: episode runner, benchmark metrics and parameter sweeps

pub mod error;
pub mod eval;
pub mod hybrid;
pub mod nn;
pub mod ppo;
pub mod seed;
pub mod sim;
pub mod world;

pub use error::{Error, Result};
