//! Policy and value networks with hand-written reverse-mode gradients.

pub mod adam;
pub mod checkpoint;
pub mod gaussian;
pub mod gradcheck;
pub mod layers;
pub mod network;
pub mod params;
pub mod scalar;

pub use adam::Adam;
pub use checkpoint::{Checkpoint, EntryValue};
pub use gaussian::{gaussian_kl, gaussian_kl_grad, log_prob, log_prob_grad, mean_kl, sample_action};
pub use layers::{conv_out_len, Conv1d, Dense};
pub use network::{Activations, Architecture, HeadKind, Network, INITIAL_LOG_STD};
pub use params::{ParamStore, Tensor, TensorSpec};
pub use scalar::Scalar;
