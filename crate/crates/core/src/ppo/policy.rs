use crate::error::Result;
use crate::nn::{Network, Scalar};
use crate::sim::{Action, ObservationFrame, RunningNormalizer};

/// Frozen policy plus the observation statistics it was trained with.
#[derive(Debug, Clone)]
pub struct PolicySnapshot<F> {
    pub net: Network<F>,
    pub normalizer: RunningNormalizer,
}

impl<F: Scalar> PolicySnapshot<F> {
    pub fn new(net: Network<F>, normalizer: RunningNormalizer) -> Self {
        Self { net, normalizer }
    }

    /// Distribution means for a batch of observations, normalized read-only.
    pub fn mean_actions(&self, frames: &[&ObservationFrame]) -> Result<Vec<Action>> {
        if frames.is_empty() {
            return Ok(Vec::new());
        }
        let mut x = Vec::with_capacity(frames.len() * self.net.arch.input_len());
        for f in frames {
            x.extend(self.normalizer.apply(&f.to_vec()).into_iter().map(F::of));
        }
        let out = self.net.forward(&x, frames.len())?.out;
        Ok(out.chunks_exact(2).map(|m| Action::new(m[0].as_f64(), m[1].as_f64())).collect())
    }

    pub fn mean_action(&self, frame: &ObservationFrame) -> Result<Action> {
        Ok(self.mean_actions(&[frame])?[0])
    }
}
