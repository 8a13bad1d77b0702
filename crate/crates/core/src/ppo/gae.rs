//! Advantage and return estimation over flat, episode-segmented sequences.
//!
//! `dones[t]` marks the last transition of a segment. `next_values[t]` is
//! V(s_{t+1}): the next state's value inside a segment, the bootstrap value at a
//! truncated end, and 0 after a terminal transition.

/// Generalized advantage estimates.
pub fn compute_gae(rewards: &[f64], values: &[f64], next_values: &[f64], dones: &[bool], gamma: f64, lambda: f64) -> Vec<f64> {
    let n = rewards.len();
    assert!(values.len() == n && next_values.len() == n && dones.len() == n, "gae input lengths");
    let mut adv = vec![0.0; n];
    let mut running = 0.0;
    for t in (0..n).rev() {
        if dones[t] {
            running = 0.0;
        }
        let delta = rewards[t] + gamma * next_values[t] - values[t];
        running = delta + gamma * lambda * running;
        adv[t] = running;
    }
    adv
}

/// Discounted reward-to-go, bootstrapped with `next_values` at segment ends.
pub fn compute_returns(rewards: &[f64], next_values: &[f64], dones: &[bool], gamma: f64) -> Vec<f64> {
    let n = rewards.len();
    assert!(next_values.len() == n && dones.len() == n, "return input lengths");
    let mut ret = vec![0.0; n];
    let mut running = 0.0;
    for t in (0..n).rev() {
        if dones[t] {
            running = next_values[t];
        }
        running = rewards[t] + gamma * running;
        ret[t] = running;
    }
    ret
}

/// Reward-to-go of a single terminated episode.
pub fn discounted_returns(rewards: &[f64], gamma: f64) -> Vec<f64> {
    let n = rewards.len();
    let mut dones = vec![false; n];
    if let Some(last) = dones.last_mut() {
        *last = true;
    }
    compute_returns(rewards, &vec![0.0; n], &dones, gamma)
}
