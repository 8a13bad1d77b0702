//! Diagonal Gaussian action distribution with an observation-independent log-std.

use rand::Rng;
use rand_distr::StandardNormal;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Log density of `action` summed over components.
pub fn log_prob<const N: usize>(mean: [f64; N], log_std: [f64; N], action: [f64; N]) -> f64 {
    (0..N)
        .map(|i| {
            let z = (action[i] - mean[i]) * (-log_std[i]).exp();
            -0.5 * z * z - log_std[i] - 0.5 * LN_2PI
        })
        .sum()
}

/// Gradient of [`log_prob`] w.r.t. the mean and the log-std.
pub fn log_prob_grad<const N: usize>(mean: [f64; N], log_std: [f64; N], action: [f64; N]) -> ([f64; N], [f64; N]) {
    let mut dm = [0.0; N];
    let mut ds = [0.0; N];
    for i in 0..N {
        let inv_var = (-2.0 * log_std[i]).exp();
        let diff = action[i] - mean[i];
        dm[i] = diff * inv_var;
        ds[i] = diff * diff * inv_var - 1.0;
    }
    (dm, ds)
}

/// Draws `mean + exp(log_std)·z` per component and returns it with its log density.
pub fn sample_action<const N: usize, R: Rng + ?Sized>(mean: [f64; N], log_std: [f64; N], rng: &mut R) -> ([f64; N], f64) {
    let mut a = [0.0; N];
    for i in 0..N {
        let z: f64 = rng.sample(StandardNormal);
        a[i] = mean[i] + log_std[i].exp() * z;
    }
    (a, log_prob(mean, log_std, a))
}

/// KL(old ‖ new) for diagonal Gaussians, summed over components.
pub fn gaussian_kl<const N: usize>(old_mean: [f64; N], old_log_std: [f64; N], new_mean: [f64; N], new_log_std: [f64; N]) -> f64 {
    (0..N)
        .map(|i| {
            let var_old = (2.0 * old_log_std[i]).exp();
            let var_new = (2.0 * new_log_std[i]).exp();
            let dm = old_mean[i] - new_mean[i];
            new_log_std[i] - old_log_std[i] + (var_old + dm * dm) / (2.0 * var_new) - 0.5
        })
        .sum()
}

/// Gradient of [`gaussian_kl`] w.r.t. the new mean and new log-std.
pub fn gaussian_kl_grad<const N: usize>(
    old_mean: [f64; N],
    old_log_std: [f64; N],
    new_mean: [f64; N],
    new_log_std: [f64; N],
) -> ([f64; N], [f64; N]) {
    let mut dm = [0.0; N];
    let mut ds = [0.0; N];
    for i in 0..N {
        let var_old = (2.0 * old_log_std[i]).exp();
        let inv_var_new = (-2.0 * new_log_std[i]).exp();
        let diff = new_mean[i] - old_mean[i];
        dm[i] = diff * inv_var_new;
        ds[i] = 1.0 - (var_old + diff * diff) * inv_var_new;
    }
    (dm, ds)
}

/// Batch-average KL between per-state distributions sharing one log-std each.
pub fn mean_kl(old_means: &[[f64; 2]], old_log_std: [f64; 2], new_means: &[[f64; 2]], new_log_std: [f64; 2]) -> f64 {
    assert_eq!(old_means.len(), new_means.len());
    if old_means.is_empty() {
        return 0.0;
    }
    let total: f64 = old_means
        .iter()
        .zip(new_means)
        .map(|(o, n)| gaussian_kl(*o, old_log_std, *n, new_log_std))
        .sum();
    total / old_means.len() as f64
}
