//! KL-penalized policy update and value regression.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::hyper::PpoHyperParams;
use super::rollout::RolloutBatch;
use crate::error::{Error, Result};
use crate::nn::gradcheck::{numeric_gradient, GradCheckReport};
use crate::nn::{gaussian_kl, gaussian_kl_grad, log_prob, log_prob_grad, Activations, Adam, Architecture, Network, Scalar};

/// Activations are recomputed instead of kept when a pass would hold more values than this.
const KEEP_ACTIVATIONS_BUDGET: usize = 1 << 25;

/// Value of the (minimized) policy loss and its parts.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PolicyObjective {
    /// `-surrogate + β·KL + ξ·hinge²`.
    pub loss: f64,
    /// Batch mean of `ratio · advantage`.
    pub surrogate: f64,
    /// Batch mean of KL(old ‖ new).
    pub kl: f64,
    /// `max(0, KL − hinge_multiplier·kl_target)`.
    pub hinge: f64,
}

fn chunks(n: usize, size: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..n).step_by(size.max(1)).map(move |s| (s, (s + size).min(n)))
}

fn activation_len(arch: &Architecture) -> usize {
    arch.input_len()
        + arch.frames * arch.beams
        + arch.conv1_len() * arch.conv1_filters
        + arch.flatten_len()
        + arch.fc1
        + arch.extras
        + arch.fc2
        + 2
}

/// Forward pass of the policy over a batch, ready to produce gradients.
pub struct PolicyPass<'a, F> {
    net: &'a Network<F>,
    batch: &'a RolloutBatch<F>,
    advantages: &'a [f64],
    beta: f64,
    hp: &'a PpoHyperParams,
    means: Vec<[f64; 2]>,
    kept: Option<Vec<Activations<F>>>,
    pub objective: PolicyObjective,
}

impl<'a, F: Scalar> PolicyPass<'a, F> {
    pub fn new(
        net: &'a Network<F>,
        batch: &'a RolloutBatch<F>,
        advantages: &'a [f64],
        beta: f64,
        hp: &'a PpoHyperParams,
    ) -> Result<Self> {
        let n = batch.len();
        assert_eq!(advantages.len(), n, "one advantage per transition");
        let d = batch.obs_dim;
        let keep = n * activation_len(&net.arch) <= KEEP_ACTIVATIONS_BUDGET;
        let mut kept = keep.then(Vec::new);
        let mut means = Vec::with_capacity(n);
        for (s, e) in chunks(n, hp.chunk_size) {
            let acts = net.forward(&batch.obs[s * d..e * d], e - s)?;
            means.extend(acts.out.chunks_exact(2).map(|m| [m[0].as_f64(), m[1].as_f64()]));
            if let Some(k) = kept.as_mut() {
                k.push(acts);
            }
        }
        let ls = net.log_std().map(|v| v.as_f64());
        let (mut surrogate, mut kl) = (0.0, 0.0);
        for t in 0..n {
            let ratio = (log_prob(means[t], ls, batch.actions[t]) - batch.log_probs[t]).exp();
            surrogate += ratio * advantages[t];
            kl += gaussian_kl(batch.old_means[t], batch.old_log_std, means[t], ls);
        }
        let inv = 1.0 / n.max(1) as f64;
        surrogate *= inv;
        kl *= inv;
        let hinge = (kl - hp.hinge_multiplier * hp.kl_target).max(0.0);
        let loss = -surrogate + beta * kl + hp.xi * hinge * hinge;
        if !(loss.is_finite() && kl.is_finite()) {
            let (mean_a, std_a) = mean_std(advantages);
            return Err(Error::NonFinite {
                context: "policy update",
                detail: format!(
                    "loss {loss}, kl {kl}, surrogate {surrogate} over {n} transitions; advantage mean {mean_a:.4e} std {std_a:.4e}; log_std {ls:?}"
                ),
            });
        }
        Ok(Self {
            net,
            batch,
            advantages,
            beta,
            hp,
            means,
            kept,
            objective: PolicyObjective { loss, surrogate, kl, hinge },
        })
    }

    /// Adds the loss gradient (network parameters and log-std) into `grads`.
    pub fn accumulate_gradient(&self, grads: &mut [F]) -> Result<()> {
        let (net, batch, hp) = (self.net, self.batch, self.hp);
        let n = batch.len();
        let d = batch.obs_dim;
        let inv = 1.0 / n.max(1) as f64;
        let ls = net.log_std().map(|v| v.as_f64());
        let kl_coeff = self.beta + 2.0 * hp.xi * self.objective.hinge;
        let mut d_ls = [0.0; 2];
        let mut d_means = vec![F::zero(); 2 * n];
        for t in 0..n {
            let m = self.means[t];
            let ratio = (log_prob(m, ls, batch.actions[t]) - batch.log_probs[t]).exp();
            let (lm, lls) = log_prob_grad(m, ls, batch.actions[t]);
            let (km, kls) = gaussian_kl_grad(batch.old_means[t], batch.old_log_std, m, ls);
            let w = -self.advantages[t] * ratio;
            for k in 0..2 {
                d_means[2 * t + k] = F::of(inv * (w * lm[k] + kl_coeff * km[k]));
                d_ls[k] += inv * (w * lls[k] + kl_coeff * kls[k]);
            }
        }
        for (c, (s, e)) in chunks(n, hp.chunk_size).enumerate() {
            let fresh;
            let acts = match &self.kept {
                Some(k) => &k[c],
                None => {
                    fresh = net.forward(&batch.obs[s * d..e * d], e - s)?;
                    &fresh
                }
            };
            net.backward(acts, &d_means[2 * s..2 * e], grads);
        }
        let range = net.log_std_spec().expect("policy network").range();
        for (g, v) in grads[range].iter_mut().zip(d_ls) {
            *g += F::of(v);
        }
        Ok(())
    }
}

/// Mean squared error of the value net against the batch returns; adds its
/// gradient into `grads` when given.
pub fn value_objective<F: Scalar>(net: &Network<F>, batch: &RolloutBatch<F>, hp: &PpoHyperParams, mut grads: Option<&mut [F]>) -> Result<f64> {
    let n = batch.len();
    let d = batch.obs_dim;
    let inv = 1.0 / n.max(1) as f64;
    let mut loss = 0.0;
    for (s, e) in chunks(n, hp.chunk_size) {
        let acts = net.forward(&batch.obs[s * d..e * d], e - s)?;
        let mut d_out = Vec::with_capacity(e - s);
        for (v, r) in acts.out.iter().zip(&batch.returns[s..e]) {
            let diff = v.as_f64() - r;
            loss += diff * diff * inv;
            d_out.push(F::of(2.0 * diff * inv));
        }
        if let Some(g) = grads.as_deref_mut() {
            net.backward(&acts, &d_out, g);
        }
    }
    if !loss.is_finite() {
        let (mean_r, std_r) = mean_std(&batch.returns);
        return Err(Error::NonFinite {
            context: "value update",
            detail: format!("loss {loss} over {n} transitions; return mean {mean_r:.4e} std {std_r:.4e}"),
        });
    }
    Ok(loss)
}

fn mean_std(x: &[f64]) -> (f64, f64) {
    let n = x.len().max(1) as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Zero-mean, unit-variance advantages (only centered when the spread vanishes).
pub fn standardize(x: &[f64]) -> Vec<f64> {
    let (mean, std) = mean_std(x);
    let scale = if std > 1e-8 { 1.0 / std } else { 1.0 };
    x.iter().map(|v| (v - mean) * scale).collect()
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct UpdateStats {
    /// KL(old ‖ new) measured at the final policy parameters.
    pub kl: f64,
    pub beta_before: f64,
    pub beta: f64,
    /// Policy optimizer steps taken.
    pub policy_epochs: usize,
    pub early_stop: bool,
    pub initial: PolicyObjective,
    pub last: PolicyObjective,
    pub value_loss_initial: f64,
    pub value_loss_final: f64,
}

/// One update: up to `policy_epochs` full-batch policy steps (stopping when KL
/// exceeds `break_multiplier·kl_target`), then `value_epochs` value steps, then
/// adaptation of the penalty coefficient.
///
/// Each epoch measures KL before stepping; an epoch whose KL is over the limit
/// is not applied.
#[allow(clippy::too_many_arguments)]
pub fn ppo_update<F: Scalar>(
    policy: &mut Network<F>,
    value: &mut Network<F>,
    policy_opt: &mut Adam<F>,
    value_opt: &mut Adam<F>,
    batch: &RolloutBatch<F>,
    beta: f64,
    hp: &PpoHyperParams,
) -> Result<UpdateStats> {
    let advantages = if hp.normalize_advantages {
        standardize(&batch.advantages)
    } else {
        batch.advantages.clone()
    };
    let mut stats = UpdateStats {
        beta_before: beta,
        ..Default::default()
    };
    let mut grads = vec![F::zero(); policy.param_count()];
    for epoch in 0..=hp.policy_epochs {
        let pass = PolicyPass::new(policy, batch, &advantages, beta, hp)?;
        if epoch == 0 {
            stats.initial = pass.objective;
        }
        stats.last = pass.objective;
        stats.kl = pass.objective.kl;
        if pass.objective.kl > hp.break_multiplier * hp.kl_target {
            stats.early_stop = true;
            break;
        }
        if epoch == hp.policy_epochs {
            break;
        }
        grads.iter_mut().for_each(|g| *g = F::zero());
        pass.accumulate_gradient(&mut grads)?;
        policy_opt.step(&mut policy.params.values, &grads, hp.lr_policy);
        stats.policy_epochs += 1;
    }

    let mut vgrads = vec![F::zero(); value.param_count()];
    for epoch in 0..hp.value_epochs {
        vgrads.iter_mut().for_each(|g| *g = F::zero());
        let loss = value_objective(value, batch, hp, Some(&mut vgrads))?;
        if epoch == 0 {
            stats.value_loss_initial = loss;
        }
        value_opt.step(&mut value.params.values, &vgrads, hp.lr_value);
    }
    stats.value_loss_final = value_objective(value, batch, hp, None)?;
    stats.beta = hp.adapt_beta(beta, stats.kl);
    Ok(stats)
}

/// Synthetic batch around a random small policy, for gradient and unit checks.
pub fn synthetic_batch(net: &Network<f64>, n: usize, rng: &mut ChaCha8Rng, kl_offset: f64) -> RolloutBatch<f64> {
    let d = net.arch.input_len();
    let obs: Vec<f64> = (0..n * d).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let out = net.forward(&obs, n).expect("synthetic batch shape").out;
    let ls = net.log_std();
    let old_ls = [ls[0] + kl_offset, ls[1] - kl_offset];
    let mut b = RolloutBatch {
        obs_dim: d,
        obs,
        actions: vec![],
        log_probs: vec![],
        old_means: vec![],
        old_log_std: old_ls,
        rewards: vec![0.0; n],
        values: vec![0.0; n],
        next_values: vec![0.0; n],
        dones: vec![true; n],
        segment: (0..n).collect(),
        advantages: (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect(),
        returns: (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect(),
        episodes: vec![],
    };
    for t in 0..n {
        let m = [out[2 * t] + kl_offset * rng.gen_range(-1.0..1.0), out[2 * t + 1] + kl_offset * rng.gen_range(-1.0..1.0)];
        let a = [m[0] + rng.gen_range(-0.5..0.5), m[1] + rng.gen_range(-0.5..0.5)];
        b.old_means.push(m);
        b.actions.push(a);
        b.log_probs.push(log_prob(m, old_ls, a));
    }
    b
}

/// Finite-difference check of the full policy loss (surrogate, KL penalty, hinge)
/// and of the value loss, over `instances` random small problems each.
pub fn objective_gradcheck(instances: usize, seed: u64) -> GradCheckReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = GradCheckReport::default();
    for i in 0..instances {
        let arch = Architecture {
            beams: rng.gen_range(10..=16),
            conv1_filters: 3,
            conv2_filters: 3,
            fc1: 6,
            fc2: 5,
            ..Architecture::default()
        };
        let hp = PpoHyperParams {
            chunk_size: 2,
            ..Default::default()
        };
        let beta = rng.gen_range(0.1..3.0);
        let mut policy = Network::<f64>::policy(arch.clone(), rng.gen()).unwrap();
        for v in policy.params.values.iter_mut() {
            *v += rng.gen_range(-0.3..0.3);
        }
        // Alternate between small and hinge-activating policy shifts.
        let offset = if i % 2 == 0 { 0.01 } else { 0.3 };
        let batch = synthetic_batch(&policy, rng.gen_range(1..=5), &mut rng, offset);
        let adv = batch.advantages.clone();

        let mut grads = vec![0.0; policy.param_count()];
        PolicyPass::new(&policy, &batch, &adv, beta, &hp)
            .unwrap()
            .accumulate_gradient(&mut grads)
            .unwrap();
        let mut probe = policy.clone();
        let mut x = policy.params.values.clone();
        let numeric = numeric_gradient(&mut x, |v| {
            probe.params.values.copy_from_slice(v);
            PolicyPass::new(&probe, &batch, &adv, beta, &hp).unwrap().objective.loss
        });
        report_merge(&mut report, "ppo policy loss", &grads, &numeric);

        let mut value = Network::<f64>::value(arch, rng.gen()).unwrap();
        for v in value.params.values.iter_mut() {
            *v += rng.gen_range(-0.3..0.3);
        }
        let mut vgrads = vec![0.0; value.param_count()];
        value_objective(&value, &batch, &hp, Some(&mut vgrads)).unwrap();
        let mut probe = value.clone();
        let mut x = value.params.values.clone();
        let numeric = numeric_gradient(&mut x, |v| {
            probe.params.values.copy_from_slice(v);
            value_objective(&probe, &batch, &hp, None).unwrap()
        });
        report_merge(&mut report, "ppo value loss", &vgrads, &numeric);
    }
    report
}

fn report_merge(report: &mut GradCheckReport, label: &str, analytic: &[f64], numeric: &[f64]) {
    let mut one = GradCheckReport {
        instances: 1,
        coordinates: analytic.len(),
        ..Default::default()
    };
    for (i, (&a, &n)) in analytic.iter().zip(numeric).enumerate() {
        let e = crate::nn::gradcheck::rel_error(a, n);
        if e > one.max_rel_error || e.is_nan() {
            one.max_rel_error = e;
            one.worst = format!("{label}[{i}]: analytic {a:e}, numeric {n:e}");
        }
    }
    report.merge(one);
}
