use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::gae::{compute_gae, compute_returns};
use super::hyper::PpoHyperParams;
use crate::error::{Error, Result};
use crate::nn::{sample_action, Network, Scalar};
use crate::seed::derive_seed;
use crate::sim::{Action, AgentStatus, AgentStep, RewardTerms, RunningNormalizer, ScenarioSpec, SimConfig, WorldState};

/// One finished agent-episode.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeSummary {
    pub env: usize,
    pub agent: usize,
    pub length: usize,
    /// Undiscounted sums of each reward term.
    pub reward: RewardTerms,
    pub status: AgentStatus,
}

/// Transitions of one iteration, stored contiguously per agent-episode segment.
#[derive(Debug, Clone)]
pub struct RolloutBatch<F> {
    pub obs_dim: usize,
    /// Normalized observations, `len() × obs_dim`.
    pub obs: Vec<F>,
    /// Unclipped sampled actions.
    pub actions: Vec<[f64; 2]>,
    pub log_probs: Vec<f64>,
    /// Behavior-policy means, for the KL term.
    pub old_means: Vec<[f64; 2]>,
    pub old_log_std: [f64; 2],
    pub rewards: Vec<f64>,
    pub values: Vec<f64>,
    pub next_values: Vec<f64>,
    /// Last transition of its segment.
    pub dones: Vec<bool>,
    /// Segment index of each transition.
    pub segment: Vec<usize>,
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
    /// Agent-episodes that ended (arrived, collided or timed out) during collection.
    pub episodes: Vec<EpisodeSummary>,
}

impl<F> RolloutBatch<F> {
    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    pub fn observation(&self, t: usize) -> &[F] {
        &self.obs[t * self.obs_dim..(t + 1) * self.obs_dim]
    }
}

struct Segment {
    env: usize,
    agent: usize,
    steps: Vec<usize>,
    reward: RewardTerms,
    /// Terminal status, or `None` while open / when cut by the collection budget.
    status: Option<AgentStatus>,
    /// Index into the bootstrap observation list for truncated ends.
    bootstrap: Option<usize>,
}

struct Env {
    world: WorldState,
    resets: u64,
    /// Open segment per agent.
    open: Vec<Option<usize>>,
}

/// Builds the world for environment `env` after `resets` previous resets.
pub type WorldFactory<'a> = dyn Fn(usize, u64) -> Result<WorldState> + Sync + 'a;

fn reset_env(factory: &WorldFactory, env: usize, resets: u64) -> Result<Env> {
    let world = factory(env, resets)?;
    let n = world.agents.len();
    Ok(Env {
        world,
        resets,
        open: vec![None; n],
    })
}

fn forward_chunked<F: Scalar>(net: &Network<F>, obs: &[F], n: usize, chunk: usize) -> Result<Vec<F>> {
    let d = net.arch.input_len();
    let mut out = Vec::with_capacity(n * net.outputs());
    let mut start = 0;
    while start < n {
        let end = (start + chunk).min(n);
        out.extend(net.forward(&obs[start * d..end * d], end - start)?.out);
        start = end;
    }
    Ok(out)
}

/// Runs the frozen policy in every environment in lockstep until more than
/// `hp.t_max` transitions are collected.
///
/// Every random draw (scenario layouts, action noise) derives from `seed`, and
/// normalization and sampling happen sequentially in environment/agent order, so
/// the batch does not depend on `parallel`.
#[allow(clippy::too_many_arguments)]
pub fn collect_rollouts<F: Scalar>(
    policy: &Network<F>,
    value: &Network<F>,
    normalizer: &mut RunningNormalizer,
    scenarios: &[ScenarioSpec],
    sim: &SimConfig,
    hp: &PpoHyperParams,
    seed: u64,
    parallel: bool,
) -> Result<RolloutBatch<F>> {
    if scenarios.is_empty() {
        return Err(Error::Config("rollout collection needs at least one scenario".into()));
    }
    let factory = |env: usize, resets: u64| {
        let spec = scenarios[env].clone().with_seed(derive_seed(seed, &[1, env as u64, resets]));
        WorldState::from_scenario(&spec, sim)
    };
    collect_rollouts_with(policy, value, normalizer, scenarios.len(), &factory, hp, seed, parallel)
}

/// [`collect_rollouts`] over `env_count` environments built by `factory`.
#[allow(clippy::too_many_arguments)]
pub fn collect_rollouts_with<F: Scalar>(
    policy: &Network<F>,
    value: &Network<F>,
    normalizer: &mut RunningNormalizer,
    env_count: usize,
    factory: &WorldFactory,
    hp: &PpoHyperParams,
    seed: u64,
    parallel: bool,
) -> Result<RolloutBatch<F>> {
    let d = policy.arch.input_len();
    if normalizer.dim() != d {
        return Err(Error::Shape {
            context: "observation normalizer",
            expected: vec![d],
            actual: vec![normalizer.dim()],
        });
    }
    let log_std = policy.log_std().map(|v| v.as_f64());
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[2]));
    let mut envs = (0..env_count)
        .map(|i| reset_env(factory, i, 0))
        .collect::<Result<Vec<_>>>()?;

    let mut obs: Vec<F> = Vec::new();
    let mut actions = Vec::new();
    let mut log_probs = Vec::new();
    let mut means = Vec::new();
    let mut rewards = Vec::new();
    let mut values = Vec::new();
    let mut segments: Vec<Segment> = Vec::new();
    let mut boot_obs: Vec<F> = Vec::new();

    loop {
        let mut rows: Vec<(usize, usize)> = Vec::new();
        let mut tick_obs: Vec<F> = Vec::new();
        for (e, env) in envs.iter().enumerate() {
            for i in env.world.active_indices() {
                let x = normalizer.normalize(&env.world.observe(i).to_vec(), true);
                tick_obs.extend(x.into_iter().map(F::of));
                rows.push((e, i));
            }
        }
        let n = rows.len();
        if n == 0 {
            return Err(Error::Config("no active agents in any environment".into()));
        }
        let mean_out = policy.forward(&tick_obs, n)?.out;
        let value_out = value.forward(&tick_obs, n)?.out;

        let base = rewards.len();
        let mut env_actions: Vec<Vec<Action>> = vec![Vec::new(); envs.len()];
        for (k, &(e, i)) in rows.iter().enumerate() {
            let mean = [mean_out[2 * k].as_f64(), mean_out[2 * k + 1].as_f64()];
            let (a, lp) = sample_action(mean, log_std, &mut rng);
            actions.push(a);
            log_probs.push(lp);
            means.push(mean);
            values.push(value_out[k].as_f64());
            rewards.push(0.0);
            env_actions[e].push(Action::new(a[0], a[1]));
            let seg = *envs[e].open[i].get_or_insert_with(|| {
                segments.push(Segment {
                    env: e,
                    agent: i,
                    steps: Vec::new(),
                    reward: RewardTerms::default(),
                    status: None,
                    bootstrap: None,
                });
                segments.len() - 1
            });
            segments[seg].steps.push(base + k);
        }
        obs.extend_from_slice(&tick_obs);

        let step = |(env, acts): (&mut Env, &Vec<Action>)| env.world.step_world(acts);
        let results: Vec<Result<Vec<AgentStep>>> = if parallel {
            envs.par_iter_mut().zip(env_actions.par_iter()).map(step).collect()
        } else {
            envs.iter_mut().zip(env_actions.iter()).map(step).collect()
        };

        let mut k = base;
        for (e, res) in results.into_iter().enumerate() {
            for s in res? {
                rewards[k] = s.reward.total;
                k += 1;
                let env = &mut envs[e];
                let seg = &mut segments[env.open[s.agent].expect("active agent has an open segment")];
                seg.reward.total += s.reward.total;
                seg.reward.goal += s.reward.goal;
                seg.reward.collision += s.reward.collision;
                seg.reward.rotation += s.reward.rotation;
                if s.done {
                    seg.status = Some(s.status);
                    if s.truncated {
                        boot_obs.extend(normalizer.apply(&s.observation.to_vec()).into_iter().map(F::of));
                        seg.bootstrap = Some(boot_obs.len() / d - 1);
                    }
                    env.open[s.agent] = None;
                }
            }
        }

        if rewards.len() > hp.t_max {
            break;
        }
        for (e, env) in envs.iter_mut().enumerate() {
            if env.world.all_terminal() {
                *env = reset_env(factory, e, env.resets + 1)?;
            }
        }
    }

    // Segments still running are cut by the budget and bootstrap from their current state.
    for env in &envs {
        for (i, open) in env.open.iter().enumerate() {
            if let Some(seg) = *open {
                boot_obs.extend(normalizer.apply(&env.world.observe(i).to_vec()).into_iter().map(F::of));
                segments[seg].bootstrap = Some(boot_obs.len() / d - 1);
            }
        }
    }
    let boot_values: Vec<f64> = forward_chunked(value, &boot_obs, boot_obs.len() / d, hp.chunk_size)?
        .into_iter()
        .map(|v| v.as_f64())
        .collect();

    let total = rewards.len();
    let mut batch = RolloutBatch {
        obs_dim: d,
        obs: Vec::with_capacity(total * d),
        actions: Vec::with_capacity(total),
        log_probs: Vec::with_capacity(total),
        old_means: Vec::with_capacity(total),
        old_log_std: log_std,
        rewards: Vec::with_capacity(total),
        values: Vec::with_capacity(total),
        next_values: Vec::with_capacity(total),
        dones: Vec::with_capacity(total),
        segment: Vec::with_capacity(total),
        advantages: Vec::new(),
        returns: Vec::new(),
        episodes: Vec::new(),
    };
    for (s, seg) in segments.iter().enumerate() {
        for (j, &t) in seg.steps.iter().enumerate() {
            batch.obs.extend_from_slice(&obs[t * d..(t + 1) * d]);
            batch.actions.push(actions[t]);
            batch.log_probs.push(log_probs[t]);
            batch.old_means.push(means[t]);
            batch.rewards.push(rewards[t]);
            batch.values.push(values[t]);
            batch.segment.push(s);
            let last = j + 1 == seg.steps.len();
            batch.dones.push(last);
            batch.next_values.push(if !last {
                values[seg.steps[j + 1]]
            } else {
                seg.bootstrap.map_or(0.0, |b| boot_values[b])
            });
        }
        if let Some(status) = seg.status {
            batch.episodes.push(EpisodeSummary {
                env: seg.env,
                agent: seg.agent,
                length: seg.steps.len(),
                reward: seg.reward,
                status,
            });
        }
    }
    batch.advantages = compute_gae(&batch.rewards, &batch.values, &batch.next_values, &batch.dones, hp.gamma, hp.lambda);
    batch.returns = compute_returns(&batch.rewards, &batch.next_values, &batch.dones, hp.gamma);
    if let Some(t) = batch.advantages.iter().chain(&batch.returns).position(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            context: "advantage estimation",
            detail: format!("entry {t} of {total} transitions"),
        });
    }
    Ok(batch)
}
