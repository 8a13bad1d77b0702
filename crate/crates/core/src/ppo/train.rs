use std::fs::OpenOptions;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::hyper::PpoHyperParams;
use super::policy::PolicySnapshot;
use super::rollout::{collect_rollouts, RolloutBatch};
use super::update::{ppo_update, UpdateStats};
use crate::error::{Error, Result};
use crate::nn::{Adam, Architecture, Checkpoint, HeadKind, Network, Scalar};
use crate::seed::derive_seed;
use crate::sim::{AgentStatus, ObservationFrame, RunningNormalizer, ScenarioKind, ScenarioSpec, SimConfig};

/// Scenario kinds of the multi-scenario stage, in order.
pub const STAGE2_KINDS: [ScenarioKind; 7] = [
    ScenarioKind::RandomOpen,
    ScenarioKind::CrossingMaze,
    ScenarioKind::CorridorObstacles,
    ScenarioKind::Circle,
    ScenarioKind::Evac,
    ScenarioKind::Maze,
    ScenarioKind::RandomObstacles,
];

/// Splits `total` agents as evenly as possible over the stage-2 scenario kinds.
pub fn stage2_scenarios(total: usize) -> Vec<ScenarioSpec> {
    let k = STAGE2_KINDS.len();
    STAGE2_KINDS
        .iter()
        .enumerate()
        .map(|(i, &kind)| ScenarioSpec::new(kind, total / k + usize::from(i < total % k)))
        .filter(|s| s.agents > 0)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// Curriculum stage, 1 or 2.
    pub stage: u8,
    pub iterations: usize,
    pub seed: u64,
    /// Write a checkpoint every this many iterations (0: only at the end).
    pub checkpoint_every: usize,
    /// Step environments on the rayon pool.
    pub parallel: bool,
    pub arch: Architecture,
    pub sim: SimConfig,
    pub hp: PpoHyperParams,
    /// One environment per entry.
    pub scenarios: Vec<ScenarioSpec>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self::stage1()
    }
}

impl TrainConfig {
    pub fn stage1() -> Self {
        Self {
            stage: 1,
            iterations: 150,
            seed: 0,
            checkpoint_every: 10,
            parallel: false,
            arch: Architecture::default(),
            sim: SimConfig::default(),
            hp: PpoHyperParams::for_stage(1),
            scenarios: vec![ScenarioSpec::new(ScenarioKind::RandomOpen, 20)],
        }
    }

    pub fn stage2() -> Self {
        Self {
            stage: 2,
            hp: PpoHyperParams::for_stage(2),
            scenarios: stage2_scenarios(58),
            ..Self::stage1()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=2).contains(&self.stage) {
            return Err(Error::Config(format!("stage must be 1 or 2, got {}", self.stage)));
        }
        if self.scenarios.is_empty() {
            return Err(Error::Config("at least one training scenario is required".into()));
        }
        for s in &self.scenarios {
            s.validate()?;
        }
        if self.arch.beams != self.sim.lidar.beam_count {
            return Err(Error::Config(format!(
                "network expects {} beams but the lidar has {}",
                self.arch.beams, self.sim.lidar.beam_count
            )));
        }
        self.arch.validate()?;
        self.hp.validate()
    }
}

/// One line of the training curve.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    /// Transitions collected in this iteration.
    pub steps: usize,
    pub total_steps: u64,
    pub wall_time: f64,
    /// Agent-episodes finished in this iteration.
    pub episodes: usize,
    pub mean_episode_reward: f64,
    pub mean_goal_reward: f64,
    pub mean_collision_reward: f64,
    pub mean_rotation_reward: f64,
    pub arrival_rate: f64,
    pub kl: f64,
    /// Penalty coefficient after adaptation.
    pub beta: f64,
    pub lr_policy: f64,
    pub policy_epochs: usize,
    pub value_loss: f64,
}

impl IterationRecord {
    fn from_parts<F>(iteration: usize, total_steps: u64, wall_time: f64, batch: &RolloutBatch<F>, upd: &UpdateStats, lr: f64) -> Self {
        let n = batch.episodes.len();
        let mean = |f: &dyn Fn(&super::rollout::EpisodeSummary) -> f64| {
            if n == 0 {
                f64::NAN
            } else {
                batch.episodes.iter().map(f).sum::<f64>() / n as f64
            }
        };
        Self {
            iteration,
            steps: batch.len(),
            total_steps,
            wall_time,
            episodes: n,
            mean_episode_reward: mean(&|e| e.reward.total),
            mean_goal_reward: mean(&|e| e.reward.goal),
            mean_collision_reward: mean(&|e| e.reward.collision),
            mean_rotation_reward: mean(&|e| e.reward.rotation),
            arrival_rate: mean(&|e| f64::from(u8::from(e.status == AgentStatus::Arrived))),
            kl: upd.kl,
            beta: upd.beta,
            lr_policy: lr,
            policy_epochs: upd.policy_epochs,
            value_loss: upd.value_loss_final,
        }
    }
}

/// Append-only tab-separated training curve.
pub mod curve {
    use super::IterationRecord;
    use crate::error::{Error, Result};

    pub const HEADER: &str = "# mrca training curve v1";
    pub const COLUMNS: &str = "iteration\tsteps\ttotal_steps\twall_time\tepisodes\tmean_reward\tmean_goal\tmean_collision\tmean_rotation\tarrival_rate\tkl\tbeta\tlr_policy\tpolicy_epochs\tvalue_loss";

    pub fn format(r: &IterationRecord) -> String {
        format!(
            "{}\t{}\t{}\t{:.3}\t{}\t{}\t{}\t{}\t{}\t{}\t{:e}\t{:e}\t{:e}\t{}\t{}",
            r.iteration,
            r.steps,
            r.total_steps,
            r.wall_time,
            r.episodes,
            r.mean_episode_reward,
            r.mean_goal_reward,
            r.mean_collision_reward,
            r.mean_rotation_reward,
            r.arrival_rate,
            r.kl,
            r.beta,
            r.lr_policy,
            r.policy_epochs,
            r.value_loss
        )
    }

    pub fn parse(text: &str) -> Result<Vec<IterationRecord>> {
        let mut out = Vec::new();
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, l)) if l == HEADER => {}
            _ => return Err(Error::Config("training curve: missing version header".into())),
        }
        for (no, line) in lines {
            if line == COLUMNS || line.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split('\t').collect();
            let bad = || Error::Config(format!("training curve line {}: malformed record", no + 1));
            if f.len() != 15 {
                return Err(bad());
            }
            let num = |i: usize| f[i].parse::<f64>().map_err(|_| bad());
            let int = |i: usize| f[i].parse::<u64>().map_err(|_| bad());
            out.push(IterationRecord {
                iteration: int(0)? as usize,
                steps: int(1)? as usize,
                total_steps: int(2)?,
                wall_time: num(3)?,
                episodes: int(4)? as usize,
                mean_episode_reward: num(5)?,
                mean_goal_reward: num(6)?,
                mean_collision_reward: num(7)?,
                mean_rotation_reward: num(8)?,
                arrival_rate: num(9)?,
                kl: num(10)?,
                beta: num(11)?,
                lr_policy: num(12)?,
                policy_epochs: int(13)? as usize,
                value_loss: num(14)?,
            });
        }
        Ok(out)
    }
}

/// Mutable training state: networks, optimizers, normalizer and counters.
#[derive(Debug, Clone)]
pub struct Trainer<F> {
    pub config: TrainConfig,
    pub policy: Network<F>,
    pub value: Network<F>,
    pub policy_opt: Adam<F>,
    pub value_opt: Adam<F>,
    pub normalizer: RunningNormalizer,
    pub beta: f64,
    /// Completed iterations.
    pub iteration: usize,
    pub total_steps: u64,
}

impl<F: Scalar> Trainer<F> {
    pub fn new(config: TrainConfig) -> Result<Self> {
        config.validate()?;
        let policy = Network::policy(config.arch.clone(), derive_seed(config.seed, &[10]))?;
        let value = Network::value(config.arch.clone(), derive_seed(config.seed, &[11]))?;
        Ok(Self {
            policy_opt: Adam::new(policy.param_count()),
            value_opt: Adam::new(value.param_count()),
            normalizer: RunningNormalizer::new(ObservationFrame::flat_len(config.arch.beams)),
            beta: config.hp.beta_init,
            iteration: 0,
            total_steps: 0,
            policy,
            value,
            config,
        })
    }

    /// Starts a new stage from the networks and observation statistics of a
    /// previous one; optimizer state, β and counters start fresh.
    pub fn init_from(config: TrainConfig, ck: &Checkpoint) -> Result<Self> {
        let mut t = Self::new(config)?;
        t.policy = ck.network("policy", HeadKind::Policy, Some(&t.config.arch))?;
        t.value = ck.network("value", HeadKind::Value, Some(&t.config.arch))?;
        t.normalizer = read_normalizer(ck)?;
        Ok(t)
    }

    /// Restores the exact state saved by [`Trainer::checkpoint`].
    pub fn resume(ck: &Checkpoint) -> Result<Self> {
        let config: TrainConfig = serde_json::from_str(ck.text("config")?)
            .map_err(|e| Error::Checkpoint(format!("config: {e}")))?;
        let mut t = Self::new(config)?;
        t.policy = ck.network("policy", HeadKind::Policy, Some(&t.config.arch))?;
        t.value = ck.network("value", HeadKind::Value, Some(&t.config.arch))?;
        t.policy_opt = read_adam(ck, "policy_opt", t.policy.param_count())?;
        t.value_opt = read_adam(ck, "value_opt", t.value.param_count())?;
        t.normalizer = read_normalizer(ck)?;
        t.beta = ck.f64("beta")?;
        t.iteration = ck.u64("iteration")? as usize;
        t.total_steps = ck.u64("total_steps")?;
        Ok(t)
    }

    pub fn checkpoint(&self) -> Checkpoint {
        let mut ck = Checkpoint::new();
        ck.put_text("format", "mrca-train");
        ck.put_text("precision", F::NAME);
        ck.put_text("config", &serde_json::to_string(&self.config).expect("config serializes"));
        ck.put_network("policy", &self.policy);
        ck.put_network("value", &self.value);
        write_adam(&mut ck, "policy_opt", &self.policy_opt);
        write_adam(&mut ck, "value_opt", &self.value_opt);
        ck.put_u64s("normalizer.count", &[self.normalizer.count()]);
        ck.put_tensor("normalizer.mean", &[self.normalizer.dim()], self.normalizer.mean());
        ck.put_tensor("normalizer.m2", &[self.normalizer.dim()], self.normalizer.m2());
        ck.put_f64("beta", self.beta);
        ck.put_u64s("iteration", &[self.iteration as u64]);
        ck.put_u64s("total_steps", &[self.total_steps]);
        ck
    }

    pub fn snapshot(&self) -> PolicySnapshot<F> {
        PolicySnapshot::new(self.policy.clone(), self.normalizer.clone())
    }

    /// Collects one batch and updates both networks.
    pub fn step(&mut self) -> Result<IterationRecord> {
        let it = self.iteration;
        let wrap = |e: Error| Error::Iteration {
            iteration: it,
            source: Box::new(e),
        };
        let start = Instant::now();
        let cfg = &self.config;
        let batch = collect_rollouts(
            &self.policy,
            &self.value,
            &mut self.normalizer,
            &cfg.scenarios,
            &cfg.sim,
            &cfg.hp,
            derive_seed(cfg.seed, &[20, it as u64]),
            cfg.parallel,
        )
        .map_err(wrap)?;
        let upd = ppo_update(
            &mut self.policy,
            &mut self.value,
            &mut self.policy_opt,
            &mut self.value_opt,
            &batch,
            self.beta,
            &cfg.hp,
        )
        .map_err(wrap)?;
        self.beta = upd.beta;
        self.iteration += 1;
        self.total_steps += batch.len() as u64;
        Ok(IterationRecord::from_parts(
            it,
            self.total_steps,
            start.elapsed().as_secs_f64(),
            &batch,
            &upd,
            cfg.hp.lr_policy,
        ))
    }

    /// Trains until `config.iterations` iterations are complete. With `out_dir`
    /// set, appends to `curve.tsv` and writes `checkpoint_<iter>.bin` and
    /// `checkpoint_final.bin`.
    pub fn run(&mut self, out_dir: Option<&Path>, mut on_iteration: impl FnMut(&IterationRecord)) -> Result<Vec<IterationRecord>> {
        let mut log = match out_dir {
            Some(dir) => {
                std::fs::create_dir_all(dir)?;
                let path = dir.join("curve.tsv");
                let fresh = !path.exists() || std::fs::metadata(&path)?.len() == 0;
                let mut f = OpenOptions::new().create(true).append(true).open(&path)?;
                if fresh {
                    writeln!(f, "{}\n{}", curve::HEADER, curve::COLUMNS)?;
                }
                Some(f)
            }
            None => None,
        };
        let mut records = Vec::new();
        while self.iteration < self.config.iterations {
            let rec = self.step()?;
            if let Some(f) = log.as_mut() {
                writeln!(f, "{}", curve::format(&rec))?;
                f.flush()?;
            }
            on_iteration(&rec);
            records.push(rec);
            if let Some(dir) = out_dir {
                let every = self.config.checkpoint_every;
                if every > 0 && self.iteration.is_multiple_of(every) {
                    self.checkpoint().save(&dir.join(format!("checkpoint_{:05}.bin", self.iteration)))?;
                }
            }
        }
        if let Some(dir) = out_dir {
            self.checkpoint().save(&dir.join("checkpoint_final.bin"))?;
        }
        Ok(records)
    }
}

fn write_adam<F: Scalar>(ck: &mut Checkpoint, prefix: &str, opt: &Adam<F>) {
    ck.put_tensor(&format!("{prefix}.m"), &[opt.m.len()], &opt.m);
    ck.put_tensor(&format!("{prefix}.v"), &[opt.v.len()], &opt.v);
    ck.put_u64s(&format!("{prefix}.step"), &[opt.step]);
    ck.put_tensor(&format!("{prefix}.hyper"), &[3], &[opt.beta1, opt.beta2, opt.eps]);
}

fn read_adam<F: Scalar>(ck: &Checkpoint, prefix: &str, len: usize) -> Result<Adam<F>> {
    let mut opt = Adam::new(len);
    let (_, m) = ck.tensor::<F>(&format!("{prefix}.m"))?;
    let (_, v) = ck.tensor::<F>(&format!("{prefix}.v"))?;
    if m.len() != len || v.len() != len {
        return Err(Error::Shape {
            context: "optimizer state",
            expected: vec![len],
            actual: vec![m.len()],
        });
    }
    opt.m = m;
    opt.v = v;
    opt.step = ck.u64(&format!("{prefix}.step"))?;
    let (_, h) = ck.tensor::<f64>(&format!("{prefix}.hyper"))?;
    if let [b1, b2, eps] = h[..] {
        opt.beta1 = b1;
        opt.beta2 = b2;
        opt.eps = eps;
    }
    Ok(opt)
}

/// Reads the observation statistics stored in a training checkpoint.
pub fn read_normalizer(ck: &Checkpoint) -> Result<RunningNormalizer> {
    let (_, mean) = ck.tensor::<f64>("normalizer.mean")?;
    let (_, m2) = ck.tensor::<f64>("normalizer.m2")?;
    if mean.len() != m2.len() {
        return Err(Error::Checkpoint("normalizer mean and m2 differ in length".into()));
    }
    Ok(RunningNormalizer::from_parts(ck.u64("normalizer.count")?, mean, m2))
}

/// Loads the policy and its observation statistics from a training checkpoint.
pub fn load_policy<F: Scalar>(ck: &Checkpoint, expected: Option<&Architecture>) -> Result<PolicySnapshot<F>> {
    Ok(PolicySnapshot::new(ck.network("policy", HeadKind::Policy, expected)?, read_normalizer(ck)?))
}
