//! Run configuration file (TOML).
//!
//! Every field has a default, so an empty file is valid. The fully resolved
//! configuration is written next to each command's outputs as `config.toml`
//! and can be passed back with `--config` to repeat the run.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use mrca_core::hybrid::{HybridConfig, PidGains};
use mrca_core::ppo::TrainConfig;
use mrca_core::sim::{ScenarioSpec, SimConfig};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    F32,
    F64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    /// `learned`, `hybrid` or `scripted`.
    pub controller: String,
    pub trials: usize,
    /// Decision interval in simulator ticks.
    pub control_period: usize,
    /// Episode length limit during evaluation, ticks.
    pub max_steps: usize,
    /// Write one trajectory log per episode.
    pub save_logs: bool,
    pub scenarios: Vec<ScenarioSpec>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            controller: "hybrid".into(),
            trials: mrca_core::eval::DEFAULT_TRIALS,
            control_period: 1,
            max_steps: 1000,
            save_logs: true,
            scenarios: vec![ScenarioSpec {
                jitter: 0.1,
                ..ScenarioSpec::circle(4, 2.5)
            }],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub precision: Precision,
    /// Worker threads; 1 runs everything on the calling thread.
    pub jobs: usize,
    pub out_dir: PathBuf,
    /// Named hybrid radii used when `[hybrid]` is absent.
    pub hybrid_profile: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hybrid: Option<HybridConfig>,
    pub pid: PidGains,
    pub train: TrainConfig,
    pub eval: EvalConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            precision: Precision::F32,
            jobs: 1,
            out_dir: PathBuf::from("runs/default"),
            hybrid_profile: "paper".into(),
            hybrid: None,
            pid: PidGains::default(),
            train: TrainConfig::stage1(),
            eval: EvalConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    /// Fills derived values and checks the result.
    pub fn materialize(&mut self) -> anyhow::Result<()> {
        if self.jobs == 0 {
            bail!("jobs must be at least 1");
        }
        if self.hybrid.is_none() {
            self.hybrid = Some(HybridConfig::profile(&self.hybrid_profile)?);
        }
        self.hybrid().validate()?;
        self.train.seed = self.seed;
        self.train.parallel = self.jobs > 1;
        self.train.sim.parallel = false;
        self.train.validate()?;
        if self.eval.trials == 0 || self.eval.control_period == 0 || self.eval.max_steps == 0 {
            bail!("eval trials, control_period and max_steps must be positive");
        }
        for s in &self.eval.scenarios {
            s.validate()?;
        }
        Ok(())
    }

    pub fn hybrid(&self) -> &HybridConfig {
        self.hybrid.as_ref().expect("materialized")
    }

    /// Simulator settings for evaluation episodes.
    pub fn eval_sim(&self) -> SimConfig {
        SimConfig {
            max_steps: self.eval.max_steps,
            ..self.train.sim.clone()
        }
    }

    pub fn to_toml(&self) -> anyhow::Result<String> {
        Ok(toml::to_string(self)?)
    }

    /// Writes the resolved configuration to `<dir>/config.toml`.
    pub fn echo(&self, dir: &Path) -> anyhow::Result<()> {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let path = dir.join("config.toml");
        std::fs::write(&path, self.to_toml()?).with_context(|| format!("writing {}", path.display()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let mut c: RunConfig = toml::from_str("").unwrap();
        assert_eq!(c, RunConfig::default());
        c.materialize().unwrap();
        assert_eq!(c.hybrid(), &HybridConfig::paper());
    }

    #[test]
    fn materialized_config_round_trips() {
        let mut c = RunConfig {
            hybrid_profile: "conservative".into(),
            seed: 17,
            ..RunConfig::default()
        };
        c.materialize().unwrap();
        let back: RunConfig = toml::from_str(&c.to_toml().unwrap()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.train.seed, 17);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(toml::from_str::<RunConfig>("sede = 3").is_err());
        assert!(toml::from_str::<RunConfig>("[train.hp]\nlamda = 0.9").is_err());
    }
}
