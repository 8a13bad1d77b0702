use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use mrca_core::eval::{evaluate, sweep, trajectory, Controller, EpisodeLog, MetricsReport, SweepPoint, TrialSettings};
use mrca_core::hybrid::{HybridConfig, LearnedPolicy};
use mrca_core::nn::{Architecture, Checkpoint, Scalar};
use mrca_core::ppo::{load_policy, PpoHyperParams, TrainConfig, Trainer};
use mrca_core::sim::ScenarioSpec;

use crate::config::{Precision, RunConfig};
use crate::{Common, EvalArgs, TrainArgs, Usage};

fn usage(msg: impl Into<String>) -> anyhow::Error {
    Usage(msg.into()).into()
}

fn base_config(c: &Common) -> anyhow::Result<RunConfig> {
    let mut cfg = match &c.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(o) = &c.out {
        cfg.out_dir = o.clone();
    }
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    if let Some(j) = c.jobs {
        cfg.jobs = j;
    }
    if let Some(p) = c.precision {
        cfg.precision = p;
    }
    Ok(cfg)
}

fn configure_threads(jobs: usize) {
    // Only the first call can size the global pool; later calls are no-ops.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global();
}

fn load_checkpoint(path: &Path) -> anyhow::Result<Checkpoint> {
    if !path.exists() {
        bail!("checkpoint {} does not exist", path.display());
    }
    Checkpoint::load(path).with_context(|| format!("loading checkpoint {}", path.display()))
}

pub fn train(a: &TrainArgs) -> anyhow::Result<()> {
    if let Some(path) = &a.resume {
        let mut cfg = base_config(&a.common)?;
        let ck = load_checkpoint(path)?;
        let stored: TrainConfig = serde_json::from_str(ck.text("config")?).context("checkpoint config")?;
        cfg.seed = stored.seed;
        cfg.train = stored;
        if let Some(n) = a.iterations {
            cfg.train.iterations = n;
        }
        if a.common.out.is_none() {
            cfg.out_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        }
        cfg.materialize()?;
        configure_threads(cfg.jobs);
        return match cfg.precision {
            Precision::F32 => run_training(Trainer::<f32>::resume(&ck)?, &cfg),
            Precision::F64 => run_training(Trainer::<f64>::resume(&ck)?, &cfg),
        };
    }

    let mut cfg = base_config(&a.common)?;
    if let Some(stage) = a.stage {
        let preset = match stage {
            1 => TrainConfig::stage1(),
            2 => TrainConfig::stage2(),
            s => return Err(usage(format!("--stage must be 1 or 2, got {s}"))),
        };
        cfg.train.stage = stage;
        cfg.train.hp.lr_policy = PpoHyperParams::for_stage(stage).lr_policy;
        cfg.train.scenarios = preset.scenarios;
    }
    if let Some(n) = a.iterations {
        cfg.train.iterations = n;
    }
    if let Some(b) = a.beams {
        cfg.train.arch.beams = b;
        cfg.train.sim.lidar.beam_count = b;
    }
    let init = match (cfg.train.stage, &a.init_from) {
        (2, None) => return Err(usage("stage 2 requires --init-from <stage-1 checkpoint>")),
        (_, Some(p)) => Some(load_checkpoint(p)?),
        _ => None,
    };
    cfg.materialize()?;
    configure_threads(cfg.jobs);
    cfg.echo(&cfg.out_dir)?;
    fn build<F: Scalar>(cfg: &RunConfig, init: Option<&Checkpoint>) -> anyhow::Result<Trainer<F>> {
        Ok(match init {
            Some(ck) => Trainer::init_from(cfg.train.clone(), ck)?,
            None => Trainer::new(cfg.train.clone())?,
        })
    }
    match cfg.precision {
        Precision::F32 => run_training(build::<f32>(&cfg, init.as_ref())?, &cfg),
        Precision::F64 => run_training(build::<f64>(&cfg, init.as_ref())?, &cfg),
    }
}

fn run_training<F: Scalar>(mut t: Trainer<F>, cfg: &RunConfig) -> anyhow::Result<()> {
    t.config.iterations = cfg.train.iterations;
    t.config.parallel = cfg.train.parallel;
    let out = &cfg.out_dir;
    cfg.echo(out)?;
    t.run(Some(out), |r| {
        println!(
            "iter {:>5}  steps {:>8}  reward {:>8.3}  arrival {:.2}  kl {:.2e}  beta {:.3}  {:.1}s",
            r.iteration, r.total_steps, r.mean_episode_reward, r.arrival_rate, r.kl, r.beta, r.wall_time
        )
    })?;
    println!("wrote {}", out.join("checkpoint_final.bin").display());
    Ok(())
}

fn eval_config(a: &EvalArgs) -> anyhow::Result<(RunConfig, Option<Checkpoint>)> {
    let mut cfg = base_config(&a.common)?;
    if let Some(c) = &a.controller {
        cfg.eval.controller = c.clone();
    }
    if !["learned", "hybrid", "scripted"].contains(&cfg.eval.controller.as_str()) {
        return Err(usage(format!(
            "unknown controller `{}` (expected learned, hybrid or scripted)",
            cfg.eval.controller
        )));
    }
    if let Some(p) = &a.profile {
        if !HybridConfig::PROFILES.contains(&p.as_str()) {
            return Err(usage(format!("unknown hybrid profile `{p}`")));
        }
        cfg.hybrid_profile = p.clone();
        cfg.hybrid = None;
    }
    if let Some(kind) = a.scenario {
        cfg.eval.scenarios = vec![ScenarioSpec {
            circle_radius: a.circle_radius,
            jitter: a.jitter,
            ..ScenarioSpec::new(kind, a.agents)
        }];
    }
    if let Some(n) = a.trials {
        cfg.eval.trials = n;
    }
    if let Some(k) = a.control_period {
        cfg.eval.control_period = k;
    }
    let ck = match (&a.checkpoint, cfg.eval.controller.as_str()) {
        (Some(p), _) => Some(load_checkpoint(p)?),
        (None, "scripted") => None,
        (None, c) => return Err(usage(format!("controller `{c}` needs --checkpoint"))),
    };
    if let (Some(ck), None) = (&ck, &a.common.config) {
        // Without a config file, network and simulator settings come from the checkpoint.
        let stored: TrainConfig = serde_json::from_str(ck.text("config")?).context("checkpoint config")?;
        cfg.train.arch = stored.arch;
        cfg.train.sim = stored.sim;
    }
    cfg.materialize()?;
    Ok((cfg, ck))
}

pub fn eval(a: &EvalArgs) -> anyhow::Result<()> {
    let (cfg, ck) = eval_config(a)?;
    configure_threads(cfg.jobs);
    match cfg.precision {
        Precision::F32 => eval_with::<f32>(&cfg, ck.as_ref(), a),
        Precision::F64 => eval_with::<f64>(&cfg, ck.as_ref(), a),
    }
}

fn eval_with<F: Scalar>(cfg: &RunConfig, ck: Option<&Checkpoint>, a: &EvalArgs) -> anyhow::Result<()> {
    let arch: &Architecture = &cfg.train.arch;
    let snapshot = ck.map(|ck| load_policy::<F>(ck, Some(arch))).transpose()?;
    let learned: Option<&dyn LearnedPolicy> = snapshot.as_ref().map(|s| s as &dyn LearnedPolicy);
    let controller = match (cfg.eval.controller.as_str(), learned) {
        ("learned", Some(p)) => Controller::Learned(p),
        ("hybrid", Some(p)) => Controller::Hybrid {
            learned: p,
            config: cfg.hybrid(),
            gains: &cfg.pid,
        },
        _ => Controller::Scripted,
    };
    let settings = TrialSettings {
        trials: cfg.eval.trials,
        control_period: cfg.eval.control_period,
        seed: cfg.seed,
        parallel: cfg.jobs > 1,
    };
    let sim = cfg.eval_sim();
    let out = &cfg.out_dir;
    cfg.echo(out)?;
    if let Some(protocol) = a.sweep {
        let grid = if a.grid.is_empty() { protocol.default_grid() } else { a.grid.clone() };
        let base = cfg.eval.scenarios.first().context("no evaluation scenario configured")?;
        let points = sweep(protocol, &grid, base, &sim, controller, &settings)?;
        println!("{}", MetricsReport::TABLE_HEADER);
        for p in &points {
            println!("{}", p.report.table_row());
        }
        write_sweep(out, controller.name(), &points)?;
        return Ok(());
    }
    println!("{}", MetricsReport::TABLE_HEADER);
    for spec in &cfg.eval.scenarios {
        let (report, logs) = evaluate(spec, &sim, controller, &settings)?;
        println!("{}", report.table_row());
        let stem = format!("{}-{}", report.scenario, report.controller);
        write_report(out, &stem, &report)?;
        if cfg.eval.save_logs {
            write_logs(out, &stem, &logs)?;
        }
    }
    Ok(())
}

fn write_report(dir: &Path, stem: &str, report: &MetricsReport) -> anyhow::Result<()> {
    let json = dir.join(format!("report-{stem}.json"));
    std::fs::write(&json, serde_json::to_string_pretty(report)?).with_context(|| format!("writing {}", json.display()))?;
    std::fs::write(dir.join(format!("report-{stem}.txt")), format!("{report}\n"))?;
    Ok(())
}

fn write_logs(dir: &Path, stem: &str, logs: &[EpisodeLog]) -> anyhow::Result<()> {
    let logs_dir = dir.join("logs");
    std::fs::create_dir_all(&logs_dir)?;
    for (k, log) in logs.iter().enumerate() {
        trajectory::save(log, &logs_dir.join(format!("{stem}-{k:03}.traj")))?;
    }
    Ok(())
}

fn write_sweep(dir: &Path, controller: &str, points: &[SweepPoint]) -> anyhow::Result<()> {
    let Some(first) = points.first() else { return Ok(()) };
    let stem = format!("sweep-{}-{controller}", first.protocol.as_str());
    std::fs::write(dir.join(format!("{stem}.json")), serde_json::to_string_pretty(points)?)?;
    for p in points {
        write_report(dir, &format!("{}-{}-{controller}", first.protocol.as_str(), p.value), &p.report)?;
    }
    Ok(())
}

pub fn plot(log: &Path, output: Option<&Path>) -> anyhow::Result<()> {
    let parsed = trajectory::load(log).with_context(|| format!("reading {}", log.display()))?;
    let out: PathBuf = output.map_or_else(|| log.with_extension("svg"), Path::to_path_buf);
    std::fs::write(&out, crate::plot::render(&parsed)).with_context(|| format!("writing {}", out.display()))?;
    println!("wrote {}", out.display());
    Ok(())
}

pub fn replay(log: &Path, from: Option<usize>, to: Option<usize>) -> anyhow::Result<()> {
    let parsed = trajectory::load(log).with_context(|| format!("reading {}", log.display()))?;
    let stdout = std::io::stdout();
    crate::replay::replay(&parsed, from, to, &mut stdout.lock()).map_err(|e| usage(e.to_string()))?;
    Ok(())
}
