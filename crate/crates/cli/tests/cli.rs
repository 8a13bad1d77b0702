use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use mrca_core::eval::trajectory;
use mrca_core::hybrid::SubPolicyKind;

fn mrca(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mrca")).args(args).output().expect("binary runs")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

const TINY: &str = r#"
seed = 3

[train]
iterations = 2
checkpoint_every = 1

[train.arch]
beams = 16

[train.sim]
max_steps = 40

[train.sim.lidar]
beam_count = 16

[train.hp]
t_max = 120
policy_epochs = 3
value_epochs = 2

[[train.scenarios]]
kind = "random_open"
agents = 4
"#;

fn write_tiny(dir: &Path) -> PathBuf {
    let p = dir.join("tiny.toml");
    std::fs::write(&p, TINY).unwrap();
    p
}

/// Scripted two-agent swap; returns the first trajectory log.
fn swap_log(dir: &Path) -> PathBuf {
    let out = dir.join("swap");
    let o = mrca(&[
        "eval", "--controller", "scripted", "--scenario", "group_swap", "--agents", "2", "--trials", "1", "--out", path(&out),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let logs: Vec<PathBuf> = std::fs::read_dir(out.join("logs")).unwrap().map(|e| e.unwrap().path()).collect();
    assert_eq!(logs.len(), 1);
    logs[0].clone()
}

fn parse_svg(text: &str) -> roxmltree::Document<'_> {
    roxmltree::Document::parse(text).expect("well-formed SVG")
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(mrca(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(mrca(&["eval", "--controller", "magic"]).status.code(), Some(1));
    let o = mrca(&["train", "--stage", "2"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("--init-from"));
    assert_eq!(mrca(&["--help"]).status.code(), Some(0));
}

#[test]
fn missing_stage_one_checkpoint_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.bin");
    let o = mrca(&["train", "--stage", "2", "--init-from", path(&missing), "--out", path(dir.path())]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains(path(&missing)), "{}", stderr(&o));
}

#[test]
fn training_is_reproducible_and_feeds_stage_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_tiny(dir.path());
    let run = |name: &str| {
        let out = dir.path().join(name);
        let o = mrca(&["train", "--config", path(&cfg), "--out", path(&out)]);
        assert!(o.status.success(), "{}", stderr(&o));
        out
    };
    let a = run("a");
    let b = run("b");
    for f in ["checkpoint_00001.bin", "checkpoint_final.bin"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
    let curve = std::fs::read_to_string(a.join("curve.tsv")).unwrap();
    assert_eq!(mrca_core::ppo::curve::parse(&curve).unwrap().len(), 2);

    // The echoed configuration reproduces the run.
    let echoed = a.join("config.toml");
    let c = dir.path().join("c");
    let o = mrca(&["train", "--config", path(&echoed), "--out", path(&c)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(
        std::fs::read(a.join("checkpoint_final.bin")).unwrap(),
        std::fs::read(c.join("checkpoint_final.bin")).unwrap()
    );

    let s2 = dir.path().join("s2");
    let init = a.join("checkpoint_final.bin");
    let o = mrca(&[
        "train", "--config", path(&cfg), "--stage", "2", "--init-from", path(&init), "--out", path(&s2), "--iterations", "1",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(s2.join("curve.tsv").exists());
    let echoed = std::fs::read_to_string(s2.join("config.toml")).unwrap();
    assert!(echoed.contains("stage = 2"));
}

#[test]
fn eval_writes_reports_and_rejects_wrong_architecture() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_tiny(dir.path());
    let train_out = dir.path().join("t");
    let o = mrca(&["train", "--config", path(&cfg), "--out", path(&train_out), "--iterations", "1"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let ck = train_out.join("checkpoint_final.bin");

    let ev = dir.path().join("ev");
    let o = mrca(&[
        "eval", "--checkpoint", path(&ck), "--controller", "hybrid", "--scenario", "circle", "--agents", "4", "--trials", "2",
        "--out", path(&ev),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(ev.join("report-circle-4-hybrid.json")).unwrap()).unwrap();
    for key in ["success_rate", "extra_time", "extra_distance", "average_speed", "failure_rate", "collision_rate", "stuck_rate", "trials"] {
        assert!(report.get(key).is_some(), "missing {key}");
    }
    assert_eq!(std::fs::read_dir(ev.join("logs")).unwrap().count(), 2);

    // The default configuration expects 512 beams.
    std::fs::write(dir.path().join("empty.toml"), "").unwrap();
    let o = mrca(&[
        "eval", "--config", path(&dir.path().join("empty.toml")), "--checkpoint", path(&ck), "--controller", "learned", "--trials", "1",
        "--out", path(&ev),
    ]);
    assert_eq!(o.status.code(), Some(2));
    let msg = stderr(&o);
    assert!(msg.contains("scan3x16") && msg.contains("scan3x512"), "{msg}");
}

#[test]
fn sweep_writes_one_report_per_grid_point() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sw");
    let o = mrca(&[
        "sweep", "density", "--controller", "scripted", "--grid", "2,3,4", "--trials", "1", "--out", path(&out),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let points: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("sweep-density-scripted.json")).unwrap()).unwrap();
    assert_eq!(points.as_array().unwrap().len(), 3);
}

#[test]
fn swap_plot_has_two_crossing_polylines() {
    let dir = tempfile::tempdir().unwrap();
    let log = swap_log(dir.path());
    let svg = dir.path().join("swap.svg");
    let o = mrca(&["plot", path(&log), "-o", path(&svg)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(&svg).unwrap();
    let doc = parse_svg(&text);
    let groups: Vec<_> = doc.descendants().filter(|n| n.attribute("class") == Some("trajectory")).collect();
    assert_eq!(groups.len(), 2);
    assert!(groups.iter().all(|g| g.children().any(|c| c.has_tag_name("line"))));
}

#[test]
fn hybrid_plot_uses_exactly_three_colors() {
    let dir = tempfile::tempdir().unwrap();
    let src = swap_log(dir.path());
    let mut log = trajectory::load(&src).unwrap();
    for a in &mut log.agents {
        let n = a.steps.len();
        for (k, s) in a.steps.iter_mut().enumerate() {
            s.kind = Some(SubPolicyKind::ALL[3 * k / n]);
        }
    }
    log.controller = "hybrid".into();
    let hybrid = dir.path().join("hybrid.traj");
    trajectory::save(&log, &hybrid).unwrap();
    let svg = dir.path().join("hybrid.svg");
    assert!(mrca(&["plot", path(&hybrid), "-o", path(&svg)]).status.success());
    let text = std::fs::read_to_string(&svg).unwrap();
    let doc = parse_svg(&text);
    let colors: std::collections::BTreeSet<&str> = doc
        .descendants()
        .filter(|n| n.attribute("class") == Some("trajectory"))
        .flat_map(|g| g.children().filter_map(|c| c.attribute("stroke")))
        .collect();
    assert_eq!(colors.into_iter().collect::<Vec<_>>(), vec!["#1f77b4", "#2ca02c", "#d62728"]);
}

#[test]
fn empty_log_plots_axes_only() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("empty.traj");
    std::fs::write(&log, format!("{}\ndt 0.1\nseed 0\ncontroller scripted\nscenario none\n", trajectory::HEADER)).unwrap();
    let svg = dir.path().join("empty.svg");
    assert!(mrca(&["plot", path(&log), "-o", path(&svg)]).status.success());
    let text = std::fs::read_to_string(&svg).unwrap();
    let doc = parse_svg(&text);
    assert!(doc.descendants().any(|n| n.attribute("class") == Some("axes")));
    assert!(!doc.descendants().any(|n| n.attribute("class") == Some("trajectory")));
}

#[test]
fn malformed_log_names_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("bad.traj");
    std::fs::write(&log, format!("{}\ndt 0.1\nseed zero\n", trajectory::HEADER)).unwrap();
    let o = mrca(&["plot", path(&log)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));
}

fn data_rows(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with("tick"))
        .map(|l| l.split('\t').map(str::to_string).collect())
        .collect()
}

#[test]
fn replay_windows_and_returns() {
    let dir = tempfile::tempdir().unwrap();
    let log_path = swap_log(dir.path());
    let log = trajectory::load(&log_path).unwrap();

    let o = mrca(&["replay", path(&log_path), "--from", "0", "--to", "0"]);
    assert!(o.status.success());
    let rows = data_rows(&stdout(&o));
    assert_eq!(rows.len(), 2);
    for (row, a) in rows.iter().zip(&log.agents) {
        let x: f64 = row[2].parse().unwrap();
        let y: f64 = row[3].parse().unwrap();
        assert!((x - a.start().x).abs() < 1e-4 && (y - a.start().y).abs() < 1e-4);
    }

    let o = mrca(&["replay", path(&log_path)]);
    assert!(o.status.success());
    let text = stdout(&o);
    let rows = data_rows(&text);
    let ticks: std::collections::BTreeSet<usize> = rows.iter().map(|r| r[0].parse().unwrap()).collect();
    assert_eq!(ticks.len(), log.ticks() + 1);
    for (i, a) in log.agents.iter().enumerate() {
        let sum: f64 = rows.iter().filter(|r| r[1] == i.to_string()).map(|r| r[7].parse::<f64>().unwrap()).sum();
        assert!((sum - a.total_reward()).abs() < 1e-9);
    }

    let past = (log.ticks() + 1).to_string();
    assert_eq!(mrca(&["replay", path(&log_path), "--to", &past]).status.code(), Some(1));
}
