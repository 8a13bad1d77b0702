//! Line-oriented trajectory log.
//!
//! ```text
//! # mrca trajectory v1
//! dt 0.1
//! seed 42
//! controller hybrid
//! scenario {"kind":"circle","agents":4,...}      (or `scenario none`)
//! obstacle segment <ax> <ay> <bx> <by>
//! obstacle disc <cx> <cy> <r>
//! obstacle box <min_x> <min_y> <max_x> <max_y>
//! agent <id> <goal_x> <goal_y> <radius> <v_max> <w_max>
//! step <tick> <agent> <x> <y> <heading> <v> <w> <r_total> <r_goal> <r_collision> <r_rotation> <kind> <status>
//! ```
//!
//! Step records are sorted by tick, then agent. Tick 0 holds the spawn state;
//! an agent has records up to its terminal tick. `kind` is `pid`, `learned`,
//! `safe` or `-`. Floats use the shortest representation that parses back to
//! the same value, so a write/read cycle is lossless.

use std::fmt::Write as _;
use std::path::Path;

use super::episode::{AgentTrace, EpisodeLog, TraceStep};
use crate::error::{Error, Result};
use crate::hybrid::SubPolicyKind;
use crate::sim::{Action, AgentStatus, RewardTerms, ScenarioSpec};
use crate::world::{AaBox, Disc, ObstacleSet, Pose, Segment, Vec2};

pub const HEADER: &str = "# mrca trajectory v1";

pub fn format(log: &EpisodeLog) -> String {
    let mut out = String::new();
    let scenario = match &log.scenario {
        Some(s) => serde_json::to_string(s).expect("scenario serializes"),
        None => "none".into(),
    };
    writeln!(out, "{HEADER}").unwrap();
    writeln!(out, "dt {}", log.dt).unwrap();
    writeln!(out, "seed {}", log.seed).unwrap();
    writeln!(out, "controller {}", log.controller).unwrap();
    writeln!(out, "scenario {scenario}").unwrap();
    for s in &log.obstacles.segments {
        writeln!(out, "obstacle segment {} {} {} {}", s.a.x, s.a.y, s.b.x, s.b.y).unwrap();
    }
    for d in &log.obstacles.discs {
        writeln!(out, "obstacle disc {} {} {}", d.center.x, d.center.y, d.radius).unwrap();
    }
    for b in &log.obstacles.boxes {
        writeln!(out, "obstacle box {} {} {} {}", b.min.x, b.min.y, b.max.x, b.max.y).unwrap();
    }
    for (i, a) in log.agents.iter().enumerate() {
        writeln!(out, "agent {i} {} {} {} {} {}", a.goal.x, a.goal.y, a.radius, a.v_max, a.w_max).unwrap();
    }
    let ticks = log.agents.iter().map(|a| a.steps.len()).max().unwrap_or(0);
    for t in 0..ticks {
        for (i, a) in log.agents.iter().enumerate() {
            let Some(s) = a.steps.get(t) else { continue };
            let kind = s.kind.map_or("-", |k| k.as_str());
            writeln!(
                out,
                "step {t} {i} {} {} {} {} {} {} {} {} {} {kind} {}",
                s.pose.position.x,
                s.pose.position.y,
                s.pose.heading,
                s.action.v,
                s.action.w,
                s.reward.total,
                s.reward.goal,
                s.reward.collision,
                s.reward.rotation,
                s.status.as_str()
            )
            .unwrap();
        }
    }
    out
}

struct Fields<'a> {
    line: usize,
    it: std::str::SplitWhitespace<'a>,
}

impl<'a> Fields<'a> {
    fn err<T>(&self, message: impl Into<String>) -> Result<T> {
        Err(Error::Parse {
            line: self.line,
            message: message.into(),
        })
    }

    fn word(&mut self, what: &str) -> Result<&'a str> {
        match self.it.next() {
            Some(w) => Ok(w),
            None => self.err(format!("missing {what}")),
        }
    }

    fn num<T: std::str::FromStr>(&mut self, what: &str) -> Result<T> {
        let w = self.word(what)?;
        match w.parse() {
            Ok(v) => Ok(v),
            Err(_) => self.err(format!("bad {what} `{w}`")),
        }
    }

    fn vec2(&mut self, what: &str) -> Result<Vec2> {
        Ok(Vec2::new(self.num(what)?, self.num(what)?))
    }

    fn end(&mut self) -> Result<()> {
        match self.it.next() {
            Some(w) => self.err(format!("unexpected trailing `{w}`")),
            None => Ok(()),
        }
    }
}

pub fn parse(text: &str) -> Result<EpisodeLog> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    match lines.next() {
        Some((_, h)) if h.trim_end() == HEADER => {}
        _ => {
            return Err(Error::Parse {
                line: 1,
                message: format!("expected `{HEADER}`"),
            })
        }
    }
    let mut dt = None;
    let mut seed = None;
    let mut controller = None;
    let mut scenario: Option<Option<ScenarioSpec>> = None;
    let mut obstacles = ObstacleSet::new();
    let mut agents: Vec<AgentTrace> = Vec::new();
    let mut last_step: Option<(usize, usize)> = None;
    for (line, text) in lines {
        let text = text.trim();
        if text.is_empty() || text.starts_with('#') {
            continue;
        }
        let (key, rest) = text.split_once(' ').unwrap_or((text, ""));
        let mut f = Fields {
            line,
            it: rest.split_whitespace(),
        };
        match key {
            "dt" => {
                dt = Some(f.num::<f64>("dt")?);
                f.end()?;
            }
            "seed" => {
                seed = Some(f.num::<u64>("seed")?);
                f.end()?;
            }
            "controller" => {
                controller = Some(f.word("controller")?.to_string());
                f.end()?;
            }
            "scenario" => {
                let rest = rest.trim();
                scenario = Some(if rest == "none" {
                    None
                } else {
                    match serde_json::from_str(rest) {
                        Ok(s) => Some(s),
                        Err(e) => return f.err(format!("bad scenario: {e}")),
                    }
                });
            }
            "obstacle" => {
                match f.word("obstacle type")? {
                    "segment" => obstacles.segments.push(Segment::new(f.vec2("endpoint")?, f.vec2("endpoint")?)),
                    "disc" => obstacles.discs.push(Disc::new(f.vec2("center")?, f.num("radius")?)),
                    "box" => obstacles.boxes.push(AaBox::new(f.vec2("corner")?, f.vec2("corner")?)),
                    other => return f.err(format!("unknown obstacle type `{other}`")),
                }
                f.end()?;
            }
            "agent" => {
                let id: usize = f.num("agent id")?;
                if id != agents.len() {
                    return f.err(format!("agent ids must be consecutive, expected {}", agents.len()));
                }
                agents.push(AgentTrace {
                    goal: f.vec2("goal")?,
                    radius: f.num("radius")?,
                    v_max: f.num("v_max")?,
                    w_max: f.num("w_max")?,
                    steps: Vec::new(),
                });
                f.end()?;
            }
            "step" => {
                let tick: usize = f.num("tick")?;
                let agent: usize = f.num("agent")?;
                if last_step.is_some_and(|prev| prev >= (tick, agent)) {
                    return f.err("step records must be sorted by tick, then agent");
                }
                last_step = Some((tick, agent));
                let Some(trace) = agents.get(agent) else {
                    return f.err(format!("unknown agent {agent}"));
                };
                if trace.steps.len() != tick {
                    return f.err(format!("agent {agent} has no record for tick {}", trace.steps.len()));
                }
                if trace.steps.last().is_some_and(|s| s.status.is_terminal()) {
                    return f.err(format!("agent {agent} has records after its terminal tick"));
                }
                let pose = Pose::new(f.num("x")?, f.num("y")?, f.num("heading")?);
                let action = Action::new(f.num("v")?, f.num("w")?);
                let reward = RewardTerms {
                    total: f.num("reward")?,
                    goal: f.num("reward")?,
                    collision: f.num("reward")?,
                    rotation: f.num("reward")?,
                };
                let kind = match f.word("kind")? {
                    "-" => None,
                    k => match SubPolicyKind::parse(k) {
                        Some(k) => Some(k),
                        None => return f.err(format!("unknown sub-policy `{k}`")),
                    },
                };
                let w = f.word("status")?;
                let Some(status) = AgentStatus::parse(w) else {
                    return f.err(format!("unknown status `{w}`"));
                };
                f.end()?;
                agents[agent].steps.push(TraceStep {
                    pose,
                    action,
                    reward,
                    kind,
                    status,
                });
            }
            other => return f.err(format!("unknown record `{other}`")),
        }
    }
    let missing = |what: &str| Error::Parse {
        line: 0,
        message: format!("missing `{what}` record"),
    };
    if let Some(i) = agents.iter().position(|a| a.steps.is_empty()) {
        return Err(Error::Parse {
            line: 0,
            message: format!("agent {i} has no spawn record"),
        });
    }
    Ok(EpisodeLog {
        scenario: scenario.ok_or_else(|| missing("scenario"))?,
        seed: seed.ok_or_else(|| missing("seed"))?,
        dt: dt.ok_or_else(|| missing("dt"))?,
        controller: controller.ok_or_else(|| missing("controller"))?,
        obstacles,
        agents,
    })
}

pub fn save(log: &EpisodeLog, path: &Path) -> Result<()> {
    std::fs::write(path, format(log))?;
    Ok(())
}

pub fn load(path: &Path) -> Result<EpisodeLog> {
    parse(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::{run_trials, Controller, TrialSettings};
    use crate::sim::{ScenarioKind, SimConfig};
    use crate::world::LidarSpec;

    fn sample() -> EpisodeLog {
        let sim = SimConfig {
            lidar: LidarSpec {
                beam_count: 32,
                ..LidarSpec::default()
            },
            max_steps: 80,
            ..SimConfig::default()
        };
        let spec = ScenarioSpec::new(ScenarioKind::RandomObstacles, 3);
        let settings = TrialSettings {
            trials: 1,
            seed: 4,
            ..TrialSettings::default()
        };
        run_trials(&spec, &sim, Controller::Scripted, &settings).unwrap().remove(0)
    }

    #[test]
    fn round_trip_is_exact() {
        let mut log = sample();
        log.agents[0].steps[1].kind = Some(SubPolicyKind::Safe);
        log.obstacles.push_disc(Vec2::new(0.1 + 0.2, -1.0 / 3.0), 0.7);
        let text = format(&log);
        let back = parse(&text).unwrap();
        assert_eq!(back, log);
        assert_eq!(format(&back), text);
    }

    #[test]
    fn errors_name_the_line() {
        let text = format(&sample());
        let broken: Vec<String> = text
            .lines()
            .enumerate()
            .map(|(i, l)| if i == 7 { "step x".to_string() } else { l.to_string() })
            .collect();
        match parse(&broken.join("\n")) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 8),
            other => panic!("expected parse error, got {other:?}"),
        }
        assert!(matches!(parse("nonsense"), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn out_of_order_steps_rejected() {
        let text = format!("{HEADER}\ndt 0.1\nseed 0\ncontroller x\nscenario none\nagent 0 1 0 0.1 1 1\nstep 1 0 0 0 0 0 0 0 0 0 0 - active\n");
        assert!(matches!(parse(&text), Err(Error::Parse { line: 7, .. })));
    }
}
