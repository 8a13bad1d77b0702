use std::fmt;

use serde::{Deserialize, Serialize};

use super::episode::EpisodeLog;
use crate::sim::AgentStatus;

/// Travel time minus the straight-line lower bound, per agent (arrived agents only).
pub fn extra_time(log: &EpisodeLog) -> Vec<Option<f64>> {
    log.agents
        .iter()
        .map(|a| {
            (a.status() == AgentStatus::Arrived).then(|| {
                let travel = a.end_tick().expect("arrived agents are terminal") as f64 * log.dt;
                travel - a.start().distance(a.goal) / a.v_max
            })
        })
        .collect()
}

/// Executed path length minus straight-line distance, per agent (arrived agents only).
pub fn extra_distance(log: &EpisodeLog) -> Vec<Option<f64>> {
    log.agents
        .iter()
        .map(|a| (a.status() == AgentStatus::Arrived).then(|| a.path_length() - a.start().distance(a.goal)))
        .collect()
}

/// Path length over travel time, per agent (arrived agents only).
pub fn average_speed(log: &EpisodeLog) -> Vec<Option<f64>> {
    log.agents
        .iter()
        .map(|a| {
            (a.status() == AgentStatus::Arrived).then(|| {
                let ticks = a.end_tick().expect("arrived agents are terminal");
                if ticks == 0 {
                    0.0
                } else {
                    a.path_length() / (ticks as f64 * log.dt)
                }
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FailureRates {
    pub failure: f64,
    pub collision: f64,
    pub stuck: f64,
}

/// Collided agents count as collisions, timed-out ones as stuck; both are failures.
pub fn classify_failures(logs: &[EpisodeLog]) -> FailureRates {
    let (mut total, mut collided, mut stuck) = (0usize, 0usize, 0usize);
    for a in logs.iter().flat_map(|l| &l.agents) {
        total += 1;
        match a.status() {
            AgentStatus::Collided => collided += 1,
            AgentStatus::TimedOut | AgentStatus::Active => stuck += 1,
            AgentStatus::Arrived => {}
        }
    }
    if total == 0 {
        return FailureRates::default();
    }
    let n = total as f64;
    FailureRates {
        failure: (collided + stuck) as f64 / n,
        collision: collided as f64 / n,
        stuck: stuck as f64 / n,
    }
}

/// Mean and sample standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
    /// Number of values aggregated.
    pub count: usize,
}

impl Stat {
    /// Two-pass mean and (n−1)-normalized deviation; NaN mean when empty.
    pub fn of(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return Self {
                mean: f64::NAN,
                std: f64::NAN,
                count: 0,
            };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let std = if n > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        Self { mean, std, count: n }
    }
}

/// Benchmark summary over repeated trials of one scenario and controller.
///
/// Rates are pooled over every agent of every trial. Time, distance and speed
/// statistics are taken over per-trial means of the arrived agents; trials
/// without arrivals are skipped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub controller: String,
    pub scenario: String,
    pub trials: usize,
    pub agents: usize,
    pub success_rate: f64,
    pub extra_time: Stat,
    pub extra_distance: Stat,
    pub average_speed: Stat,
    pub failure_rate: f64,
    pub collision_rate: f64,
    pub stuck_rate: f64,
}

fn mean_of(values: &[Option<f64>]) -> Option<f64> {
    let v: Vec<f64> = values.iter().flatten().copied().collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

impl MetricsReport {
    pub fn from_logs(controller: &str, scenario: &str, logs: &[EpisodeLog]) -> Self {
        let rates = classify_failures(logs);
        let agents = logs.iter().map(|l| l.agents.len()).sum();
        let per_trial = |f: fn(&EpisodeLog) -> Vec<Option<f64>>| -> Stat {
            let means: Vec<f64> = logs.iter().filter_map(|l| mean_of(&f(l))).collect();
            Stat::of(&means)
        };
        Self {
            controller: controller.to_string(),
            scenario: scenario.to_string(),
            trials: logs.len(),
            agents,
            success_rate: if agents == 0 { 0.0 } else { 1.0 - rates.failure },
            extra_time: per_trial(extra_time),
            extra_distance: per_trial(extra_distance),
            average_speed: per_trial(average_speed),
            failure_rate: rates.failure,
            collision_rate: rates.collision,
            stuck_rate: rates.stuck,
        }
    }

    /// Checks the rate partition identities.
    pub fn identities_hold(&self) -> bool {
        let rates = [self.success_rate, self.failure_rate, self.collision_rate, self.stuck_rate];
        rates.iter().all(|r| (0.0..=1.0).contains(r))
            && (self.failure_rate - self.collision_rate - self.stuck_rate).abs() < 1e-12
            && (self.agents == 0 || (self.success_rate + self.failure_rate - 1.0).abs() < 1e-12)
    }

    pub const TABLE_HEADER: &'static str =
        "controller  scenario                 trials  success  extra_time(s)      extra_dist(m)      avg_speed(m/s)     failure  collision  stuck";

    pub fn table_row(&self) -> String {
        let s = |x: Stat| format!("{:.3}/{:.3}", x.mean, x.std);
        format!(
            "{:<10}  {:<23}  {:>6}  {:>7.3}  {:<17}  {:<17}  {:<17}  {:>7.3}  {:>9.3}  {:>5.3}",
            self.controller,
            self.scenario,
            self.trials,
            self.success_rate,
            s(self.extra_time),
            s(self.extra_distance),
            s(self.average_speed),
            self.failure_rate,
            self.collision_rate,
            self.stuck_rate
        )
    }
}

impl fmt::Display for MetricsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{}", Self::TABLE_HEADER)?;
        write!(f, "{}", self.table_row())
    }
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;
    use crate::eval::{AgentTrace, TraceStep};
    use crate::sim::{Action, RewardTerms};
    use crate::world::{ObstacleSet, Pose, Vec2};

    fn step(x: f64, y: f64, status: AgentStatus) -> TraceStep {
        TraceStep {
            pose: Pose::new(x, y, 0.0),
            action: Action::STOP,
            reward: RewardTerms::default(),
            kind: None,
            status,
        }
    }

    fn trace(points: &[(f64, f64)], goal: Vec2, end: AgentStatus) -> AgentTrace {
        let n = points.len();
        AgentTrace {
            goal,
            radius: 0.12,
            v_max: 1.0,
            w_max: 1.0,
            steps: points
                .iter()
                .enumerate()
                .map(|(i, &(x, y))| step(x, y, if i + 1 == n { end } else { AgentStatus::Active }))
                .collect(),
        }
    }

    fn log(agents: Vec<AgentTrace>) -> EpisodeLog {
        EpisodeLog {
            scenario: None,
            seed: 0,
            dt: 0.1,
            controller: "scripted".into(),
            obstacles: ObstacleSet::new(),
            agents,
        }
    }

    fn status_trace(s: AgentStatus) -> AgentTrace {
        trace(&[(0.0, 0.0), (0.1, 0.0)], Vec2::new(0.1, 0.0), s)
    }

    #[test]
    fn extra_time_arithmetic() {
        // 5 m goal at 1 m/s reached after 55 ticks of 0.1 s.
        let pts: Vec<(f64, f64)> = (0..=55).map(|k| ((k as f64 / 11.0).min(5.0), 0.0)).collect();
        let l = log(vec![trace(&pts, Vec2::new(5.0, 0.0), AgentStatus::Arrived)]);
        assert!((extra_time(&l)[0].unwrap() - 0.5).abs() < 1e-12);
        assert!(extra_distance(&l)[0].unwrap().abs() < 1e-12);
    }

    #[test]
    fn quarter_circle_detour_matches_polyline() {
        // Start (0,0), goal (2,0): two quarter-arcs of radius 1 over the top.
        let n = 400;
        let mut pts = Vec::new();
        for k in 0..=n {
            let th = std::f64::consts::PI * (1.0 - k as f64 / n as f64);
            pts.push((1.0 + th.cos(), th.sin()));
        }
        let want: f64 = pts
            .windows(2)
            .map(|w| ((w[1].0 - w[0].0).powi(2) + (w[1].1 - w[0].1).powi(2)).sqrt())
            .sum::<f64>()
            - 2.0;
        let l = log(vec![trace(&pts, Vec2::new(2.0, 0.0), AgentStatus::Arrived)]);
        let got = extra_distance(&l)[0].unwrap();
        assert!((got - want).abs() < 1e-12);
        assert!((got - (std::f64::consts::PI - 2.0)).abs() < 1e-4);
    }

    #[test]
    fn failed_agents_are_excluded() {
        let l = log(vec![status_trace(AgentStatus::Collided), status_trace(AgentStatus::Arrived)]);
        assert_eq!(extra_time(&l)[0], None);
        assert!(extra_time(&l)[1].is_some());
    }

    #[test]
    fn failure_counting() {
        let mut agents: Vec<AgentTrace> = (0..8).map(|_| status_trace(AgentStatus::Arrived)).collect();
        agents.push(status_trace(AgentStatus::Collided));
        agents.push(status_trace(AgentStatus::TimedOut));
        let r = classify_failures(&[log(agents)]);
        assert_eq!((r.failure, r.collision, r.stuck), (0.2, 0.1, 0.1));
        let all = classify_failures(&[log(vec![status_trace(AgentStatus::Arrived)])]);
        assert_eq!(all, FailureRates::default());
    }

    #[test]
    fn stat_matches_two_pass() {
        let xs: Vec<f64> = (0..50).map(|i| (i as f64 * 0.37).sin() * 3.0 + 1.0).collect();
        let s = Stat::of(&xs);
        let mean = xs.iter().sum::<f64>() / 50.0;
        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / 49.0;
        assert!((s.mean - mean).abs() <= 1e-10);
        assert!((s.std - var.sqrt()).abs() <= 1e-10);
        assert_eq!(s.count, 50);
    }

    proptest! {
        #[test]
        fn report_identities(statuses in prop::collection::vec(prop::collection::vec(0u8..3, 1..12), 1..8)) {
            let logs: Vec<EpisodeLog> = statuses
                .iter()
                .map(|t| {
                    log(t.iter()
                        .map(|&s| status_trace([AgentStatus::Arrived, AgentStatus::Collided, AgentStatus::TimedOut][s as usize]))
                        .collect())
                })
                .collect();
            let r = MetricsReport::from_logs("x", "y", &logs);
            prop_assert!(r.identities_hold());
        }
    }
}
