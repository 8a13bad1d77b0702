//! Seeded scenario layouts for training and evaluation.

use std::f64::consts::{PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::agent::AgentState;
use crate::error::{Error, Result};
use crate::world::{detect_collisions, ObstacleSet, Pose, Vec2};

/// Agent density used to size circle scenarios when no radius is given (agents/m²).
pub const CIRCLE_DENSITY: f64 = 0.2;

/// Rejection-sampling budget per agent.
const MAX_ATTEMPTS: usize = 5000;

/// Extra gap kept between spawned discs, and between discs and obstacles.
const SPAWN_MARGIN: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    RandomOpen,
    CrossingMaze,
    CorridorObstacles,
    Circle,
    Evac,
    Maze,
    RandomObstacles,
    GroupSwap,
    GroupCross,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 9] = [
        ScenarioKind::RandomOpen,
        ScenarioKind::CrossingMaze,
        ScenarioKind::CorridorObstacles,
        ScenarioKind::Circle,
        ScenarioKind::Evac,
        ScenarioKind::Maze,
        ScenarioKind::RandomObstacles,
        ScenarioKind::GroupSwap,
        ScenarioKind::GroupCross,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::RandomOpen => "random_open",
            ScenarioKind::CrossingMaze => "crossing_maze",
            ScenarioKind::CorridorObstacles => "corridor_obstacles",
            ScenarioKind::Circle => "circle",
            ScenarioKind::Evac => "evac",
            ScenarioKind::Maze => "maze",
            ScenarioKind::RandomObstacles => "random_obstacles",
            ScenarioKind::GroupSwap => "group_swap",
            ScenarioKind::GroupCross => "group_cross",
        }
    }
}

/// Declarative description of a scenario instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioSpec {
    pub kind: ScenarioKind,
    pub agents: usize,
    /// Arena extent along x, meters (arena is centered on the origin).
    pub width: f64,
    /// Arena extent along y, meters.
    pub height: f64,
    /// Circle radius for `circle`; 0 derives it from [`CIRCLE_DENSITY`].
    pub circle_radius: f64,
    /// Obstacle count for `random_obstacles`.
    pub obstacles: usize,
    pub agent_radius: f64,
    pub v_max: f64,
    pub w_max: f64,
    /// Spawn perturbation for structured layouts, meters. Nonzero also randomizes
    /// the circle's orientation.
    pub jitter: f64,
    pub seed: u64,
}

impl Default for ScenarioSpec {
    fn default() -> Self {
        Self {
            kind: ScenarioKind::RandomOpen,
            agents: 4,
            width: 7.0,
            height: 7.0,
            circle_radius: 0.0,
            obstacles: 6,
            agent_radius: 0.12,
            v_max: 1.0,
            w_max: 1.0,
            jitter: 0.0,
            seed: 0,
        }
    }
}

impl ScenarioSpec {
    pub fn new(kind: ScenarioKind, agents: usize) -> Self {
        Self {
            kind,
            agents,
            ..Self::default()
        }
    }

    pub fn circle(agents: usize, radius: f64) -> Self {
        Self {
            circle_radius: radius,
            ..Self::new(ScenarioKind::Circle, agents)
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn effective_circle_radius(&self) -> f64 {
        if self.circle_radius > 0.0 {
            self.circle_radius
        } else {
            (self.agents as f64 / (CIRCLE_DENSITY * PI)).sqrt()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.agents == 0 {
            return bad("scenario needs at least one agent".into());
        }
        if !(self.width > 0.0 && self.height > 0.0) {
            return bad(format!("arena dims must be positive, got {}x{}", self.width, self.height));
        }
        if !(self.agent_radius > 0.0 && self.v_max > 0.0 && self.w_max > 0.0) {
            return bad("agent radius and velocity limits must be positive".into());
        }
        if self.jitter < 0.0 || self.circle_radius < 0.0 {
            return bad("jitter and circle_radius must be non-negative".into());
        }
        Ok(())
    }
}

/// Agents and obstacles of a freshly generated scenario.
#[derive(Debug, Clone)]
pub struct Layout {
    pub agents: Vec<AgentState>,
    pub obstacles: ObstacleSet,
}

#[derive(Clone, Copy)]
struct Rect {
    min: Vec2,
    max: Vec2,
}

impl Rect {
    fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Self {
            min: Vec2::new(x0.min(x1), y0.min(y1)),
            max: Vec2::new(x0.max(x1), y0.max(y1)),
        }
    }

    fn centered(w: f64, h: f64) -> Self {
        Self::new(-w / 2.0, -h / 2.0, w / 2.0, h / 2.0)
    }

    fn shrink(self, m: f64) -> Self {
        Self::new(self.min.x + m, self.min.y + m, self.max.x - m, self.max.y - m)
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> Vec2 {
        let x = if self.max.x > self.min.x {
            rng.gen_range(self.min.x..self.max.x)
        } else {
            self.min.x
        };
        let y = if self.max.y > self.min.y {
            rng.gen_range(self.min.y..self.max.y)
        } else {
            self.min.y
        };
        Vec2::new(x, y)
    }
}

struct Placer<'a> {
    spec: &'a ScenarioSpec,
    rng: ChaCha8Rng,
    obstacles: ObstacleSet,
    starts: Vec<Vec2>,
    goals: Vec<Vec2>,
}

impl<'a> Placer<'a> {
    fn new(spec: &'a ScenarioSpec) -> Self {
        Self {
            spec,
            rng: ChaCha8Rng::seed_from_u64(spec.seed),
            obstacles: ObstacleSet::new(),
            starts: Vec::new(),
            goals: Vec::new(),
        }
    }

    fn spot_free(&self, p: Vec2, taken: &[Vec2]) -> bool {
        let r = self.spec.agent_radius;
        self.obstacles.distance(p) > r + SPAWN_MARGIN
            && taken.iter().all(|q| p.distance(*q) > 2.0 * r + SPAWN_MARGIN)
    }

    /// Rejection-samples a start in `from` and a goal in `to`.
    fn sample_pair(&mut self, from: Rect, to: Rect, min_travel: f64) -> Result<()> {
        for _ in 0..MAX_ATTEMPTS {
            let s = from.sample(&mut self.rng);
            if !self.spot_free(s, &self.starts) {
                continue;
            }
            for _ in 0..20 {
                let g = to.sample(&mut self.rng);
                if s.distance(g) >= min_travel && self.spot_free(g, &self.goals) {
                    self.starts.push(s);
                    self.goals.push(g);
                    return Ok(());
                }
            }
        }
        Err(Error::Scenario(format!(
            "{}: placed {} of {} agents before exhausting {} attempts; density infeasible for a {}x{} arena",
            self.spec.kind.name(),
            self.starts.len(),
            self.spec.agents,
            MAX_ATTEMPTS,
            self.spec.width,
            self.spec.height
        )))
    }

    fn jitter(&mut self) -> Vec2 {
        let j = self.spec.jitter;
        if j > 0.0 {
            Vec2::new(self.rng.gen_range(-j..=j), self.rng.gen_range(-j..=j))
        } else {
            Vec2::ZERO
        }
    }

    fn place_fixed(&mut self, start: Vec2, goal: Vec2) {
        let (js, jg) = (self.jitter(), self.jitter());
        self.starts.push(start + js);
        self.goals.push(goal + jg);
    }

    /// Builds agents; `face_goal` orients each toward its goal, otherwise headings are random.
    fn finish(mut self, face_goal: bool) -> Result<Layout> {
        let spec = self.spec;
        let mut agents = Vec::with_capacity(self.starts.len());
        for (s, g) in self.starts.iter().zip(&self.goals) {
            let heading = if face_goal {
                (*g - *s).angle()
            } else {
                self.rng.gen_range(-PI..PI)
            };
            agents.push(
                AgentState::new(Pose::new(s.x, s.y, heading), *g, spec.agent_radius)
                    .with_limits(spec.v_max, spec.w_max),
            );
        }
        let overlaps = detect_collisions(&agents, &self.obstacles);
        if !overlaps.is_empty() {
            return Err(Error::Scenario(format!(
                "{}: spawn positions overlap ({} contacts, first {:?}); increase the arena or reduce agents",
                spec.kind.name(),
                overlaps.len(),
                overlaps[0]
            )));
        }
        Ok(Layout {
            agents,
            obstacles: self.obstacles,
        })
    }
}

/// Generates agents and obstacles for `spec`. Identical specs yield identical layouts.
pub fn generate_layout(spec: &ScenarioSpec) -> Result<Layout> {
    spec.validate()?;
    let mut p = Placer::new(spec);
    let (w, h) = (spec.width, spec.height);
    let arena = Rect::centered(w, h);
    let inner = arena.shrink(spec.agent_radius + SPAWN_MARGIN);
    let n = spec.agents;

    match spec.kind {
        ScenarioKind::RandomOpen => {
            for _ in 0..n {
                p.sample_pair(inner, inner, 1.0)?;
            }
            p.finish(false)
        }
        ScenarioKind::Circle => {
            let r = spec.effective_circle_radius();
            let offset = if spec.jitter > 0.0 {
                p.rng.gen_range(0.0..TAU)
            } else {
                0.0
            };
            for i in 0..n {
                let a = offset + TAU * i as f64 / n as f64;
                let s = Vec2::from_angle(a) * r;
                p.place_fixed(s, -s);
            }
            p.finish(true)
        }
        ScenarioKind::GroupSwap => {
            let left = n.div_ceil(2);
            let x = w / 2.0 - 1.0;
            for i in 0..n {
                let (row, side) = if i < left { (i, -1.0) } else { (i - left, 1.0) };
                let rows = if i < left { left } else { n - left };
                let y = (row as f64 - (rows as f64 - 1.0) / 2.0) * 0.6;
                p.place_fixed(Vec2::new(side * x, y), Vec2::new(-side * x, y));
            }
            p.finish(true)
        }
        ScenarioKind::GroupCross => {
            let a = n.div_ceil(2);
            for i in 0..n {
                if i < a {
                    let y = (i as f64 - (a as f64 - 1.0) / 2.0) * 0.6;
                    let x = w / 2.0 - 1.0;
                    p.place_fixed(Vec2::new(-x, y), Vec2::new(x, y));
                } else {
                    let k = i - a;
                    let x = (k as f64 - ((n - a) as f64 - 1.0) / 2.0) * 0.6;
                    let y = h / 2.0 - 1.0;
                    p.place_fixed(Vec2::new(x, -y), Vec2::new(x, y));
                }
            }
            p.finish(true)
        }
        ScenarioKind::CrossingMaze => {
            // Four corner blocks leave a plus-shaped corridor 2 m wide.
            let c = 1.0;
            p.obstacles.push_walls(arena.min, arena.max);
            for (sx, sy) in [(-1.0f64, -1.0f64), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0)] {
                p.obstacles.push_box(
                    Vec2::new((sx * c).min(sx * w / 2.0), (sy * c).min(sy * h / 2.0)),
                    Vec2::new((sx * c).max(sx * w / 2.0), (sy * c).max(sy * h / 2.0)),
                );
            }
            let m = spec.agent_radius + SPAWN_MARGIN;
            let ends = [
                Rect::new(-w / 2.0 + m, -c + m, -w / 2.0 + 1.5, c - m),
                Rect::new(w / 2.0 - 1.5, -c + m, w / 2.0 - m, c - m),
                Rect::new(-c + m, -h / 2.0 + m, c - m, -h / 2.0 + 1.5),
                Rect::new(-c + m, h / 2.0 - 1.5, c - m, h / 2.0 - m),
            ];
            for _ in 0..n {
                let arm = p.rng.gen_range(0..4);
                let opposite = arm ^ 1;
                p.sample_pair(ends[arm], ends[opposite], 1.0)?;
            }
            p.finish(false)
        }
        ScenarioKind::CorridorObstacles => {
            let half_gap = 0.6;
            let cx = 1.0;
            p.obstacles.push_walls(arena.min, arena.max);
            p.obstacles
                .push_box(Vec2::new(-cx, half_gap), Vec2::new(cx, h / 2.0));
            p.obstacles
                .push_box(Vec2::new(-cx, -h / 2.0), Vec2::new(cx, -half_gap));
            let m = spec.agent_radius + SPAWN_MARGIN;
            let left = Rect::new(-w / 2.0 + m, -h / 2.0 + m, -cx - m, h / 2.0 - m);
            let right = Rect::new(cx + m, -h / 2.0 + m, w / 2.0 - m, h / 2.0 - m);
            for i in 0..n {
                if i % 2 == 0 {
                    p.sample_pair(left, right, 1.0)?;
                } else {
                    p.sample_pair(right, left, 1.0)?;
                }
            }
            p.finish(false)
        }
        ScenarioKind::Evac => {
            let half = (w.min(h) / 2.0 - 1.5).max(1.0);
            let door = 0.5;
            p.obstacles.push_walls(arena.min, arena.max);
            let o = &mut p.obstacles;
            o.push_segment(Vec2::new(-half, -half), Vec2::new(half, -half));
            o.push_segment(Vec2::new(-half, half), Vec2::new(half, half));
            o.push_segment(Vec2::new(-half, -half), Vec2::new(-half, half));
            o.push_segment(Vec2::new(half, -half), Vec2::new(half, -door));
            o.push_segment(Vec2::new(half, door), Vec2::new(half, half));
            let m = spec.agent_radius + SPAWN_MARGIN;
            let room = Rect::new(-half + m, -half + m, half - m, half - m);
            let outside = Rect::new(half + 0.5, -h / 2.0 + m, w / 2.0 - m, h / 2.0 - m);
            for _ in 0..n {
                p.sample_pair(room, outside, 1.0)?;
            }
            p.finish(false)
        }
        ScenarioKind::Maze => {
            p.obstacles.push_walls(arena.min, arena.max);
            let o = &mut p.obstacles;
            o.push_segment(Vec2::new(-w / 6.0, -h / 2.0), Vec2::new(-w / 6.0, h / 6.0));
            o.push_segment(Vec2::new(w / 6.0, h / 2.0), Vec2::new(w / 6.0, -h / 6.0));
            o.push_segment(Vec2::new(-w / 2.0, h / 4.0), Vec2::new(-w / 3.0, h / 4.0));
            o.push_segment(Vec2::new(w / 3.0, -h / 4.0), Vec2::new(w / 2.0, -h / 4.0));
            for _ in 0..n {
                p.sample_pair(inner, inner, 1.0)?;
            }
            p.finish(false)
        }
        ScenarioKind::RandomObstacles => {
            for _ in 0..spec.obstacles {
                let c = arena.shrink(0.5).sample(&mut p.rng);
                if p.rng.gen_bool(0.5) {
                    let r = p.rng.gen_range(0.2..0.5);
                    p.obstacles.push_disc(c, r);
                } else {
                    let hw = p.rng.gen_range(0.15..0.4);
                    let hh = p.rng.gen_range(0.15..0.4);
                    p.obstacles
                        .push_box(Vec2::new(c.x - hw, c.y - hh), Vec2::new(c.x + hw, c.y + hh));
                }
            }
            for _ in 0..n {
                p.sample_pair(inner, inner, 1.0)?;
            }
            p.finish(false)
        }
    }
}
