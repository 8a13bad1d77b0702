//! Closed-form oracles shared by the integration tests and the acceptance runner.

#![allow(dead_code)]

use mrca_core::world::{detect_collisions, raycast, CollisionEvent, LidarSpec, ObstacleSet, Pose, Vec2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn ray_disc(o: (f64, f64), u: (f64, f64), c: (f64, f64), r: f64) -> Option<f64> {
    let (wx, wy) = (c.0 - o.0, c.1 - o.1);
    let along = wx * u.0 + wy * u.1;
    let perp2 = wx * wx + wy * wy - along * along;
    if perp2 > r * r {
        return None;
    }
    let t = along - (r * r - perp2).sqrt();
    (t >= 0.0).then_some(t)
}

fn ray_segment(o: (f64, f64), u: (f64, f64), a: (f64, f64), b: (f64, f64)) -> Option<f64> {
    let e = (b.0 - a.0, b.1 - a.1);
    let denom = u.0 * e.1 - u.1 * e.0;
    if denom.abs() < 1e-15 {
        return None;
    }
    let w = (a.0 - o.0, a.1 - o.1);
    let t = (w.0 * e.1 - w.1 * e.0) / denom;
    let s = (w.0 * u.1 - w.1 * u.0) / denom;
    (t >= 0.0 && (0.0..=1.0).contains(&s)).then_some(t)
}

fn random_scene(rng: &mut ChaCha8Rng) -> (ObstacleSet, Vec<(Vec2, f64)>) {
    let mut obs = ObstacleSet::new();
    for _ in 0..rng.gen_range(0..4) {
        obs.push_disc(Vec2::new(rng.gen_range(-4.0..4.0), rng.gen_range(-4.0..4.0)), rng.gen_range(0.1..0.8));
    }
    for _ in 0..rng.gen_range(0..4) {
        let a = Vec2::new(rng.gen_range(-4.0..4.0), rng.gen_range(-4.0..4.0));
        obs.push_segment(a, a + Vec2::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)));
    }
    for _ in 0..rng.gen_range(0..3) {
        let lo = Vec2::new(rng.gen_range(-4.0..3.0), rng.gen_range(-4.0..3.0));
        obs.push_box(lo, lo + Vec2::new(rng.gen_range(0.2..1.0), rng.gen_range(0.2..1.0)));
    }
    let others = (0..rng.gen_range(0..6))
        .map(|_| (Vec2::new(rng.gen_range(-4.0..4.0), rng.gen_range(-4.0..4.0)), rng.gen_range(0.1..0.4)))
        .collect();
    (obs, others)
}

fn inside_anything(p: Vec2, obs: &ObstacleSet, others: &[(Vec2, f64)]) -> bool {
    obs.discs.iter().any(|d| p.distance(d.center) <= d.radius)
        || obs.boxes.iter().any(|b| p.x >= b.min.x && p.x <= b.max.x && p.y >= b.min.y && p.y <= b.max.y)
        || others.iter().any(|&(c, r)| p.distance(c) <= r)
}

fn oracle_scan(pose: &Pose, spec: &LidarSpec, obs: &ObstacleSet, others: &[(Vec2, f64)]) -> Vec<f64> {
    let o = (pose.position.x, pose.position.y);
    (0..spec.beam_count)
        .map(|k| {
            let a = spec.beam_angle(pose.heading, k);
            let u = (a.cos(), a.sin());
            let mut best = spec.max_range;
            let mut take = |t: Option<f64>| {
                if let Some(t) = t {
                    best = best.min(t);
                }
            };
            for d in &obs.discs {
                take(ray_disc(o, u, (d.center.x, d.center.y), d.radius));
            }
            for &(c, r) in others {
                take(ray_disc(o, u, (c.x, c.y), r));
            }
            for s in &obs.segments {
                take(ray_segment(o, u, (s.a.x, s.a.y), (s.b.x, s.b.y)));
            }
            for b in &obs.boxes {
                let c = [(b.min.x, b.min.y), (b.max.x, b.min.y), (b.max.x, b.max.y), (b.min.x, b.max.y)];
                for i in 0..4 {
                    take(ray_segment(o, u, c[i], c[(i + 1) % 4]));
                }
            }
            best
        })
        .collect()
}

/// Largest deviation between `raycast` and the analytic scan over `scans` random scenes.
pub fn raycast_max_error(seed: u64, scans: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let spec = LidarSpec {
        beam_count: 90,
        ..LidarSpec::default()
    };
    let mut worst = 0.0f64;
    let mut done = 0;
    while done < scans {
        let (obs, others) = random_scene(&mut rng);
        let p = Vec2::new(rng.gen_range(-4.0..4.0), rng.gen_range(-4.0..4.0));
        if inside_anything(p, &obs, &others) {
            continue;
        }
        let pose = Pose::new(p.x, p.y, rng.gen_range(-3.2..3.2));
        let got = raycast(&pose, &spec, &obs, &others);
        let want = oracle_scan(&pose, &spec, &obs, &others);
        for (g, w) in got.iter().zip(&want) {
            let e = (g - w).abs();
            if e > worst || e.is_nan() {
                worst = e;
            }
        }
        done += 1;
    }
    worst
}

fn box_distance(p: Vec2, lo: Vec2, hi: Vec2) -> f64 {
    let dx = (lo.x - p.x).max(0.0).max(p.x - hi.x);
    let dy = (lo.y - p.y).max(0.0).max(p.y - hi.y);
    (dx * dx + dy * dy).sqrt()
}

fn segment_distance(p: Vec2, a: Vec2, b: Vec2) -> f64 {
    let e = b - a;
    let t = if e.norm_sq() == 0.0 { 0.0 } else { ((p - a).dot(e) / e.norm_sq()).clamp(0.0, 1.0) };
    p.distance(a + e * t)
}

/// Compares `detect_collisions` with an all-pairs scan on `worlds` random worlds.
/// Returns the index of the first disagreeing world.
pub fn collision_mismatch(seed: u64, worlds: usize) -> Option<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for world in 0..worlds {
        let (obs, _) = random_scene(&mut rng);
        let n = rng.gen_range(0..25);
        let agents: Vec<(Vec2, f64)> = (0..n)
            .map(|_| (Vec2::new(rng.gen_range(-3.5..3.5), rng.gen_range(-3.5..3.5)), rng.gen_range(0.1..0.4)))
            .collect();
        let mut want = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                if agents[i].0.distance(agents[j].0) < agents[i].1 + agents[j].1 {
                    want.push(CollisionEvent::Agents(i, j));
                }
            }
        }
        for (i, &(c, r)) in agents.iter().enumerate() {
            let hit = obs.discs.iter().any(|d| c.distance(d.center) - d.radius < r)
                || obs.segments.iter().any(|s| segment_distance(c, s.a, s.b) < r)
                || obs.boxes.iter().any(|b| box_distance(c, b.min, b.max) < r);
            if hit {
                want.push(CollisionEvent::Obstacle(i));
            }
        }
        want.sort_unstable();
        if detect_collisions(&agents, &obs) != want {
            return Some(world);
        }
    }
    None
}

/// Advantages as the explicit double sum Σ_l (γλ)^l δ_{t+l} over one episode
/// that ends in a terminal state.
pub fn gae_double_sum(rewards: &[f64], values: &[f64], gamma: f64, lambda: f64) -> Vec<f64> {
    let n = rewards.len();
    let next = |t: usize| if t + 1 < n { values[t + 1] } else { 0.0 };
    (0..n)
        .map(|t| {
            (t..n)
                .map(|k| (gamma * lambda).powi((k - t) as i32) * (rewards[k] + gamma * next(k) - values[k]))
                .sum()
        })
        .collect()
}
