use serde::{Deserialize, Serialize};

use super::geometry::Vec2;
use super::obstacles::ObstacleSet;

/// Anything occupying a disc on the plane.
pub trait Body {
    fn center(&self) -> Vec2;
    fn radius(&self) -> f64;
}

impl Body for (Vec2, f64) {
    fn center(&self) -> Vec2 {
        self.0
    }
    fn radius(&self) -> f64 {
        self.1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum CollisionEvent {
    /// Two agents overlap; always reported with `i < j`.
    Agents(usize, usize),
    /// Agent overlaps a static obstacle.
    Obstacle(usize),
}

/// Free space around a disc: the smallest gap to any obstacle surface or other
/// agent disc. Negative when penetrating, `f64::MAX` when nothing is around.
pub fn min_clearance(position: Vec2, radius: f64, obstacles: &ObstacleSet, others: &[(Vec2, f64)]) -> f64 {
    let obs = obstacles.distance(position);
    let obs = if obs == f64::MAX { obs } else { obs - radius };
    others
        .iter()
        .map(|&(c, r)| position.distance(c) - radius - r)
        .fold(obs, f64::min)
}

/// All overlapping pairs and agent/obstacle contacts, sorted.
///
/// Contact uses strict inequality: discs exactly touching do not collide.
pub fn detect_collisions<B: Body>(agents: &[B], obstacles: &ObstacleSet) -> Vec<CollisionEvent> {
    let mut events = Vec::new();
    if agents.is_empty() {
        return events;
    }
    // Sweep along x: pairs farther apart in x than the largest diameter cannot touch.
    let mut order: Vec<usize> = (0..agents.len()).collect();
    order.sort_by(|&a, &b| agents[a].center().x.total_cmp(&agents[b].center().x).then(a.cmp(&b)));
    let max_r = agents.iter().map(|a| a.radius()).fold(0.0, f64::max);
    for (idx, &i) in order.iter().enumerate() {
        let (ci, ri) = (agents[i].center(), agents[i].radius());
        for &j in &order[idx + 1..] {
            let cj = agents[j].center();
            if cj.x - ci.x > ri + max_r {
                break;
            }
            if ci.distance(cj) < ri + agents[j].radius() {
                events.push(CollisionEvent::Agents(i.min(j), i.max(j)));
            }
        }
    }
    if !obstacles.is_empty() {
        for (i, a) in agents.iter().enumerate() {
            if obstacles.distance(a.center()) < a.radius() {
                events.push(CollisionEvent::Obstacle(i));
            }
        }
    }
    events.sort_unstable();
    events
}
