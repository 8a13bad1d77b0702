//! Geometric ground truth: obstacles, agent discs, simulated lidar and contact queries.
//!
//! Everything here is a pure function of an immutable snapshot.

mod collision;
mod geometry;
mod lidar;
mod obstacles;

pub use collision::{detect_collisions, min_clearance, Body, CollisionEvent};
pub use geometry::{normalize_angle, Pose, Vec2};
pub use lidar::{raycast, raycast_brute_force, raycast_into, LidarSpec};
pub use obstacles::{ray_circle, AaBox, Disc, ObstacleSet, Segment};
