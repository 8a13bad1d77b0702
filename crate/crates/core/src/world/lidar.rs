use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use super::geometry::{normalize_angle, Pose, Vec2};
use super::obstacles::{ray_circle, ObstacleSet, Segment};

/// Planar range scanner mounted on a disc robot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LidarSpec {
    pub beam_count: usize,
    /// Angular field of view, radians.
    pub fov: f64,
    pub max_range: f64,
    /// Forward offset of the sensor origin from the disc center.
    pub mount_offset: f64,
}

impl Default for LidarSpec {
    fn default() -> Self {
        Self {
            beam_count: 512,
            fov: PI,
            max_range: 4.0,
            mount_offset: 0.0,
        }
    }
}

impl LidarSpec {
    pub fn validate(&self) -> Result<(), String> {
        if self.beam_count == 0 {
            return Err("lidar beam_count must be >= 1".into());
        }
        if !(self.fov > 0.0 && self.fov <= TAU) {
            return Err(format!("lidar fov must be in (0, 2π], got {}", self.fov));
        }
        if !(self.max_range > 0.0) {
            return Err(format!("lidar max_range must be > 0, got {}", self.max_range));
        }
        Ok(())
    }

    /// Angular spacing between adjacent beams (0 for a single beam).
    pub fn step(&self) -> f64 {
        if self.beam_count > 1 {
            self.fov / (self.beam_count - 1) as f64
        } else {
            0.0
        }
    }

    /// World-frame angle of beam `k`; both ends of the field of view are covered.
    pub fn beam_angle(&self, heading: f64, k: usize) -> f64 {
        if self.beam_count == 1 {
            heading
        } else {
            heading - self.fov / 2.0 + k as f64 * self.step()
        }
    }

    pub fn origin(&self, pose: &Pose) -> Vec2 {
        pose.position + Vec2::from_angle(pose.heading) * self.mount_offset
    }
}

/// Simulated scan: one range per beam, clamped to `max_range`.
///
/// `others` lists the discs of the other agents as `(center, radius)` and must not
/// include the sensing agent.
pub fn raycast(
    pose: &Pose,
    spec: &LidarSpec,
    obstacles: &ObstacleSet,
    others: &[(Vec2, f64)],
) -> Vec<f64> {
    let mut out = vec![spec.max_range; spec.beam_count];
    raycast_into(pose, spec, obstacles, others, &mut out);
    out
}

/// Allocation-free variant of [`raycast`]; `out.len()` must equal `beam_count`.
pub fn raycast_into(
    pose: &Pose,
    spec: &LidarSpec,
    obstacles: &ObstacleSet,
    others: &[(Vec2, f64)],
    out: &mut [f64],
) {
    assert_eq!(out.len(), spec.beam_count, "scan buffer length");
    out.fill(spec.max_range);
    let scan = Scan::new(pose, spec);

    for b in &obstacles.boxes {
        if b.contains(scan.origin) {
            out.fill(0.0);
            return;
        }
    }

    for d in &obstacles.discs {
        scan.disc(d.center, d.radius, out);
    }
    for &(c, r) in others {
        scan.disc(c, r, out);
    }
    for s in &obstacles.segments {
        scan.segment(s, out);
    }
    for b in &obstacles.boxes {
        if b.signed_distance(scan.origin) > spec.max_range {
            continue;
        }
        for e in b.edges() {
            scan.segment(&e, out);
        }
    }
}

/// Precomputed beam geometry for one scan.
struct Scan {
    origin: Vec2,
    first: f64,
    step: f64,
    n: usize,
    max_range: f64,
    /// Beam unit directions, indexed by beam.
    dirs: Vec<Vec2>,
}

impl Scan {
    fn new(pose: &Pose, spec: &LidarSpec) -> Self {
        let dirs = (0..spec.beam_count)
            .map(|k| Vec2::from_angle(spec.beam_angle(pose.heading, k)))
            .collect();
        Self {
            origin: spec.origin(pose),
            first: spec.beam_angle(pose.heading, 0),
            step: spec.step(),
            n: spec.beam_count,
            max_range: spec.max_range,
            dirs,
        }
    }

    /// Calls `f` on every beam whose direction may lie within `half_width` of `bearing`.
    fn for_beams_near(&self, bearing: f64, half_width: f64, mut f: impl FnMut(usize)) {
        if self.n == 1 || half_width >= PI {
            (0..self.n).for_each(f);
            return;
        }
        let rel = (bearing - self.first).rem_euclid(TAU);
        let last = (self.n - 1) as isize;
        let mut prev_hi = -1isize;
        for c in [rel - TAU, rel, rel + TAU] {
            let lo = ((c - half_width) / self.step).floor() as isize - 1;
            let hi = ((c + half_width) / self.step).ceil() as isize + 1;
            let lo = lo.max(0).max(prev_hi + 1);
            let hi = hi.min(last);
            if lo > hi {
                continue;
            }
            for k in lo..=hi {
                f(k as usize);
            }
            prev_hi = hi;
        }
    }

    fn disc(&self, center: Vec2, radius: f64, out: &mut [f64]) {
        let to_c = center - self.origin;
        let dist = to_c.norm();
        if dist - radius >= self.max_range {
            return;
        }
        if dist <= radius {
            out.fill(0.0);
            return;
        }
        let half = (radius / dist).asin();
        self.for_beams_near(to_c.angle(), half, |k| {
            if let Some(t) = ray_circle(self.origin, self.dirs[k], center, radius) {
                if t < out[k] {
                    out[k] = t;
                }
            }
        });
    }

    fn segment(&self, s: &Segment, out: &mut [f64]) {
        if s.distance(self.origin) >= self.max_range {
            return;
        }
        let ra = s.a - self.origin;
        let rb = s.b - self.origin;
        let mut hit = |k: usize| {
            if let Some(t) = s.ray_hit(self.origin, self.dirs[k]) {
                if t < out[k] {
                    out[k] = t;
                }
            }
        };
        let cross = ra.cross(rb);
        if cross.abs() < 1e-12 * (ra.norm() * rb.norm()).max(1e-12) {
            // Origin on the supporting line: the span is degenerate, test everything.
            (0..self.n).for_each(hit);
            return;
        }
        let aa = ra.angle();
        let span = normalize_angle(rb.angle() - aa);
        let mid = aa + span / 2.0;
        self.for_beams_near(mid, span.abs() / 2.0, &mut hit);
    }
}

/// Reference implementation: every beam against every primitive.
pub fn raycast_brute_force(
    pose: &Pose,
    spec: &LidarSpec,
    obstacles: &ObstacleSet,
    others: &[(Vec2, f64)],
) -> Vec<f64> {
    let origin = spec.origin(pose);
    (0..spec.beam_count)
        .map(|k| {
            let dir = Vec2::from_angle(spec.beam_angle(pose.heading, k));
            let agents = others.iter().filter_map(|&(c, r)| ray_circle(origin, dir, c, r));
            let t = obstacles
                .ray_hit(origin, dir)
                .into_iter()
                .chain(agents)
                .fold(spec.max_range, f64::min);
            t.clamp(0.0, spec.max_range)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec() -> LidarSpec {
        LidarSpec::default()
    }

    #[test]
    fn empty_world_reads_max_range() {
        let r = raycast(&Pose::default(), &spec(), &ObstacleSet::new(), &[]);
        assert_eq!(r.len(), 512);
        assert!(r.iter().all(|&v| v == 4.0));
    }

    #[test]
    fn disc_straight_ahead() {
        let mut o = ObstacleSet::new();
        o.push_disc(Vec2::new(2.0, 0.0), 0.5);
        // Odd beam count puts a beam exactly on the heading.
        let s = LidarSpec {
            beam_count: 513,
            ..spec()
        };
        let r = raycast(&Pose::default(), &s, &o, &[]);
        assert!((r[256] - 1.5).abs() < 1e-12);
        // The two center beams of the 512-beam scanner straddle the heading.
        let r = raycast(&Pose::default(), &spec(), &o, &[]);
        let half_step = spec().step() / 2.0;
        let oc = 2.0 * half_step.cos();
        let expected = oc - (oc * oc - (4.0 - 0.25)).sqrt();
        assert!((r[255] - expected).abs() < 1e-12);
        assert!((r[256] - expected).abs() < 1e-12);
    }

    #[test]
    fn agent_behind_is_invisible() {
        let r = raycast(
            &Pose::default(),
            &spec(),
            &ObstacleSet::new(),
            &[(Vec2::new(-1.0, 0.0), 0.12)],
        );
        assert!(r.iter().all(|&v| v == 4.0));
    }

    #[test]
    fn beam_angles_cover_both_ends() {
        let s = spec();
        assert!((s.beam_angle(0.0, 0) + PI / 2.0).abs() < 1e-12);
        assert!((s.beam_angle(0.0, 511) - PI / 2.0).abs() < 1e-12);
    }

    #[test]
    fn inside_box_reads_zero() {
        let mut o = ObstacleSet::new();
        o.push_box(Vec2::new(-1.0, -1.0), Vec2::new(1.0, 1.0));
        let r = raycast(&Pose::default(), &spec(), &o, &[]);
        assert!(r.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn mount_offset_shifts_origin() {
        let mut o = ObstacleSet::new();
        o.push_disc(Vec2::new(2.0, 0.0), 0.5);
        let s = LidarSpec {
            beam_count: 3,
            mount_offset: 0.1,
            ..spec()
        };
        let r = raycast(&Pose::default(), &s, &o, &[]);
        assert!((r[1] - 1.4).abs() < 1e-12);
    }
}
