use serde::{Deserialize, Serialize};

use super::geometry::Vec2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub a: Vec2,
    pub b: Vec2,
}

impl Segment {
    pub fn new(a: Vec2, b: Vec2) -> Self {
        Self { a, b }
    }

    pub fn closest_point(&self, p: Vec2) -> Vec2 {
        let ab = self.b - self.a;
        let len_sq = ab.norm_sq();
        if len_sq == 0.0 {
            return self.a;
        }
        let t = ((p - self.a).dot(ab) / len_sq).clamp(0.0, 1.0);
        self.a + ab * t
    }

    pub fn distance(&self, p: Vec2) -> f64 {
        p.distance(self.closest_point(p))
    }

    /// Smallest `t >= 0` with `origin + t * dir` on the segment. `dir` must be unit length.
    pub fn ray_hit(&self, origin: Vec2, dir: Vec2) -> Option<f64> {
        let e = self.b - self.a;
        let denom = dir.cross(e);
        let w = self.a - origin;
        if denom.abs() < 1e-15 {
            // Parallel. Collinear overlap reports the nearest endpoint in front.
            if w.cross(dir).abs() > 1e-12 {
                return None;
            }
            let ta = w.dot(dir);
            let tb = (self.b - origin).dot(dir);
            let (lo, hi) = if ta <= tb { (ta, tb) } else { (tb, ta) };
            if hi < 0.0 {
                return None;
            }
            return Some(lo.max(0.0));
        }
        let t = w.cross(e) / denom;
        let u = w.cross(dir) / denom;
        if t >= 0.0 && (0.0..=1.0).contains(&u) {
            Some(t)
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Disc {
    pub center: Vec2,
    pub radius: f64,
}

impl Disc {
    pub fn new(center: Vec2, radius: f64) -> Self {
        Self { center, radius }
    }

    /// Signed distance from `p` to the disc boundary (negative inside).
    pub fn signed_distance(&self, p: Vec2) -> f64 {
        p.distance(self.center) - self.radius
    }

    /// Entry distance of a ray into the solid disc; 0 when the origin is inside.
    pub fn ray_hit(&self, origin: Vec2, dir: Vec2) -> Option<f64> {
        ray_circle(origin, dir, self.center, self.radius)
    }
}

/// Ray/solid-circle intersection with a unit `dir`.
pub fn ray_circle(origin: Vec2, dir: Vec2, center: Vec2, radius: f64) -> Option<f64> {
    let oc = origin - center;
    let c = oc.norm_sq() - radius * radius;
    if c <= 0.0 {
        return Some(0.0);
    }
    let b = oc.dot(dir);
    if b >= 0.0 {
        return None;
    }
    let disc = b * b - c;
    if disc < 0.0 {
        return None;
    }
    // Numerically stable smaller root: c / q with q = -b + sqrt(disc).
    let q = -b + disc.sqrt();
    Some(c / q)
}

/// Axis-aligned rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AaBox {
    pub min: Vec2,
    pub max: Vec2,
}

impl AaBox {
    pub fn new(min: Vec2, max: Vec2) -> Self {
        Self { min, max }
    }

    pub fn from_center(center: Vec2, half_w: f64, half_h: f64) -> Self {
        Self {
            min: Vec2::new(center.x - half_w, center.y - half_h),
            max: Vec2::new(center.x + half_w, center.y + half_h),
        }
    }

    pub fn contains(&self, p: Vec2) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }

    pub fn center(&self) -> Vec2 {
        (self.min + self.max) * 0.5
    }

    /// Signed distance to the boundary (negative inside).
    pub fn signed_distance(&self, p: Vec2) -> f64 {
        let c = self.center();
        let h = (self.max - self.min) * 0.5;
        let dx = (p.x - c.x).abs() - h.x;
        let dy = (p.y - c.y).abs() - h.y;
        let outside = Vec2::new(dx.max(0.0), dy.max(0.0)).norm();
        outside + dx.max(dy).min(0.0)
    }

    pub fn edges(&self) -> [Segment; 4] {
        let (lo, hi) = (self.min, self.max);
        let c1 = Vec2::new(hi.x, lo.y);
        let c3 = Vec2::new(lo.x, hi.y);
        [
            Segment::new(lo, c1),
            Segment::new(c1, hi),
            Segment::new(hi, c3),
            Segment::new(c3, lo),
        ]
    }

    /// Slab-method entry distance; 0 when the origin is inside.
    pub fn ray_hit(&self, origin: Vec2, dir: Vec2) -> Option<f64> {
        if self.contains(origin) {
            return Some(0.0);
        }
        let mut t_min = f64::NEG_INFINITY;
        let mut t_max = f64::INFINITY;
        for (o, d, lo, hi) in [
            (origin.x, dir.x, self.min.x, self.max.x),
            (origin.y, dir.y, self.min.y, self.max.y),
        ] {
            if d.abs() < 1e-15 {
                if o < lo || o > hi {
                    return None;
                }
            } else {
                let t1 = (lo - o) / d;
                let t2 = (hi - o) / d;
                let (a, b) = if t1 < t2 { (t1, t2) } else { (t2, t1) };
                t_min = t_min.max(a);
                t_max = t_max.min(b);
            }
        }
        if t_max < t_min.max(0.0) {
            None
        } else {
            Some(t_min.max(0.0))
        }
    }
}

/// Static obstacles of a scene.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ObstacleSet {
    pub segments: Vec<Segment>,
    pub discs: Vec<Disc>,
    pub boxes: Vec<AaBox>,
}

impl ObstacleSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty() && self.discs.is_empty() && self.boxes.is_empty()
    }

    pub fn push_segment(&mut self, a: Vec2, b: Vec2) {
        self.segments.push(Segment::new(a, b));
    }

    /// Adds the four walls of a `[min, max]` rectangle as segments.
    pub fn push_walls(&mut self, min: Vec2, max: Vec2) {
        self.segments.extend(AaBox::new(min, max).edges());
    }

    pub fn push_disc(&mut self, center: Vec2, radius: f64) {
        self.discs.push(Disc::new(center, radius));
    }

    pub fn push_box(&mut self, min: Vec2, max: Vec2) {
        self.boxes.push(AaBox::new(min, max));
    }

    /// Checks radii and box extents.
    pub fn validate(&self) -> Result<(), String> {
        if let Some(d) = self.discs.iter().find(|d| !(d.radius > 0.0)) {
            return Err(format!("disc obstacle radius must be > 0, got {}", d.radius));
        }
        if let Some(b) = self
            .boxes
            .iter()
            .find(|b| !(b.min.x < b.max.x && b.min.y < b.max.y))
        {
            return Err(format!("box obstacle needs min < max per axis, got {:?}", b));
        }
        Ok(())
    }

    /// Signed distance from `p` to the nearest obstacle surface; `f64::MAX` if empty.
    pub fn distance(&self, p: Vec2) -> f64 {
        let seg = self.segments.iter().map(|s| s.distance(p));
        let disc = self.discs.iter().map(|d| d.signed_distance(p));
        let bx = self.boxes.iter().map(|b| b.signed_distance(p));
        seg.chain(disc).chain(bx).fold(f64::MAX, f64::min)
    }

    /// Nearest hit of a ray over all primitives, brute force.
    pub fn ray_hit(&self, origin: Vec2, dir: Vec2) -> Option<f64> {
        let seg = self.segments.iter().filter_map(|s| s.ray_hit(origin, dir));
        let disc = self.discs.iter().filter_map(|d| d.ray_hit(origin, dir));
        let bx = self.boxes.iter().filter_map(|b| b.ray_hit(origin, dir));
        seg.chain(disc).chain(bx).reduce(f64::min)
    }

    /// Applies a rigid rotation about the origin. Boxes stay axis-aligned, so they
    /// are converted to their four edge segments.
    pub fn rotated(&self, angle: f64) -> ObstacleSet {
        let mut out = ObstacleSet::new();
        let segs = self
            .segments
            .iter()
            .copied()
            .chain(self.boxes.iter().flat_map(|b| b.edges()));
        for s in segs {
            out.push_segment(s.a.rotated(angle), s.b.rotated(angle));
        }
        for d in &self.discs {
            out.push_disc(d.center.rotated(angle), d.radius);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn segment_distance_and_ray() {
        let s = Segment::new(Vec2::new(-1.0, 1.0), Vec2::new(1.0, 1.0));
        assert!((s.distance(Vec2::new(0.0, 0.9)) - 0.1).abs() < 1e-12);
        assert!((s.distance(Vec2::new(2.0, 1.0)) - 1.0).abs() < 1e-12);
        let t = s.ray_hit(Vec2::ZERO, Vec2::new(0.0, 1.0)).unwrap();
        assert!((t - 1.0).abs() < 1e-12);
        assert!(s.ray_hit(Vec2::ZERO, Vec2::new(0.0, -1.0)).is_none());
        assert!(s.ray_hit(Vec2::ZERO, Vec2::new(1.0, 0.0)).is_none());
    }

    #[test]
    fn circle_ray() {
        let t = ray_circle(Vec2::ZERO, Vec2::new(1.0, 0.0), Vec2::new(2.0, 0.0), 0.5).unwrap();
        assert!((t - 1.5).abs() < 1e-12);
        assert!(ray_circle(Vec2::ZERO, Vec2::new(-1.0, 0.0), Vec2::new(2.0, 0.0), 0.5).is_none());
        assert_eq!(ray_circle(Vec2::ZERO, Vec2::new(1.0, 0.0), Vec2::ZERO, 0.5), Some(0.0));
    }

    #[test]
    fn box_distance_and_ray() {
        let b = AaBox::new(Vec2::new(1.0, -1.0), Vec2::new(2.0, 1.0));
        assert!((b.signed_distance(Vec2::ZERO) - 1.0).abs() < 1e-12);
        assert!((b.signed_distance(Vec2::new(1.5, 0.0)) + 0.5).abs() < 1e-12);
        assert!((b.signed_distance(Vec2::new(3.0, 2.0)) - 2f64.sqrt()).abs() < 1e-12);
        let t = b.ray_hit(Vec2::ZERO, Vec2::new(1.0, 0.0)).unwrap();
        assert!((t - 1.0).abs() < 1e-12);
        assert!(b.ray_hit(Vec2::ZERO, Vec2::new(0.0, 1.0)).is_none());
    }

    #[test]
    fn validate_rejects_bad_primitives() {
        let mut o = ObstacleSet::new();
        o.push_disc(Vec2::ZERO, 0.0);
        assert!(o.validate().is_err());
        let mut o = ObstacleSet::new();
        o.push_box(Vec2::new(1.0, 0.0), Vec2::new(0.0, 1.0));
        assert!(o.validate().is_err());
    }
}
