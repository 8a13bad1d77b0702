//! SVG rendering of trajectory logs.
//!
//! One polyline per agent, drawn as per-tick segments whose opacity grows
//! with time. Hybrid runs color each segment by the sub-policy that produced
//! it (red safe, green PID, blue learned); other runs give each agent its own
//! hue. Obstacles are black, goals yellow, final positions red.

use std::fmt::Write as _;

use mrca_core::eval::EpisodeLog;
use mrca_core::hybrid::SubPolicyKind;
use mrca_core::world::Vec2;

const SIZE: f64 = 800.0;
const MARGIN: f64 = 60.0;
const MIN_OPACITY: f64 = 0.15;

pub fn kind_color(kind: SubPolicyKind) -> &'static str {
    match kind {
        SubPolicyKind::Safe => "#d62728",
        SubPolicyKind::Pid => "#2ca02c",
        SubPolicyKind::Learned => "#1f77b4",
    }
}

fn agent_color(i: usize, n: usize) -> String {
    format!("hsl({:.1},70%,45%)", 360.0 * i as f64 / n.max(1) as f64)
}

struct Frame {
    min: Vec2,
    scale: f64,
    height: f64,
}

impl Frame {
    fn fit(points: &[Vec2]) -> Self {
        let (mut min, mut max) = (Vec2::new(-1.0, -1.0), Vec2::new(1.0, 1.0));
        if let Some(first) = points.first() {
            (min, max) = (*first, *first);
            for p in points {
                min = Vec2::new(min.x.min(p.x), min.y.min(p.y));
                max = Vec2::new(max.x.max(p.x), max.y.max(p.y));
            }
        }
        let pad = 0.5;
        min = Vec2::new(min.x - pad, min.y - pad);
        max = Vec2::new(max.x + pad, max.y + pad);
        let span = (max.x - min.x).max(max.y - min.y);
        let scale = (SIZE - 2.0 * MARGIN) / span;
        Self {
            min,
            scale,
            height: max.y - min.y,
        }
    }

    fn x(&self, x: f64) -> f64 {
        MARGIN + (x - self.min.x) * self.scale
    }

    fn y(&self, y: f64) -> f64 {
        MARGIN + (self.height - (y - self.min.y)) * self.scale
    }

    fn len(&self, l: f64) -> f64 {
        l * self.scale
    }
}

fn extent_points(log: &EpisodeLog) -> Vec<Vec2> {
    let mut pts: Vec<Vec2> = Vec::new();
    for a in &log.agents {
        pts.push(a.goal);
        pts.extend(a.steps.iter().map(|s| s.pose.position));
    }
    let o = &log.obstacles;
    for s in &o.segments {
        pts.extend([s.a, s.b]);
    }
    for d in &o.discs {
        pts.extend([d.center - Vec2::new(d.radius, d.radius), d.center + Vec2::new(d.radius, d.radius)]);
    }
    for b in &o.boxes {
        pts.extend([b.min, b.max]);
    }
    pts.retain(|p| p.is_finite());
    pts
}

fn axes(out: &mut String, f: &Frame) {
    let x0 = f.min.x;
    let y0 = f.min.y;
    let span = (SIZE - 2.0 * MARGIN) / f.scale;
    let bottom = f.y(y0);
    let left = f.x(x0);
    writeln!(
        out,
        r##"<g class="axes" stroke="#444" stroke-width="1" font-family="sans-serif" font-size="11" fill="#444">"##
    )
    .unwrap();
    writeln!(out, r#"<line x1="{left:.2}" y1="{bottom:.2}" x2="{:.2}" y2="{bottom:.2}"/>"#, f.x(x0 + span)).unwrap();
    writeln!(out, r#"<line x1="{left:.2}" y1="{bottom:.2}" x2="{left:.2}" y2="{:.2}"/>"#, f.y(y0 + span)).unwrap();
    let first = x0.ceil() as i64;
    let last = (x0 + span).floor() as i64;
    for v in first..=last {
        let x = f.x(v as f64);
        writeln!(out, r#"<line x1="{x:.2}" y1="{bottom:.2}" x2="{x:.2}" y2="{:.2}"/>"#, bottom + 5.0).unwrap();
        writeln!(out, r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle" stroke="none">{v}</text>"#, bottom + 18.0).unwrap();
    }
    for v in y0.ceil() as i64..=(y0 + span).floor() as i64 {
        let y = f.y(v as f64);
        writeln!(out, r#"<line x1="{:.2}" y1="{y:.2}" x2="{left:.2}" y2="{y:.2}"/>"#, left - 5.0).unwrap();
        writeln!(out, r#"<text x="{:.2}" y="{:.2}" text-anchor="end" stroke="none">{v}</text>"#, left - 8.0, y + 4.0).unwrap();
    }
    writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" stroke="none">x (m)</text>"#,
        SIZE / 2.0,
        SIZE - 12.0
    )
    .unwrap();
    writeln!(out, "</g>").unwrap();
}

pub fn render(log: &EpisodeLog) -> String {
    let f = Frame::fit(&extent_points(log));
    let mut out = String::new();
    writeln!(out, r#"<?xml version="1.0" encoding="UTF-8"?>"#).unwrap();
    writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">"#
    )
    .unwrap();
    writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#).unwrap();
    axes(&mut out, &f);

    writeln!(out, r#"<g class="obstacles" fill="black" stroke="black" stroke-width="2">"#).unwrap();
    for s in &log.obstacles.segments {
        writeln!(
            out,
            r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}"/>"#,
            f.x(s.a.x),
            f.y(s.a.y),
            f.x(s.b.x),
            f.y(s.b.y)
        )
        .unwrap();
    }
    for d in &log.obstacles.discs {
        writeln!(out, r#"<circle cx="{:.2}" cy="{:.2}" r="{:.2}"/>"#, f.x(d.center.x), f.y(d.center.y), f.len(d.radius)).unwrap();
    }
    for b in &log.obstacles.boxes {
        writeln!(
            out,
            r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}"/>"#,
            f.x(b.min.x),
            f.y(b.max.y),
            f.len(b.max.x - b.min.x),
            f.len(b.max.y - b.min.y)
        )
        .unwrap();
    }
    writeln!(out, "</g>").unwrap();

    let hybrid = log.agents.iter().flat_map(|a| &a.steps).any(|s| s.kind.is_some());
    let ticks = log.ticks().max(1) as f64;
    let n = log.agents.len();
    for (i, a) in log.agents.iter().enumerate() {
        writeln!(out, r#"<g class="trajectory" data-agent="{i}" stroke-width="2" stroke-linecap="round">"#).unwrap();
        let own = agent_color(i, n);
        for (k, w) in a.steps.windows(2).enumerate() {
            let color = match (hybrid, w[1].kind) {
                (true, Some(kind)) => kind_color(kind).to_string(),
                _ => own.clone(),
            };
            let opacity = MIN_OPACITY + (1.0 - MIN_OPACITY) * (k + 1) as f64 / ticks;
            let (p, q) = (w[0].pose.position, w[1].pose.position);
            writeln!(
                out,
                r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{color}" stroke-opacity="{opacity:.3}"/>"#,
                f.x(p.x),
                f.y(p.y),
                f.x(q.x),
                f.y(q.y)
            )
            .unwrap();
        }
        writeln!(out, "</g>").unwrap();
    }

    writeln!(out, r#"<g class="markers">"#).unwrap();
    for a in &log.agents {
        writeln!(
            out,
            r##"<circle cx="{:.2}" cy="{:.2}" r="4" fill="#f2c40f" stroke="#8a6d00"/>"##,
            f.x(a.goal.x),
            f.y(a.goal.y)
        )
        .unwrap();
        if let Some(last) = a.steps.last() {
            let p = last.pose.position;
            writeln!(
                out,
                r##"<circle cx="{:.2}" cy="{:.2}" r="{:.2}" fill="none" stroke="#d62728"/>"##,
                f.x(p.x),
                f.y(p.y),
                f.len(a.radius).max(2.0)
            )
            .unwrap();
        }
    }
    writeln!(out, "</g>").unwrap();

    if hybrid {
        writeln!(out, r#"<g class="legend" font-family="sans-serif" font-size="12">"#).unwrap();
        for (row, kind) in [SubPolicyKind::Safe, SubPolicyKind::Pid, SubPolicyKind::Learned].into_iter().enumerate() {
            let y = 20.0 + 16.0 * row as f64;
            writeln!(
                out,
                r#"<line x1="{:.1}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="{}" stroke-width="3"/><text x="{:.1}" y="{:.1}">{}</text>"#,
                SIZE - 140.0,
                SIZE - 115.0,
                kind_color(kind),
                SIZE - 108.0,
                y + 4.0,
                kind.as_str()
            )
            .unwrap();
        }
        writeln!(out, "</g>").unwrap();
    }
    writeln!(out, "</svg>").unwrap();
    out
}
