use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{Result, SimError};

pub type Point = (f64, f64);

/// Wraps an angle into `(-π, π]`.
pub fn wrap_angle(a: f64) -> f64 {
    let mut r = a.rem_euclid(2.0 * PI);
    if r > PI {
        r -= 2.0 * PI;
    }
    r
}

fn rotate((x, y): Point, angle: f64) -> Point {
    let (s, c) = angle.sin_cos();
    (c * x - s * y, s * x + c * y)
}

/// A rigid motion: rotation about the origin followed by a translation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rigid {
    pub rotation: f64,
    pub translation: Point,
}

impl Rigid {
    pub fn apply(&self, p: Point) -> Point {
        let (x, y) = rotate(p, self.rotation);
        (x + self.translation.0, y + self.translation.1)
    }
}

/// One piece of a centerline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Segment {
    Line { start: Point, end: Point },
    /// Counter-clockwise for a positive `sweep`, clockwise for a negative one.
    Arc { center: Point, radius: f64, start_angle: f64, sweep: f64 },
}

impl Segment {
    pub fn length(&self) -> f64 {
        match *self {
            Segment::Line { start, end } => (end.0 - start.0).hypot(end.1 - start.1),
            Segment::Arc { radius, sweep, .. } => radius * sweep.abs(),
        }
    }

    /// Position and heading at arc length `s` from the segment start.
    pub fn pose_at(&self, s: f64) -> (Point, f64) {
        match *self {
            Segment::Line { start, end } => {
                let len = self.length();
                let h = (end.1 - start.1).atan2(end.0 - start.0);
                let t = s / len;
                ((start.0 + t * (end.0 - start.0), start.1 + t * (end.1 - start.1)), h)
            }
            Segment::Arc {
                center,
                radius,
                start_angle,
                sweep,
            } => {
                let dir = sweep.signum();
                let a = start_angle + dir * s / radius;
                let p = (center.0 + radius * a.cos(), center.1 + radius * a.sin());
                (p, wrap_angle(a + dir * PI / 2.0))
            }
        }
    }

    fn end(&self) -> Point {
        self.pose_at(self.length()).0
    }

    /// Arc length of the closest point and the distance to it.
    fn closest(&self, p: Point) -> (f64, f64) {
        match *self {
            Segment::Line { start, end } => {
                let (dx, dy) = (end.0 - start.0, end.1 - start.1);
                let len2 = dx * dx + dy * dy;
                let t = (((p.0 - start.0) * dx + (p.1 - start.1) * dy) / len2).clamp(0.0, 1.0);
                let (fx, fy) = (start.0 + t * dx, start.1 + t * dy);
                (t * len2.sqrt(), (p.0 - fx).hypot(p.1 - fy))
            }
            Segment::Arc {
                center,
                radius,
                start_angle,
                sweep,
            } => {
                let (rx, ry) = (p.0 - center.0, p.1 - center.1);
                let offset = wrap_angle(ry.atan2(rx) - start_angle) * sweep.signum();
                let offset = if offset < 0.0 { offset + 2.0 * PI } else { offset };
                if offset <= sweep.abs() {
                    (offset * radius, (rx.hypot(ry) - radius).abs())
                } else {
                    let (s0, e) = (self.pose_at(0.0).0, self.end());
                    let d0 = (p.0 - s0.0).hypot(p.1 - s0.1);
                    let d1 = (p.0 - e.0).hypot(p.1 - e.1);
                    if d0 <= d1 {
                        (0.0, d0)
                    } else {
                        (self.length(), d1)
                    }
                }
            }
        }
    }

    fn transformed(&self, m: &Rigid) -> Segment {
        match *self {
            Segment::Line { start, end } => Segment::Line {
                start: m.apply(start),
                end: m.apply(end),
            },
            Segment::Arc {
                center,
                radius,
                start_angle,
                sweep,
            } => Segment::Arc {
                center: m.apply(center),
                radius,
                start_angle: start_angle + m.rotation,
                sweep,
            },
        }
    }
}

/// Foot of the perpendicular from a point onto a path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    /// Arc length from the path start.
    pub s: f64,
    /// Distance to the path, positive on the left of the direction of travel.
    pub lateral: f64,
}

/// A continuous chain of segments parameterized by arc length.
#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    segments: Vec<Segment>,
    offsets: Vec<f64>,
}

impl Path {
    pub fn new(segments: Vec<Segment>) -> Result<Self> {
        if segments.is_empty() {
            return Err(SimError::InvalidScenario("empty path".into()));
        }
        for (i, seg) in segments.iter().enumerate() {
            let len = seg.length();
            if !(len > 0.0) || !len.is_finite() {
                return Err(SimError::InvalidScenario(format!("segment {i} has length {len}")));
            }
            if let Some(prev) = i.checked_sub(1).map(|j| segments[j]) {
                let (a, b) = (prev.end(), seg.pose_at(0.0).0);
                if (a.0 - b.0).hypot(a.1 - b.1) > 1e-6 {
                    return Err(SimError::InvalidScenario(format!("segment {i} does not start where {} ends", i - 1)));
                }
            }
        }
        let mut offsets = Vec::with_capacity(segments.len());
        let mut acc = 0.0;
        for seg in &segments {
            offsets.push(acc);
            acc += seg.length();
        }
        Ok(Self { segments, offsets })
    }

    /// Straight-line chain through `points`.
    pub fn polyline(points: &[Point]) -> Result<Self> {
        Self::new(points.windows(2).map(|w| Segment::Line { start: w[0], end: w[1] }).collect())
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn length(&self) -> f64 {
        self.offsets.last().unwrap() + self.segments.last().unwrap().length()
    }

    /// Position and heading at arc length `s`, clamped to the path.
    pub fn pose_at(&self, s: f64) -> (Point, f64) {
        let s = s.clamp(0.0, self.length());
        let i = self.offsets.partition_point(|&o| o <= s).saturating_sub(1);
        self.segments[i].pose_at((s - self.offsets[i]).min(self.segments[i].length()))
    }

    pub fn project(&self, p: Point) -> Projection {
        let mut best = (f64::INFINITY, 0.0, 0usize);
        for (i, seg) in self.segments.iter().enumerate() {
            let (s, d) = seg.closest(p);
            if d < best.0 {
                best = (d, s, i);
            }
        }
        let (dist, local, i) = best;
        let ((fx, fy), h) = self.segments[i].pose_at(local);
        let side = h.cos() * (p.1 - fy) - h.sin() * (p.0 - fx);
        Projection {
            s: self.offsets[i] + local,
            lateral: if side < 0.0 { -dist } else { dist },
        }
    }

    pub fn transformed(&self, m: &Rigid) -> Path {
        Path {
            segments: self.segments.iter().map(|s| s.transformed(m)).collect(),
            offsets: self.offsets.clone(),
        }
    }
}

/// An oriented rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub center: Point,
    pub heading: f64,
    pub half_length: f64,
    pub half_width: f64,
}

impl Rect {
    /// Point in the rectangle's own frame.
    pub fn to_local(&self, p: Point) -> Point {
        rotate((p.0 - self.center.0, p.1 - self.center.1), -self.heading)
    }

    pub fn contains(&self, p: Point) -> bool {
        let (x, y) = self.to_local(p);
        x.abs() <= self.half_length && y.abs() <= self.half_width
    }

    pub fn corners(&self) -> [Point; 4] {
        let (l, w) = (self.half_length, self.half_width);
        [(l, w), (-l, w), (-l, -w), (l, -w)].map(|c| {
            let (x, y) = rotate(c, self.heading);
            (x + self.center.0, y + self.center.1)
        })
    }

    /// Separating-axis test; touching rectangles overlap.
    pub fn overlaps(&self, other: &Rect) -> bool {
        let (a, b) = (self.corners(), other.corners());
        for h in [self.heading, other.heading] {
            for axis in [(h.cos(), h.sin()), (-h.sin(), h.cos())] {
                let proj = |pts: &[Point; 4]| {
                    pts.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
                        let v = p.0 * axis.0 + p.1 * axis.1;
                        (lo.min(v), hi.max(v))
                    })
                };
                let ((alo, ahi), (blo, bhi)) = (proj(&a), proj(&b));
                if ahi < blo || bhi < alo {
                    return false;
                }
            }
        }
        true
    }

    pub fn transformed(&self, m: &Rigid) -> Rect {
        Rect {
            center: m.apply(self.center),
            heading: wrap_angle(self.heading + m.rotation),
            ..*self
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wrap_range() {
        assert_eq!(wrap_angle(PI), PI);
        assert!((wrap_angle(-PI) - PI).abs() < 1e-15);
        assert!((wrap_angle(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-12);
    }

    #[test]
    fn line_projection_sign() {
        let p = Path::polyline(&[(0.0, 0.0), (10.0, 0.0)]).unwrap();
        let pr = p.project((3.0, 0.5));
        assert!((pr.s - 3.0).abs() < 1e-12 && (pr.lateral - 0.5).abs() < 1e-12);
        assert!((p.project((3.0, -0.5)).lateral + 0.5).abs() < 1e-12);
    }

    #[test]
    fn arc_projection() {
        // Right turn: clockwise quarter circle from (0, 0) heading east.
        let p = Path::new(vec![Segment::Arc {
            center: (0.0, -10.0),
            radius: 10.0,
            start_angle: PI / 2.0,
            sweep: -PI / 2.0,
        }])
        .unwrap();
        let ((x, y), h) = p.pose_at(p.length());
        assert!((x - 10.0).abs() < 1e-9 && (y + 10.0).abs() < 1e-9 && (h + PI / 2.0).abs() < 1e-9);
        let a = PI / 4.0;
        let pr = p.project((11.0 * a.cos(), -10.0 + 11.0 * a.sin()));
        assert!((pr.s - 10.0 * PI / 4.0).abs() < 1e-9);
        // Outside a right turn is on the left.
        assert!((pr.lateral - 1.0).abs() < 1e-9);
    }

    #[test]
    fn discontinuous_path_rejected() {
        let r = Path::new(vec![
            Segment::Line { start: (0.0, 0.0), end: (1.0, 0.0) },
            Segment::Line { start: (2.0, 0.0), end: (3.0, 0.0) },
        ]);
        assert!(r.is_err());
    }

    #[test]
    fn rect_overlap_cases() {
        let a = Rect { center: (0.0, 0.0), heading: 0.0, half_length: 2.0, half_width: 1.0 };
        let mut b = Rect { center: (4.5, 0.0), ..a };
        assert!(!a.overlaps(&b));
        b.center.0 = 3.9;
        assert!(a.overlaps(&b));
        b.heading = PI / 4.0;
        b.center = (0.0, 3.5);
        assert!(!a.overlaps(&b));
    }
}
