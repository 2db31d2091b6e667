//! Planar geometry for the course simulator: points, convex polygons,
//! signed distances and ray casts.

use std::f64::consts::PI;
use std::ops::{Add, Mul, Sub};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn from_angle(theta: f64) -> Self {
        let (s, c) = theta.sin_cos();
        Self::new(c, s)
    }

    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    pub fn cross(self, o: Vec2) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn distance(self, o: Vec2) -> f64 {
        (self - o).norm()
    }

    pub fn angle(self) -> f64 {
        self.y.atan2(self.x)
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, k: f64) -> Vec2 {
        Vec2::new(self.x * k, self.y * k)
    }
}

/// Position and heading in the world frame. Heading is radians, CCW from +x.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
}

impl Pose {
    pub const fn new(x: f64, y: f64, heading: f64) -> Self {
        Self { x, y, heading }
    }

    pub fn position(&self) -> Vec2 {
        Vec2::new(self.x, self.y)
    }

    pub fn forward(&self) -> Vec2 {
        Vec2::from_angle(self.heading)
    }
}

/// Wraps an angle into (-pi, pi].
pub fn normalize_angle(theta: f64) -> f64 {
    let mut a = theta % (2.0 * PI);
    if a <= -PI {
        a += 2.0 * PI;
    } else if a > PI {
        a -= 2.0 * PI;
    }
    a
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min_x: f64,
    pub min_y: f64,
    pub max_x: f64,
    pub max_y: f64,
}

impl Aabb {
    pub fn width(&self) -> f64 {
        self.max_x - self.min_x
    }

    pub fn height(&self) -> f64 {
        self.max_y - self.min_y
    }

    pub fn contains(&self, p: Vec2) -> bool {
        p.x >= self.min_x && p.x <= self.max_x && p.y >= self.min_y && p.y <= self.max_y
    }

    /// True when a disc of `radius` at `p` lies entirely inside the box.
    pub fn contains_disc(&self, p: Vec2, radius: f64) -> bool {
        p.x - radius >= self.min_x
            && p.x + radius <= self.max_x
            && p.y - radius >= self.min_y
            && p.y + radius <= self.max_y
    }

    /// Distance from an interior point to the nearest side.
    pub fn inner_clearance(&self, p: Vec2) -> f64 {
        (p.x - self.min_x)
            .min(self.max_x - p.x)
            .min(p.y - self.min_y)
            .min(self.max_y - p.y)
    }

    /// Exit distance of a ray that starts inside the box.
    pub fn ray_exit(&self, origin: Vec2, dir: Vec2) -> f64 {
        let mut t = f64::INFINITY;
        if dir.x > 0.0 {
            t = t.min((self.max_x - origin.x) / dir.x);
        } else if dir.x < 0.0 {
            t = t.min((self.min_x - origin.x) / dir.x);
        }
        if dir.y > 0.0 {
            t = t.min((self.max_y - origin.y) / dir.y);
        } else if dir.y < 0.0 {
            t = t.min((self.min_y - origin.y) / dir.y);
        }
        t.max(0.0)
    }
}

/// Convex polygon with counter-clockwise vertices.
#[derive(Debug, Clone, PartialEq)]
pub struct Polygon {
    vertices: Vec<Vec2>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PolygonError {
    TooFewVertices(usize),
    NotConvex,
    NonFinite,
}

impl Polygon {
    /// Builds a convex polygon, reorienting clockwise input.
    pub fn new(mut vertices: Vec<Vec2>) -> Result<Self, PolygonError> {
        if vertices.len() < 3 {
            return Err(PolygonError::TooFewVertices(vertices.len()));
        }
        if vertices.iter().any(|v| !v.x.is_finite() || !v.y.is_finite()) {
            return Err(PolygonError::NonFinite);
        }
        let area2: f64 = (0..vertices.len())
            .map(|i| vertices[i].cross(vertices[(i + 1) % vertices.len()]))
            .sum();
        if area2.abs() < 1e-12 {
            return Err(PolygonError::NotConvex);
        }
        if area2 < 0.0 {
            vertices.reverse();
        }
        let n = vertices.len();
        for i in 0..n {
            let a = vertices[i];
            let b = vertices[(i + 1) % n];
            let c = vertices[(i + 2) % n];
            if (b - a).cross(c - b) < -1e-12 {
                return Err(PolygonError::NotConvex);
            }
        }
        Ok(Self { vertices })
    }

    /// Axis-aligned rectangle with lower-left corner `(x, y)`.
    pub fn rect(x: f64, y: f64, w: f64, h: f64) -> Result<Self, PolygonError> {
        if !(w > 0.0 && h > 0.0) {
            return Err(PolygonError::NotConvex);
        }
        Self::new(vec![
            Vec2::new(x, y),
            Vec2::new(x + w, y),
            Vec2::new(x + w, y + h),
            Vec2::new(x, y + h),
        ])
    }

    pub fn vertices(&self) -> &[Vec2] {
        &self.vertices
    }

    pub fn edges(&self) -> impl Iterator<Item = (Vec2, Vec2)> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }

    pub fn contains(&self, p: Vec2) -> bool {
        self.edges().all(|(a, b)| (b - a).cross(p - a) >= 0.0)
    }

    pub fn bounding_box(&self) -> Aabb {
        let mut bb = Aabb {
            min_x: f64::INFINITY,
            min_y: f64::INFINITY,
            max_x: f64::NEG_INFINITY,
            max_y: f64::NEG_INFINITY,
        };
        for v in &self.vertices {
            bb.min_x = bb.min_x.min(v.x);
            bb.min_y = bb.min_y.min(v.y);
            bb.max_x = bb.max_x.max(v.x);
            bb.max_y = bb.max_y.max(v.y);
        }
        bb
    }

    /// Distance to the boundary, negative for interior points.
    pub fn signed_distance(&self, p: Vec2) -> f64 {
        let d = self
            .edges()
            .map(|(a, b)| point_segment_distance(p, a, b))
            .fold(f64::INFINITY, f64::min);
        if self.contains(p) {
            -d
        } else {
            d
        }
    }

    /// Outward unit normal of the edge nearest to `p`.
    pub fn nearest_edge_normal(&self, p: Vec2) -> Vec2 {
        let mut best = (f64::INFINITY, Vec2::new(1.0, 0.0));
        for (a, b) in self.edges() {
            let d = point_segment_distance(p, a, b);
            if d < best.0 {
                let e = b - a;
                let len = e.norm();
                best = (d, Vec2::new(e.y / len, -e.x / len));
            }
        }
        best.1
    }

    /// Smallest `t >= 0` at which `origin + t * dir` meets the boundary.
    /// A ray starting inside reports its exit point.
    pub fn ray_hit(&self, origin: Vec2, dir: Vec2) -> Option<f64> {
        self.edges()
            .filter_map(|(a, b)| ray_segment(origin, dir, a, b))
            .fold(None, |acc: Option<f64>, t| Some(acc.map_or(t, |m| m.min(t))))
    }

    /// True when the segment `p -> q` crosses or touches the polygon.
    pub fn intersects_segment(&self, p: Vec2, q: Vec2) -> bool {
        if self.contains(p) || self.contains(q) {
            return true;
        }
        let d = q - p;
        let len = d.norm();
        if len == 0.0 {
            return false;
        }
        matches!(self.ray_hit(p, d * (1.0 / len)), Some(t) if t <= len)
    }
}

pub fn point_segment_distance(p: Vec2, a: Vec2, b: Vec2) -> f64 {
    let ab = b - a;
    let len2 = ab.dot(ab);
    let t = if len2 > 0.0 { ((p - a).dot(ab) / len2).clamp(0.0, 1.0) } else { 0.0 };
    p.distance(a + ab * t)
}

/// Ray/segment intersection parameter along a unit-length ray.
fn ray_segment(origin: Vec2, dir: Vec2, a: Vec2, b: Vec2) -> Option<f64> {
    let e = b - a;
    let denom = dir.cross(e);
    if denom.abs() < 1e-15 {
        return None;
    }
    let w = a - origin;
    let t = w.cross(e) / denom;
    let u = w.cross(dir) / denom;
    if t >= 0.0 && (-1e-12..=1.0 + 1e-12).contains(&u) {
        Some(t)
    } else {
        None
    }
}

/// Entry distance of a unit ray into a circle, or 0 when starting inside.
pub fn ray_circle(origin: Vec2, dir: Vec2, center: Vec2, radius: f64) -> Option<f64> {
    let oc = origin - center;
    let b = oc.dot(dir);
    let c = oc.dot(oc) - radius * radius;
    if c <= 0.0 {
        return Some(0.0);
    }
    let disc = b * b - c;
    if disc < 0.0 {
        return None;
    }
    let t = -b - disc.sqrt();
    (t >= 0.0).then_some(t)
}
