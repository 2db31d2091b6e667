//! Egocentric view rendering: a fan of semantic rays over the field of view,
//! a goal visibility test, and an optional first-person raster.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::course::{CourseSpec, ObstacleClass};
use crate::geometry::{normalize_angle, ray_circle, Vec2};
use crate::world::RobotState;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ViewConfig {
    /// Full horizontal field of view in radians.
    pub fov: f64,
    pub rays: usize,
    pub max_range: f64,
    /// Raster size in pixels, when an image should be produced.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raster: Option<(u32, u32)>,
}

impl Default for ViewConfig {
    fn default() -> Self {
        Self {
            fov: std::f64::consts::FRAC_PI_2,
            rays: 64,
            max_range: 5.0,
            raster: None,
        }
    }
}

impl ViewConfig {
    pub const DEFAULT_RASTER: (u32, u32) = (256, 256);

    pub fn with_raster(mut self) -> Self {
        self.raster = Some(Self::DEFAULT_RASTER);
        self
    }

    /// Bearing of ray `i`, sweeping from the right edge to the left edge.
    pub fn bearing(&self, i: usize) -> f64 {
        if self.rays <= 1 {
            return 0.0;
        }
        -self.fov / 2.0 + self.fov * i as f64 / (self.rays - 1) as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HitClass {
    Free,
    Wall,
    LowOverhang,
    Step,
    Goal,
}

impl HitClass {
    fn from_obstacle(class: ObstacleClass) -> Self {
        match class {
            ObstacleClass::Wall => HitClass::Wall,
            ObstacleClass::LowOverhang => HitClass::LowOverhang,
            ObstacleClass::Step => HitClass::Step,
            ObstacleClass::GoalMarker => HitClass::Goal,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            HitClass::Free => "free",
            HitClass::Wall => "wall",
            HitClass::LowOverhang => "overhang",
            HitClass::Step => "step",
            HitClass::Goal => "goal",
        }
    }

    /// Blocks a normal walk.
    pub fn is_obstacle(self) -> bool {
        matches!(self, HitClass::Wall | HitClass::LowOverhang | HitClass::Step)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ray {
    /// Radians relative to the heading, positive to the left.
    pub bearing: f64,
    /// Hit distance, or the configured max range when nothing was hit.
    pub distance: f64,
    pub class: HitClass,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Raster {
    pub width: u32,
    pub height: u32,
    /// Row-major RGB8.
    pub pixels: Vec<u8>,
}

impl Raster {
    pub fn to_png(&self) -> Vec<u8> {
        let mut out = Vec::new();
        {
            let mut enc = png::Encoder::new(&mut out, self.width, self.height);
            enc.set_color(png::ColorType::Rgb);
            enc.set_depth(png::BitDepth::Eight);
            let mut writer = enc.write_header().expect("in-memory png header");
            writer.write_image_data(&self.pixels).expect("in-memory png data");
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub rays: Vec<Ray>,
    pub goal_visible: bool,
    /// Meaningful only when `goal_visible`.
    pub goal_bearing: f64,
    /// Not persisted; re-rendered on demand.
    #[serde(skip)]
    pub raster: Option<Raster>,
}

impl Observation {
    /// Text form of the semantic record, for text-only consumers.
    pub fn semantic_text(&self) -> String {
        let mut out = String::new();
        if self.goal_visible {
            let _ = writeln!(out, "goal: visible at bearing {:+.3} rad", self.goal_bearing);
        } else {
            out.push_str("goal: not visible\n");
        }
        out.push_str("rays (bearing rad, distance m, class):");
        for r in &self.rays {
            let _ = write!(out, " {:+.3}:{:.2}:{}", r.bearing, r.distance, r.class.label());
        }
        out
    }
}

fn cast(origin: Vec2, heading: f64, bearing: f64, course: &CourseSpec, max_range: f64) -> (f64, HitClass) {
    let dir = Vec2::from_angle(heading + bearing);
    let mut best = (course.bounds.ray_exit(origin, dir), HitClass::Wall);
    // an overhang or step the robot is already under or on does not occlude
    for o in course.obstacles.iter().filter(|o| !o.shape.contains(origin)) {
        if let Some(t) = o.shape.ray_hit(origin, dir) {
            if t < best.0 {
                best = (t, HitClass::from_obstacle(o.class));
            }
        }
    }
    if let Some(t) = ray_circle(origin, dir, course.goal.center, course.goal.radius) {
        if t < best.0 {
            best = (t, HitClass::Goal);
        }
    }
    if best.0 > max_range {
        (max_range, HitClass::Free)
    } else {
        best
    }
}

/// True when the straight line to the goal centre is within view and not
/// blocked by any non-landmark obstacle.
fn goal_in_view(state: &RobotState, course: &CourseSpec, cfg: &ViewConfig) -> Option<f64> {
    let origin = state.pose.position();
    let to_goal = course.goal.center - origin;
    let dist = to_goal.norm();
    if dist > cfg.max_range {
        return None;
    }
    let bearing = if dist == 0.0 { 0.0 } else { normalize_angle(to_goal.angle() - state.pose.heading) };
    if bearing.abs() > cfg.fov / 2.0 {
        return None;
    }
    let occluded = course
        .obstacles
        .iter()
        .filter(|o| o.class != ObstacleClass::GoalMarker)
        .any(|o| o.shape.intersects_segment(origin, course.goal.center));
    (!occluded).then_some(bearing)
}

pub fn render_observation(state: &RobotState, course: &CourseSpec, cfg: &ViewConfig) -> Observation {
    let origin = state.pose.position();
    let rays = (0..cfg.rays)
        .map(|i| {
            let bearing = cfg.bearing(i);
            let (distance, class) = cast(origin, state.pose.heading, bearing, course, cfg.max_range);
            Ray { bearing, distance, class }
        })
        .collect();
    let goal = goal_in_view(state, course, cfg);
    let raster = cfg.raster.map(|(w, h)| render_raster(state, course, cfg, w, h));
    Observation {
        rays,
        goal_visible: goal.is_some(),
        goal_bearing: goal.unwrap_or(0.0),
        raster,
    }
}

const SKY: [u8; 3] = [170, 200, 235];
const FLOOR: [u8; 3] = [118, 128, 104];

fn class_color(class: HitClass) -> [u8; 3] {
    match class {
        HitClass::Free => FLOOR,
        HitClass::Wall => [120, 120, 125],
        HitClass::LowOverhang => [130, 84, 48],
        HitClass::Step => [196, 160, 90],
        HitClass::Goal => [220, 30, 30],
    }
}

/// Column-per-ray pinhole rendering. Each class occupies a characteristic
/// vertical band: walls full height, overhangs leave a gap at the floor,
/// steps are a low band, the goal is a small blob on the floor.
fn render_raster(state: &RobotState, course: &CourseSpec, cfg: &ViewConfig, width: u32, height: u32) -> Raster {
    let (w, h) = (width as usize, height as usize);
    let mut pixels = vec![0u8; w * h * 3];
    let horizon = h as f64 / 2.0;
    let focal = (w as f64 / 2.0) / (cfg.fov / 2.0).tan();
    let origin = state.pose.position();
    for col in 0..w {
        let offset = (w as f64 / 2.0) - (col as f64 + 0.5);
        let bearing = (offset / focal).atan();
        let (dist, class) = cast(origin, state.pose.heading, bearing, course, cfg.max_range);
        let depth = (dist * bearing.cos()).max(0.05);
        let scale = focal / depth;
        let (top, bottom) = match class {
            HitClass::Free => (horizon, horizon),
            HitClass::Wall => (horizon - 1.2 * scale, horizon + 0.4 * scale),
            HitClass::LowOverhang => (horizon - 0.2 * scale, horizon + 0.2 * scale),
            HitClass::Step => (horizon + 0.25 * scale, horizon + 0.4 * scale),
            HitClass::Goal => (horizon + 0.32 * scale, horizon + 0.4 * scale),
        };
        let shade = (1.0 - (dist / cfg.max_range) * 0.6).clamp(0.3, 1.0);
        let color = class_color(class);
        for row in 0..h {
            let y = row as f64 + 0.5;
            let px = if class != HitClass::Free && y >= top && y < bottom {
                [
                    (color[0] as f64 * shade) as u8,
                    (color[1] as f64 * shade) as u8,
                    (color[2] as f64 * shade) as u8,
                ]
            } else if y < horizon {
                SKY
            } else {
                FLOOR
            };
            let idx = (row * w + col) * 3;
            pixels[idx..idx + 3].copy_from_slice(&px);
        }
    }
    Raster { width, height, pixels }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::course::load_course;
    use crate::geometry::Pose;

    fn course(obstacles: &str, goal: (f64, f64)) -> CourseSpec {
        load_course(&format!(
            r#"{{"name": "t", "bounds": {{"min_x": -6, "min_y": -6, "max_x": 6, "max_y": 6}},
                "start": {{"x": 0, "y": 0, "heading": 0}}, "goal": {{"x": {}, "y": {}, "radius": 0.3}},
                "obstacles": [{obstacles}]}}"#,
            goal.0, goal.1
        ))
        .unwrap()
    }

    #[test]
    fn goal_dead_ahead_is_visible() {
        let c = course("", (1.0, 0.0));
        let obs = render_observation(&RobotState::initial(&c), &c, &ViewConfig::default());
        assert!(obs.goal_visible);
        assert!(obs.goal_bearing.abs() < 1e-12);
        assert_eq!(obs.rays.len(), 64);
        assert!(obs.raster.is_none());
        let centre = &obs.rays[31];
        assert_eq!(centre.class, HitClass::Goal);
    }

    #[test]
    fn facing_away_hides_goal() {
        let c = course("", (1.0, 0.0));
        let s = RobotState::at(Pose::new(0.0, 0.0, std::f64::consts::PI));
        assert!(!render_observation(&s, &c, &ViewConfig::default()).goal_visible);
    }

    #[test]
    fn spanning_wall_hits_every_ray() {
        let c = course(r#"{"rect": {"x": 0.4, "y": -5, "w": 0.2, "h": 10}, "class": "wall"}"#, (3.0, 0.0));
        let obs = render_observation(&RobotState::initial(&c), &c, &ViewConfig::default());
        assert!(!obs.goal_visible);
        for r in &obs.rays {
            assert_eq!(r.class, HitClass::Wall);
            // perpendicular face at 0.4 m
            assert!((r.distance * r.bearing.cos() - 0.4).abs() < 1e-9);
        }
    }

    #[test]
    fn bearings_span_fov_uniformly() {
        let cfg = ViewConfig::default();
        assert!((cfg.bearing(0) + cfg.fov / 2.0).abs() < 1e-12);
        assert!((cfg.bearing(63) - cfg.fov / 2.0).abs() < 1e-12);
        let step = cfg.bearing(1) - cfg.bearing(0);
        for i in 1..63 {
            assert!((cfg.bearing(i + 1) - cfg.bearing(i) - step).abs() < 1e-12);
        }
    }

    #[test]
    fn raster_is_deterministic_and_sized() {
        let c = course(r#"{"rect": {"x": 1.0, "y": -0.5, "w": 0.5, "h": 1}, "class": "step"}"#, (3.0, 0.0));
        let cfg = ViewConfig::default().with_raster();
        let s = RobotState::initial(&c);
        let a = render_observation(&s, &c, &cfg);
        let b = render_observation(&s, &c, &cfg);
        let ra = a.raster.as_ref().unwrap();
        assert_eq!(ra.pixels.len(), 256 * 256 * 3);
        assert_eq!(a, b);
        assert_eq!(ra.pixels, b.raster.unwrap().pixels);
        let png = ra.to_png();
        assert_eq!(&png[1..4], b"PNG");
    }

    #[test]
    fn overhang_occludes_goal() {
        let c = course(r#"{"rect": {"x": 1.0, "y": -1, "w": 1, "h": 2}, "class": "low_overhang"}"#, (3.0, 0.0));
        let obs = render_observation(&RobotState::initial(&c), &c, &ViewConfig::default());
        assert!(!obs.goal_visible);
        assert_eq!(obs.rays[32].class, HitClass::LowOverhang);
    }
}
