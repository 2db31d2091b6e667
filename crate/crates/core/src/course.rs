//! Declarative obstacle courses: the JSON file schema, validation, and the
//! five shipped fixtures.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geodesic::GeodesicField;
use crate::geometry::{Aabb, Polygon, PolygonError, Pose, Vec2};
use crate::skills::{parse_magnitude, parse_skill_name, SkillCommand};

/// Radius of the disc standing in for the robot footprint.
pub const ROBOT_RADIUS: f64 = 0.35;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObstacleClass {
    /// Never passable.
    Wall,
    /// Passable only while crawling.
    LowOverhang,
    /// Passable only by climbing across it.
    Step,
    /// Visual landmark, never blocks.
    GoalMarker,
}

#[derive(Debug, Clone)]
pub struct Obstacle {
    pub shape: Polygon,
    pub class: ObstacleClass,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GoalRegion {
    pub center: Vec2,
    pub radius: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IclAnnotation {
    pub pose: Pose,
    pub command: SkillCommand,
}

#[derive(Debug, Error)]
pub enum CourseError {
    #[error("course schema error: {0}")]
    Schema(String),
    #[error("course is unsolvable: {0}")]
    Unsolvable(String),
    #[error("reading course file {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("unknown built-in course {0:?}")]
    UnknownFixture(String),
}

// ---- file schema ----------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CourseDoc {
    pub name: String,
    pub bounds: BoundsDoc,
    pub start: PoseDoc,
    pub goal: GoalDoc,
    #[serde(default)]
    pub obstacles: Vec<ObstacleDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub icl: Option<Vec<IclDoc>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsDoc {
    pub min_x: f64,
    pub min_y: f64,
    pub max_x: f64,
    pub max_y: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoseDoc {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GoalDoc {
    pub x: f64,
    pub y: f64,
    pub radius: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RectDoc {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObstacleDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rect: Option<RectDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub polygon: Option<Vec<[f64; 2]>>,
    pub class: ObstacleClass,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IclDoc {
    pub pose: PoseDoc,
    pub skill: String,
    pub magnitude: String,
}

// ---- validated course -----------------------------------------------------

/// A validated course together with its precomputed geodesic field.
#[derive(Debug, Clone)]
pub struct CourseSpec {
    pub name: String,
    pub bounds: Aabb,
    pub start: Pose,
    pub goal: GoalRegion,
    pub obstacles: Vec<Obstacle>,
    pub icl_annotations: Option<Vec<IclAnnotation>>,
    geodesic: GeodesicField,
    doc: CourseDoc,
}

impl CourseSpec {
    pub fn from_doc(doc: CourseDoc) -> Result<Self, CourseError> {
        let b = doc.bounds;
        if ![b.min_x, b.min_y, b.max_x, b.max_y].iter().all(|v| v.is_finite()) || b.min_x >= b.max_x || b.min_y >= b.max_y {
            return Err(CourseError::Schema("bounds must be finite with min < max".into()));
        }
        let bounds = Aabb { min_x: b.min_x, min_y: b.min_y, max_x: b.max_x, max_y: b.max_y };

        let mut obstacles = Vec::with_capacity(doc.obstacles.len());
        for (i, o) in doc.obstacles.iter().enumerate() {
            let shape = match (&o.rect, &o.polygon) {
                (Some(r), None) => Polygon::rect(r.x, r.y, r.w, r.h),
                (None, Some(pts)) => Polygon::new(pts.iter().map(|p| Vec2::new(p[0], p[1])).collect()),
                _ => {
                    return Err(CourseError::Schema(format!(
                        "obstacle {i}: exactly one of `rect` or `polygon` is required"
                    )))
                }
            }
            .map_err(|e| {
                CourseError::Schema(match e {
                    PolygonError::TooFewVertices(n) => format!("obstacle {i}: polygon has {n} vertices"),
                    PolygonError::NotConvex => format!("obstacle {i}: shape is degenerate or not convex"),
                    PolygonError::NonFinite => format!("obstacle {i}: non-finite coordinate"),
                })
            })?;
            obstacles.push(Obstacle { shape, class: o.class });
        }

        let start = Pose::new(doc.start.x, doc.start.y, crate::geometry::normalize_angle(doc.start.heading));
        let goal = GoalRegion { center: Vec2::new(doc.goal.x, doc.goal.y), radius: doc.goal.radius };
        if !(goal.radius > 0.0 && goal.radius.is_finite()) {
            return Err(CourseError::Schema("goal radius must be positive".into()));
        }
        if !start.x.is_finite() || !start.y.is_finite() || !start.heading.is_finite() {
            return Err(CourseError::Schema("start pose must be finite".into()));
        }
        if !bounds.contains_disc(start.position(), ROBOT_RADIUS) {
            return Err(CourseError::Unsolvable("robot does not fit inside bounds at the start pose".into()));
        }
        if !bounds.contains(goal.center) || bounds.inner_clearance(goal.center) < goal.radius {
            return Err(CourseError::Unsolvable("goal region is not inside the bounds".into()));
        }
        let walls: Vec<&Polygon> = obstacles
            .iter()
            .filter(|o| o.class == ObstacleClass::Wall)
            .map(|o| &o.shape)
            .collect();
        if walls.iter().any(|w| w.signed_distance(start.position()) < ROBOT_RADIUS) {
            return Err(CourseError::Unsolvable("start pose overlaps a wall".into()));
        }

        let icl_annotations = match &doc.icl {
            None => None,
            Some(items) => {
                let mut out = Vec::with_capacity(items.len());
                for (i, a) in items.iter().enumerate() {
                    let skill = parse_skill_name(&a.skill).map_err(|e| CourseError::Schema(format!("icl {i}: {e}")))?;
                    let magnitude =
                        parse_magnitude(&a.magnitude).map_err(|e| CourseError::Schema(format!("icl {i}: {e}")))?;
                    out.push(IclAnnotation {
                        pose: Pose::new(a.pose.x, a.pose.y, a.pose.heading),
                        command: SkillCommand::new(skill, magnitude),
                    });
                }
                Some(out)
            }
        };

        let geodesic = GeodesicField::compute(&bounds, &walls, goal.center, goal.radius, ROBOT_RADIUS);
        if !geodesic.distance_from(start.position()).is_finite() {
            return Err(CourseError::Unsolvable("no wall-free path from start to goal".into()));
        }

        Ok(Self {
            name: doc.name.clone(),
            bounds,
            start,
            goal,
            obstacles,
            icl_annotations,
            geodesic,
            doc,
        })
    }

    pub fn geodesic(&self) -> &GeodesicField {
        &self.geodesic
    }

    /// The document this course was loaded from.
    pub fn doc(&self) -> &CourseDoc {
        &self.doc
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.doc).expect("course documents always serialize")
    }
}

pub fn load_course(source: &str) -> Result<CourseSpec, CourseError> {
    let doc: CourseDoc = serde_json::from_str(source).map_err(|e| CourseError::Schema(e.to_string()))?;
    CourseSpec::from_doc(doc)
}

pub fn load_course_file(path: &Path) -> Result<CourseSpec, CourseError> {
    let text = std::fs::read_to_string(path).map_err(|source| CourseError::Io {
        path: path.display().to_string(),
        source,
    })?;
    load_course(&text)
}

pub const FIXTURE_NAMES: [&str; 5] = ["indoor1", "indoor2", "outdoor1", "outdoor2", "outdoor3"];

/// Fixtures whose layout contains a dead end or an impassable gap.
pub const DEAD_END_FIXTURES: [&str; 2] = ["indoor1", "indoor2"];

pub fn fixture_source(name: &str) -> Option<&'static str> {
    Some(match name {
        "indoor1" => include_str!("../courses/indoor1.json"),
        "indoor2" => include_str!("../courses/indoor2.json"),
        "outdoor1" => include_str!("../courses/outdoor1.json"),
        "outdoor2" => include_str!("../courses/outdoor2.json"),
        "outdoor3" => include_str!("../courses/outdoor3.json"),
        "empty" => include_str!("../courses/empty.json"),
        _ => return None,
    })
}

pub fn fixture(name: &str) -> Result<CourseSpec, CourseError> {
    let src = fixture_source(name).ok_or_else(|| CourseError::UnknownFixture(name.to_string()))?;
    load_course(src)
}

/// Resolves a built-in fixture name or a path to a course file.
pub fn resolve_course(name_or_path: &str) -> Result<CourseSpec, CourseError> {
    match fixture_source(name_or_path) {
        Some(src) => load_course(src),
        None => load_course_file(Path::new(name_or_path)),
    }
}
