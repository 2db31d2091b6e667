//! The six parameterized locomotion skills and their magnitude-indexed
//! parameter table.
//!
//! Every skill is an atomic timed primitive: the low-level controller is
//! driven with a fixed velocity/gait/height/yaw setting for the duration
//! selected by the magnitude. The table is compiled in and never mutated.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SkillKind {
    Walk,
    Climb,
    Crawl,
    TurnLeft,
    TurnRight,
    Backward,
}

impl SkillKind {
    pub const ALL: [SkillKind; 6] = [
        SkillKind::Walk,
        SkillKind::Climb,
        SkillKind::Crawl,
        SkillKind::TurnLeft,
        SkillKind::TurnRight,
        SkillKind::Backward,
    ];

    /// Single-token name used on the wire and in logs.
    pub fn canonical_name(self) -> &'static str {
        match self {
            SkillKind::Walk => "Walk",
            SkillKind::Climb => "Climb",
            SkillKind::Crawl => "Crawl",
            SkillKind::TurnLeft => "TurnLeft",
            SkillKind::TurnRight => "TurnRight",
            SkillKind::Backward => "Backward",
        }
    }

    pub fn is_turn(self) -> bool {
        matches!(self, SkillKind::TurnLeft | SkillKind::TurnRight)
    }

    fn description(self) -> &'static str {
        match self {
            SkillKind::Walk => "walk forward at normal height",
            SkillKind::Climb => "climb forward over a low step-like obstacle",
            SkillKind::Crawl => "crawl forward with the body lowered to pass under things",
            SkillKind::TurnLeft => "turn left in place",
            SkillKind::TurnRight => "turn right in place",
            SkillKind::Backward => "walk backward",
        }
    }
}

impl fmt::Display for SkillKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.canonical_name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Magnitude {
    Small,
    Medium,
    Large,
}

impl Magnitude {
    pub const ALL: [Magnitude; 3] = [Magnitude::Small, Magnitude::Medium, Magnitude::Large];

    pub fn canonical_name(self) -> &'static str {
        match self {
            Magnitude::Small => "Small",
            Magnitude::Medium => "Medium",
            Magnitude::Large => "Large",
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Magnitude {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.canonical_name())
    }
}

/// Controller setting for one (skill, magnitude) entry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SkillParams {
    /// m/s in the robot frame, positive forward.
    pub x_velocity: f64,
    pub y_velocity: f64,
    /// Opaque gait code passed to the controller.
    pub gait_type: u8,
    /// Offset from nominal standing height in meters.
    pub body_height: f64,
    /// rad/s, positive is a left turn.
    pub yaw_speed: f64,
    /// Seconds.
    pub duration: f64,
}

/// The high-level action: which skill to run and for how long.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SkillCommand {
    pub skill: SkillKind,
    pub magnitude: Magnitude,
}

impl SkillCommand {
    pub const fn new(skill: SkillKind, magnitude: Magnitude) -> Self {
        Self { skill, magnitude }
    }

    /// All 18 commands, skill-major in catalog order.
    pub fn all() -> impl Iterator<Item = SkillCommand> {
        SkillKind::ALL
            .into_iter()
            .flat_map(|s| Magnitude::ALL.into_iter().map(move |m| SkillCommand::new(s, m)))
    }

    pub fn params(self) -> SkillParams {
        lookup_params(self)
    }
}

impl fmt::Display for SkillCommand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.skill, self.magnitude)
    }
}

/// Height offset that puts the body into crawl mode.
pub const CRAWL_BODY_HEIGHT: f64 = -0.3;

const GAIT_TROT: u8 = 1;
const GAIT_CLIMB: u8 = 3;

struct SkillRow {
    x_velocity: [f64; 3],
    gait_type: u8,
    body_height: f64,
    yaw_speed: f64,
    duration: [f64; 3],
}

// Rows in SkillKind order; array columns are Small, Medium, Large.
const TABLE: [SkillRow; 6] = [
    SkillRow {
        x_velocity: [0.4, 0.6, 0.6],
        gait_type: GAIT_TROT,
        body_height: 0.0,
        yaw_speed: 0.0,
        duration: [3.0, 5.0, 7.0],
    },
    SkillRow {
        x_velocity: [0.6, 0.6, 0.6],
        gait_type: GAIT_CLIMB,
        body_height: 0.0,
        yaw_speed: 0.0,
        duration: [6.0, 9.0, 12.0],
    },
    SkillRow {
        x_velocity: [0.3, 0.3, 0.3],
        gait_type: GAIT_TROT,
        body_height: CRAWL_BODY_HEIGHT,
        yaw_speed: 0.0,
        duration: [2.0, 3.0, 4.0],
    },
    SkillRow {
        x_velocity: [0.0, 0.0, 0.0],
        gait_type: GAIT_TROT,
        body_height: 0.0,
        yaw_speed: 0.3,
        duration: [2.5, 3.5, 4.5],
    },
    SkillRow {
        x_velocity: [0.0, 0.0, 0.0],
        gait_type: GAIT_TROT,
        body_height: 0.0,
        yaw_speed: -0.3,
        duration: [2.5, 3.5, 4.5],
    },
    SkillRow {
        x_velocity: [-0.3, -0.3, -0.3],
        gait_type: GAIT_TROT,
        body_height: 0.0,
        yaw_speed: 0.0,
        duration: [1.5, 2.5, 5.0],
    },
];

pub fn lookup_params(cmd: SkillCommand) -> SkillParams {
    let row = &TABLE[cmd.skill as usize];
    let m = cmd.magnitude.index();
    SkillParams {
        x_velocity: row.x_velocity[m],
        y_velocity: 0.0,
        gait_type: row.gait_type,
        body_height: row.body_height,
        yaw_speed: row.yaw_speed,
        duration: row.duration[m],
    }
}

/// Closed-form effect of running a command on flat, open ground.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotionSummary {
    /// Signed forward travel in meters.
    pub displacement: f64,
    /// Signed heading change in radians.
    pub turn_angle: f64,
    pub duration: f64,
}

pub fn motion_summary(cmd: SkillCommand) -> MotionSummary {
    let p = lookup_params(cmd);
    MotionSummary {
        displacement: p.x_velocity * p.duration,
        turn_angle: p.yaw_speed * p.duration,
        duration: p.duration,
    }
}

/// Longest duration of any catalog entry.
pub fn max_duration() -> f64 {
    SkillCommand::all()
        .map(|c| lookup_params(c).duration)
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown skill name {0:?}")]
pub struct UnknownSkill(pub String);

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown magnitude {0:?}")]
pub struct UnknownMagnitude(pub String);

/// Lowercases and collapses `_`, `-` and runs of whitespace into single spaces.
fn normalize_name(text: &str) -> String {
    text.trim()
        .to_ascii_lowercase()
        .replace(['_', '-'], " ")
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
}

/// Accepted spellings, after normalization.
const SKILL_SYNONYMS: &[(&str, SkillKind)] = &[
    ("walk", SkillKind::Walk),
    ("walk forward", SkillKind::Walk),
    ("climb", SkillKind::Climb),
    ("crawl", SkillKind::Crawl),
    ("turnleft", SkillKind::TurnLeft),
    ("turn left", SkillKind::TurnLeft),
    ("left turn", SkillKind::TurnLeft),
    ("turnright", SkillKind::TurnRight),
    ("turn right", SkillKind::TurnRight),
    ("right turn", SkillKind::TurnRight),
    ("backward", SkillKind::Backward),
    ("back up", SkillKind::Backward),
];

pub fn parse_skill_name(text: &str) -> Result<SkillKind, UnknownSkill> {
    let norm = normalize_name(text);
    SKILL_SYNONYMS
        .iter()
        .find(|(name, _)| *name == norm)
        .map(|&(_, kind)| kind)
        .ok_or_else(|| UnknownSkill(text.to_string()))
}

pub fn parse_magnitude(text: &str) -> Result<Magnitude, UnknownMagnitude> {
    match normalize_name(text).as_str() {
        "small" => Ok(Magnitude::Small),
        "medium" => Ok(Magnitude::Medium),
        "large" => Ok(Magnitude::Large),
        _ => Err(UnknownMagnitude(text.to_string())),
    }
}

/// Human-readable skill list for prompts, one skill per line with its
/// per-magnitude durations.
pub fn skill_menu() -> String {
    let mut out = String::new();
    for kind in SkillKind::ALL {
        let durations: Vec<String> = Magnitude::ALL
            .iter()
            .map(|&m| {
                let p = lookup_params(SkillCommand::new(kind, m));
                format!("{m} = {} s", p.duration)
            })
            .collect();
        out.push_str(&format!(
            "- {}: {} ({})\n",
            kind.canonical_name(),
            kind.description(),
            durations.join(", ")
        ));
    }
    out.pop();
    out
}

pub const CATALOG_COLUMNS: [&str; 8] = [
    "skill",
    "magnitude",
    "x_velocity",
    "y_velocity",
    "gait_type",
    "body_height",
    "yaw_speed",
    "duration",
];

/// Tab-separated dump of the whole table, header first, one row per command.
pub fn catalog_table() -> String {
    let mut out = CATALOG_COLUMNS.join("\t");
    out.push('\n');
    for cmd in SkillCommand::all() {
        let p = lookup_params(cmd);
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
            cmd.skill, cmd.magnitude, p.x_velocity, p.y_velocity, p.gait_type, p.body_height, p.yaw_speed, p.duration
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use SkillKind::*;

    #[test]
    fn table_rows_match_reference_values() {
        let climb = lookup_params(SkillCommand::new(Climb, Magnitude::Medium));
        assert_eq!(
            climb,
            SkillParams { x_velocity: 0.6, y_velocity: 0.0, gait_type: 3, body_height: 0.0, yaw_speed: 0.0, duration: 9.0 }
        );
        let walk = lookup_params(SkillCommand::new(Walk, Magnitude::Small));
        assert_eq!(
            walk,
            SkillParams { x_velocity: 0.4, y_velocity: 0.0, gait_type: 1, body_height: 0.0, yaw_speed: 0.0, duration: 3.0 }
        );
        let back = lookup_params(SkillCommand::new(Backward, Magnitude::Large));
        assert_eq!(
            back,
            SkillParams { x_velocity: -0.3, y_velocity: 0.0, gait_type: 1, body_height: 0.0, yaw_speed: 0.0, duration: 5.0 }
        );
    }

    #[test]
    fn table_structure_invariants() {
        for cmd in SkillCommand::all() {
            let p = cmd.params();
            assert!(p.duration > 0.0);
            assert_eq!(p.y_velocity, 0.0);
            if cmd.skill.is_turn() {
                assert_eq!(p.x_velocity, 0.0);
            } else {
                assert_eq!(p.yaw_speed, 0.0);
            }
            let expected_height = if cmd.skill == Crawl { -0.3 } else { 0.0 };
            assert_eq!(p.body_height, expected_height);
            let expected_gait = if cmd.skill == Climb { 3 } else { 1 };
            assert_eq!(p.gait_type, expected_gait);
        }
        for kind in SkillKind::ALL {
            let d: Vec<f64> = Magnitude::ALL
                .iter()
                .map(|&m| SkillCommand::new(kind, m).params().duration)
                .collect();
            assert!(d[0] < d[1] && d[1] < d[2], "{kind}: {d:?}");
        }
    }

    #[test]
    fn motion_summary_examples() {
        let s = motion_summary(SkillCommand::new(Walk, Magnitude::Small));
        assert!((s.displacement - 1.2).abs() < 1e-12);
        assert_eq!(s.turn_angle, 0.0);
        assert_eq!(s.duration, 3.0);

        let s = motion_summary(SkillCommand::new(TurnLeft, Magnitude::Medium));
        assert_eq!(s.displacement, 0.0);
        assert!((s.turn_angle - 1.05).abs() < 1e-12);
        assert_eq!(s.duration, 3.5);

        let s = motion_summary(SkillCommand::new(TurnRight, Magnitude::Small));
        assert!((s.turn_angle + 0.75).abs() < 1e-12);
        assert_eq!(s.duration, 2.5);
    }

    #[test]
    fn motion_summary_is_velocity_times_duration() {
        for cmd in SkillCommand::all() {
            let p = cmd.params();
            let s = motion_summary(cmd);
            assert_eq!(s.displacement, p.x_velocity * p.duration);
            assert_eq!(s.turn_angle, p.yaw_speed * p.duration);
        }
    }

    #[test]
    fn skill_names_parse() {
        assert_eq!(parse_skill_name("Crawl"), Ok(Crawl));
        assert_eq!(parse_skill_name("turn left"), Ok(TurnLeft));
        assert_eq!(parse_skill_name("Left Turn"), Ok(TurnLeft));
        assert_eq!(parse_skill_name("Walk Forward"), Ok(Walk));
        assert_eq!(parse_skill_name("back up"), Ok(Backward));
        assert_eq!(parse_skill_name("TURN_RIGHT"), Ok(TurnRight));
        assert_eq!(parse_skill_name("Fly"), Err(UnknownSkill("Fly".into())));
        assert!(parse_skill_name("").is_err());
        for kind in SkillKind::ALL {
            assert_eq!(parse_skill_name(kind.canonical_name()), Ok(kind));
        }
    }

    #[test]
    fn magnitudes_are_ordered() {
        assert!(Magnitude::Small < Magnitude::Medium && Magnitude::Medium < Magnitude::Large);
        assert_eq!(parse_magnitude("LARGE"), Ok(Magnitude::Large));
        assert!(parse_magnitude("huge").is_err());
    }

    #[test]
    fn catalog_has_header_and_18_rows() {
        let table = catalog_table();
        let lines: Vec<&str> = table.lines().collect();
        assert_eq!(lines.len(), 19);
        assert_eq!(lines[1], "Walk\tSmall\t0.4\t0\t1\t0\t0\t3");
        assert_eq!(max_duration(), 12.0);
    }
}
