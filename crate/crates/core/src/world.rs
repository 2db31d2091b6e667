//! Kinematic skill execution on a course.
//!
//! The robot is a disc. A command first turns in place, then sweeps its
//! displacement along the new heading in fixed sub-steps; the sweep stops at
//! the first contact with something the command cannot pass, with the contact
//! point refined by bisection. Time always advances by the full duration.

use serde::{Deserialize, Serialize};

use crate::course::{CourseSpec, ObstacleClass, ROBOT_RADIUS};
use crate::geometry::{normalize_angle, Pose, Vec2};
use crate::skills::{lookup_params, motion_summary, SkillCommand, SkillKind, CRAWL_BODY_HEIGHT};

pub const SWEEP_SUBSTEPS: usize = 100;
/// Shortfall below which a sweep still counts as completed.
pub const STUCK_EPSILON: f64 = 1e-6;
/// Largest angle between travel direction and a step's face normal that
/// still allows climbing onto it.
pub const CLIMB_MAX_ANGLE: f64 = std::f64::consts::FRAC_PI_3;

const BISECTION_ROUNDS: usize = 60;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BodyMode {
    Nominal,
    Low,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobotState {
    pub pose: Pose,
    pub body_mode: BodyMode,
    pub sim_time: f64,
    /// The last motion was cut short by contact.
    pub stuck: bool,
}

impl RobotState {
    pub fn at(pose: Pose) -> Self {
        Self {
            pose: Pose::new(pose.x, pose.y, normalize_angle(pose.heading)),
            body_mode: BodyMode::Nominal,
            sim_time: 0.0,
            stuck: false,
        }
    }

    pub fn initial(course: &CourseSpec) -> Self {
        Self::at(course.start)
    }
}

/// Per-command view of which obstacles can be entered.
struct Sweep<'a> {
    course: &'a CourseSpec,
    cmd: SkillCommand,
    dir: Vec2,
    /// Steps this climb has legitimately mounted.
    mounted: Vec<bool>,
}

impl<'a> Sweep<'a> {
    fn new(course: &'a CourseSpec, cmd: SkillCommand, dir: Vec2, start: Vec2) -> Self {
        let mounted = course
            .obstacles
            .iter()
            .map(|o| {
                cmd.skill == SkillKind::Climb
                    && o.class == ObstacleClass::Step
                    && o.shape.signed_distance(start) < ROBOT_RADIUS
            })
            .collect();
        Self { course, cmd, dir, mounted }
    }

    fn class_blocks(&self, class: ObstacleClass) -> bool {
        match class {
            ObstacleClass::Wall => true,
            ObstacleClass::LowOverhang => self.cmd.skill != SkillKind::Crawl,
            ObstacleClass::Step => true,
            ObstacleClass::GoalMarker => false,
        }
    }

    /// Whether moving from the accepted point `from` to `to` is allowed.
    /// Obstacles already overlapped at `from` may only be left, not entered
    /// further. On success returns the steps newly mounted by a climb so the
    /// caller can commit them.
    fn admits(&self, from: Vec2, to: Vec2) -> Result<Vec<usize>, ()> {
        if !self.course.bounds.contains_disc(to, ROBOT_RADIUS) {
            return Err(());
        }
        let mut newly_mounted = Vec::new();
        for (i, o) in self.course.obstacles.iter().enumerate() {
            let sd_to = o.shape.signed_distance(to);
            if sd_to >= ROBOT_RADIUS {
                continue;
            }
            if o.class == ObstacleClass::Step && self.mounted[i] {
                continue;
            }
            let climbing = o.class == ObstacleClass::Step && self.cmd.skill == SkillKind::Climb;
            if !climbing && !self.class_blocks(o.class) {
                continue;
            }
            let sd_from = o.shape.signed_distance(from);
            if sd_from < ROBOT_RADIUS {
                // already overlapping: allowed only while strictly backing out
                if sd_to > sd_from {
                    continue;
                }
                return Err(());
            }
            if climbing {
                let inward = o.shape.nearest_edge_normal(from) * -1.0;
                if self.dir.dot(inward) >= CLIMB_MAX_ANGLE.cos() - 1e-12 {
                    newly_mounted.push(i);
                    continue;
                }
            }
            return Err(());
        }
        Ok(newly_mounted)
    }
}

/// Executes one command. Pure and bitwise deterministic.
pub fn step_skill(state: &RobotState, course: &CourseSpec, cmd: SkillCommand) -> RobotState {
    let params = lookup_params(cmd);
    let motion = motion_summary(cmd);
    let heading = normalize_angle(state.pose.heading + motion.turn_angle);
    let start = state.pose.position();

    let commanded = motion.displacement.abs();
    let mut achieved = 0.0;
    let mut position = start;
    if commanded > 0.0 {
        let dir = Vec2::from_angle(heading) * motion.displacement.signum();
        let mut sweep = Sweep::new(course, cmd, dir, start);
        let step_len = commanded / SWEEP_SUBSTEPS as f64;
        for k in 1..=SWEEP_SUBSTEPS {
            let t = step_len * k as f64;
            let candidate = start + dir * t;
            match sweep.admits(position, candidate) {
                Ok(mounted) => {
                    for i in mounted {
                        sweep.mounted[i] = true;
                    }
                    position = candidate;
                    achieved = t;
                }
                Err(()) => {
                    let (mut lo, mut hi) = (achieved, t);
                    for _ in 0..BISECTION_ROUNDS {
                        let mid = 0.5 * (lo + hi);
                        let p = start + dir * mid;
                        if sweep.admits(position, p).is_ok() {
                            lo = mid;
                        } else {
                            hi = mid;
                        }
                    }
                    position = start + dir * lo;
                    achieved = lo;
                    break;
                }
            }
        }
    }

    RobotState {
        pose: Pose::new(position.x, position.y, heading),
        body_mode: if params.body_height == CRAWL_BODY_HEIGHT { BodyMode::Low } else { BodyMode::Nominal },
        sim_time: state.sim_time + params.duration,
        stuck: achieved < commanded - STUCK_EPSILON,
    }
}

pub fn check_goal(state: &RobotState, course: &CourseSpec) -> bool {
    state.pose.position().distance(course.goal.center) <= course.goal.radius
}

pub fn geodesic_distance(state: &RobotState, course: &CourseSpec) -> f64 {
    if check_goal(state, course) {
        return 0.0;
    }
    course.geodesic().distance_from(state.pose.position())
}
