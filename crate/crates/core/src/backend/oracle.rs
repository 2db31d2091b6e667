//! Heuristic stand-ins for a VLM, with access to the true world state.
//!
//! All flavors read the current semantic view from the bundle. The memory
//! flavors also judge progress against the geodesic distance and, once they
//! decide they are lost, steer by the geodesic field using one-step
//! lookahead through the simulator. Every emission is canonical protocol
//! text.

use std::collections::VecDeque;
use std::fmt;
use std::fmt::Write as _;
use std::str::FromStr;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{BackendError, Privileged, QueryRecord, VlmBackend};
use crate::course::{CourseSpec, ObstacleClass, ROBOT_RADIUS};
use crate::observation::{HitClass, Observation};
use crate::prompting::{MethodVariant, PromptBundle, Role};
use crate::protocol::{parse_response, Plan, PlanStep};
use crate::skills::{parse_magnitude, parse_skill_name, Magnitude, SkillCommand, SkillKind};
use crate::world::{geodesic_distance, step_skill, RobotState};

/// Goal bearing beyond which the oracle turns before walking.
pub const GOAL_BEARING_THRESHOLD: f64 = 0.4;
/// Consecutive "No" judgments after which the memory flavors change strategy.
pub const STUCK_REPEAT_COUNT: usize = 2;
/// A stuck robot whose every ray hits an obstacle within this range is in a dead end.
pub const DEAD_END_RANGE: f64 = 0.6;
/// Walls closer than this straight ahead trigger a turn.
pub const WALL_NEAR_RANGE: f64 = 1.0;
/// Half-angle of the cone searched for the nearest obstacle ahead.
const FORWARD_CONE: f64 = 0.26;
/// Overhangs and steps closer than this straight ahead get their skill.
const CLASS_REACT_RANGE: f64 = 1.5;
/// Geodesic drop that counts as progress.
const PROGRESS_EPSILON: f64 = 0.1;
/// Lookahead along the descent chain, in grid cells.
/// Chance of taking the runner-up move in informed mode.
const RUNNER_UP_RATE: f64 = 0.15;
/// Per-ray distance tolerance when matching a view against an example.
const HINT_DISTANCE_TOLERANCE: f64 = 0.4;
const HINT_CLASS_AGREEMENT: f64 = 0.8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleFlavor {
    /// Reacts to the current view only.
    GreedyVisible,
    /// Greedy, but switches to informed single steps after repeated failure.
    MemorySingle,
    /// Keeps a plan, backtracks out of dead ends, then follows the geodesic.
    MemoryPlan,
    /// MemoryPlan that also acts on in-context example views.
    HintedPlan,
}

impl OracleFlavor {
    pub const ALL: [OracleFlavor; 4] = [
        OracleFlavor::GreedyVisible,
        OracleFlavor::MemorySingle,
        OracleFlavor::MemoryPlan,
        OracleFlavor::HintedPlan,
    ];

    pub fn name(self) -> &'static str {
        match self {
            OracleFlavor::GreedyVisible => "greedy_visible",
            OracleFlavor::MemorySingle => "memory_single",
            OracleFlavor::MemoryPlan => "memory_plan",
            OracleFlavor::HintedPlan => "hinted_plan",
        }
    }

    pub fn for_variant(variant: MethodVariant) -> Self {
        match variant {
            MethodVariant::Random | MethodVariant::NoHistory => OracleFlavor::GreedyVisible,
            MethodVariant::NoMultiStep => OracleFlavor::MemorySingle,
            MethodVariant::VlmPc => OracleFlavor::MemoryPlan,
            MethodVariant::VlmPcIc => OracleFlavor::HintedPlan,
        }
    }

    fn seed_salt(self) -> u64 {
        match self {
            OracleFlavor::GreedyVisible => 0x6776,
            OracleFlavor::MemorySingle => 0x6d73,
            // the hinted flavor shares the plain one's stream so the two pair up
            OracleFlavor::MemoryPlan | OracleFlavor::HintedPlan => 0x6d70,
        }
    }
}

impl fmt::Display for OracleFlavor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for OracleFlavor {
    type Err = BackendError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.trim().to_ascii_lowercase().replace('-', "_");
        OracleFlavor::ALL
            .into_iter()
            .find(|f| f.name() == norm || f.name().replace('_', "") == norm)
            .ok_or_else(|| BackendError::Config(format!("unknown oracle flavor {s:?}")))
    }
}

struct Example {
    observation: Arc<Observation>,
    command: SkillCommand,
}

pub struct OracleBackend {
    flavor: OracleFlavor,
    rng: ChaCha8Rng,
    plan_horizon: usize,
    last_geodesic: Option<f64>,
    informed: bool,
    queue: VecDeque<SkillCommand>,
    last_hint: Option<usize>,
    examples: Vec<Example>,
}

/// One decision before rendering.
struct Choice {
    action: SkillCommand,
    reason: String,
    tail: Vec<SkillCommand>,
}

impl Choice {
    fn new(action: SkillCommand, reason: impl Into<String>) -> Self {
        Self { action, reason: reason.into(), tail: Vec::new() }
    }
}

fn cmd(skill: SkillKind, magnitude: Magnitude) -> SkillCommand {
    SkillCommand::new(skill, magnitude)
}

fn turn_toward(angle: f64) -> SkillKind {
    if angle >= 0.0 {
        SkillKind::TurnLeft
    } else {
        SkillKind::TurnRight
    }
}

fn nearest_ahead(obs: &Observation) -> Option<&crate::observation::Ray> {
    obs.rays
        .iter()
        .filter(|r| r.bearing.abs() <= FORWARD_CONE)
        .min_by(|a, b| a.distance.total_cmp(&b.distance))
}

/// Left (positive bearing) when the left half of the view is more open.
fn freer_side(obs: &Observation) -> SkillKind {
    let (mut left, mut right, mut nl, mut nr) = (0.0, 0.0, 0usize, 0usize);
    for r in &obs.rays {
        if r.bearing > 0.0 {
            left += r.distance;
            nl += 1;
        } else if r.bearing < 0.0 {
            right += r.distance;
            nr += 1;
        }
    }
    let l = if nl > 0 { left / nl as f64 } else { 0.0 };
    let r = if nr > 0 { right / nr as f64 } else { 0.0 };
    if r > l {
        SkillKind::TurnRight
    } else {
        SkillKind::TurnLeft
    }
}

fn flip(turn: SkillKind) -> SkillKind {
    match turn {
        SkillKind::TurnLeft => SkillKind::TurnRight,
        SkillKind::TurnRight => SkillKind::TurnLeft,
        other => other,
    }
}

fn is_dead_end(state: &RobotState, obs: &Observation) -> bool {
    state.stuck && !obs.rays.is_empty() && obs.rays.iter().all(|r| r.class.is_obstacle() && r.distance < DEAD_END_RANGE)
}

fn view_matches(a: &Observation, b: &Observation) -> bool {
    if a.rays.len() != b.rays.len() || a.rays.is_empty() || a.goal_visible != b.goal_visible {
        return false;
    }
    let n = a.rays.len() as f64;
    let mean_gap = a.rays.iter().zip(&b.rays).map(|(x, y)| (x.distance - y.distance).abs()).sum::<f64>() / n;
    let agree = a.rays.iter().zip(&b.rays).filter(|(x, y)| x.class == y.class).count() as f64 / n;
    mean_gap <= HINT_DISTANCE_TOLERANCE && agree >= HINT_CLASS_AGREEMENT
}

fn describe_view(obs: &Observation) -> String {
    let mut s = String::new();
    if obs.goal_visible {
        let _ = write!(s, "The toy is visible at bearing {:+.2} rad.", obs.goal_bearing);
    } else {
        s.push_str("The toy is not visible.");
    }
    if let Some(r) = nearest_ahead(obs) {
        match r.class {
            HitClass::Free => s.push_str(" The way ahead looks open."),
            c => {
                let _ = write!(s, " Nearest thing ahead: {} at {:.2} m.", c.label(), r.distance);
            }
        }
    }
    s
}

/// Trailing run of "No" judgments among the prior answers in the bundle.
fn trailing_no_count(bundle: &PromptBundle) -> usize {
    bundle
        .messages
        .iter()
        .filter(|m| m.role == Role::Assistant)
        .rev()
        .map_while(|m| parse_response(&m.text, false).ok().filter(|d| !d.progress))
        .count()
}

fn extract_examples(bundle: &PromptBundle) -> Vec<Example> {
    let Some(last) = bundle.messages.last() else { return Vec::new() };
    let mut out = Vec::new();
    for a in &last.attachments {
        if !a.label.starts_with("Example") {
            continue;
        }
        let key = format!("{}: good command ", a.label);
        let Some(line) = last.text.lines().find(|l| l.starts_with(&key)) else { continue };
        let mut words = line[key.len()..].split_whitespace();
        let (Some(s), Some(m)) = (words.next(), words.next()) else { continue };
        if let (Ok(skill), Ok(magnitude)) = (parse_skill_name(s), parse_magnitude(m)) {
            out.push(Example { observation: a.observation.clone(), command: cmd(skill, magnitude) });
        }
    }
    out
}

impl OracleBackend {
    pub fn new(flavor: OracleFlavor, seed: u64, plan_horizon: usize) -> Self {
        Self {
            flavor,
            rng: ChaCha8Rng::seed_from_u64(seed ^ (flavor.seed_salt() << 32)),
            plan_horizon: plan_horizon.max(1),
            last_geodesic: None,
            informed: false,
            last_hint: None,
            queue: VecDeque::new(),
            examples: Vec::new(),
        }
    }

    pub fn flavor(&self) -> OracleFlavor {
        self.flavor
    }

    fn greedy(&mut self, obs: &Observation, state: &RobotState, course: &CourseSpec) -> Choice {
        let pos = state.pose.position();
        let under = course
            .obstacles
            .iter()
            .any(|o| o.class == ObstacleClass::LowOverhang && o.shape.signed_distance(pos) < ROBOT_RADIUS);
        if under {
            return Choice::new(cmd(SkillKind::Crawl, Magnitude::Medium), "Still under the low obstacle, keep crawling.");
        }
        if obs.goal_visible {
            let b = obs.goal_bearing;
            if b.abs() > GOAL_BEARING_THRESHOLD {
                return Choice::new(cmd(turn_toward(b), Magnitude::Small), "Turn to face the toy.");
            }
            let d = state.pose.position().distance(course.goal.center) - course.goal.radius;
            let m = if d <= 1.2 {
                Magnitude::Small
            } else if d <= 3.0 {
                Magnitude::Medium
            } else {
                Magnitude::Large
            };
            return Choice::new(cmd(SkillKind::Walk, m), "Head straight for the toy.");
        }
        if let Some(r) = nearest_ahead(obs) {
            match r.class {
                HitClass::LowOverhang if r.distance < CLASS_REACT_RANGE => {
                    return Choice::new(cmd(SkillKind::Crawl, Magnitude::Medium), "Something low is ahead, go under it.");
                }
                HitClass::Step if r.distance < CLASS_REACT_RANGE => {
                    return Choice::new(cmd(SkillKind::Climb, Magnitude::Small), "A step is ahead, climb over it.");
                }
                HitClass::Wall if r.distance < WALL_NEAR_RANGE => {
                    let mut side = freer_side(obs);
                    if self.rng.random_bool(0.15) {
                        side = flip(side);
                    }
                    return Choice::new(cmd(side, Magnitude::Small), "A wall blocks the way, turn toward the open side.");
                }
                _ => {}
            }
        }
        let roll: f64 = self.rng.random();
        let m = if roll < 0.2 {
            Magnitude::Small
        } else if roll < 0.5 {
            Magnitude::Large
        } else {
            Magnitude::Medium
        };
        Choice::new(cmd(SkillKind::Walk, m), "Nothing blocks the way, keep exploring forward.")
    }

    /// Best (turn, move) pair by geodesic drop per second of skill time.
    fn informed_step(&mut self, state: &RobotState, course: &CourseSpec) -> Choice {
        let here = geodesic_distance(state, course);
        let turns = std::iter::once(None).chain(
            [SkillKind::TurnLeft, SkillKind::TurnRight]
                .into_iter()
                .flat_map(|k| Magnitude::ALL.into_iter().map(move |m| Some(cmd(k, m)))),
        );
        let moves: Vec<SkillCommand> = [SkillKind::Walk, SkillKind::Crawl, SkillKind::Climb]
            .into_iter()
            .flat_map(|k| Magnitude::ALL.into_iter().map(move |m| cmd(k, m)))
            .collect();
        let mut scored: Vec<(f64, Option<SkillCommand>, SkillCommand)> = Vec::new();
        for turn in turns {
            let (turned, t0) = match turn {
                Some(t) => (step_skill(state, course, t), t.params().duration),
                None => (state.clone(), 0.0),
            };
            for &m in &moves {
                let next = step_skill(&turned, course, m);
                let score = (here - geodesic_distance(&next, course)) / (t0 + m.params().duration);
                scored.push((score, turn, m));
            }
        }
        // stable: ties keep the unturned and shorter options first
        scored.sort_by(|a, b| b.0.total_cmp(&a.0));
        let pick = if scored[1].0 > 0.01 && self.rng.random_bool(RUNNER_UP_RATE) { scored[1] } else { scored[0] };
        if pick.0 <= 0.01 {
            return self.backtrack_blind();
        }
        let (_, turn, mv) = pick;
        let reason = match mv.skill {
            SkillKind::Crawl => "Go under the low obstacle on the way around.",
            SkillKind::Climb => "Climb the step on the way around.",
            _ => "Follow the way around.",
        };
        match turn {
            Some(t) => {
                let mut c = Choice::new(t, "Turn toward the way around.");
                c.tail = vec![mv];
                c
            }
            None => Choice::new(mv, reason),
        }
    }

    /// No pair makes progress: back off with a random turn queued.
    fn backtrack_blind(&mut self) -> Choice {
        let side = if self.rng.random_bool(0.5) { SkillKind::TurnLeft } else { SkillKind::TurnRight };
        self.queue.push_back(cmd(side, Magnitude::Medium));
        let mut c = Choice::new(cmd(SkillKind::Backward, Magnitude::Small), "Nothing ahead makes progress, back off.");
        c.tail = self.queue.iter().copied().collect();
        c
    }

    fn backtrack(&mut self, obs: &Observation) -> Choice {
        let mut side = freer_side(obs);
        if self.rng.random_bool(0.2) {
            side = flip(side);
        }
        self.queue.push_back(cmd(side, Magnitude::Medium));
        let mut c = Choice::new(cmd(SkillKind::Backward, Magnitude::Small), "This is a dead end, back out and turn away.");
        c.tail = self.queue.iter().copied().collect();
        c
    }

    fn decide(&mut self, bundle: &PromptBundle, obs: &Observation, state: &RobotState, course: &CourseSpec, progress: bool) -> Choice {
        match self.flavor {
            OracleFlavor::GreedyVisible => self.greedy(obs, state, course),
            OracleFlavor::MemorySingle => {
                let nos = if progress { 0 } else { trailing_no_count(bundle) + 1 };
                if nos >= STUCK_REPEAT_COUNT {
                    let mut c = self.informed_step(state, course);
                    c.reason = format!("The last attempts failed, change strategy. {}", c.reason);
                    c
                } else {
                    self.greedy(obs, state, course)
                }
            }
            OracleFlavor::MemoryPlan | OracleFlavor::HintedPlan => {
                if let Some(next) = self.queue.pop_front() {
                    let mut c = Choice::new(next, "Continue backing away from the dead end.");
                    c.tail = self.queue.iter().copied().collect();
                    return c;
                }
                if is_dead_end(state, obs) {
                    self.informed = true;
                    return self.backtrack(obs);
                }
                if self.flavor == OracleFlavor::HintedPlan && !self.informed {
                    let hit = self.examples.iter().position(|e| view_matches(obs, &e.observation));
                    if let Some(i) = hit.filter(|&i| self.last_hint != Some(i)) {
                        self.informed = true;
                        self.last_hint = Some(i);
                        return Choice::new(self.examples[i].command, "This view looks like one of the examples, do what worked there.");
                    }
                    if hit.is_none() {
                        self.last_hint = None;
                    }
                }
                if !self.informed {
                    let nos = if progress { 0 } else { trailing_no_count(bundle) + 1 };
                    if nos >= STUCK_REPEAT_COUNT {
                        self.informed = true;
                        if state.stuck {
                            return self.backtrack(obs);
                        }
                    }
                }
                if self.informed {
                    self.informed_step(state, course)
                } else {
                    self.greedy(obs, state, course)
                }
            }
        }
    }

    fn render(&mut self, obs: &Observation, choice: &Choice, progress: bool, expects_plan: bool) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{}", describe_view(obs));
        let _ = writeln!(out, "{}", choice.reason);
        if expects_plan {
            let mut steps: Vec<PlanStep> = std::iter::once(choice.action)
                .chain(choice.tail.iter().copied())
                .map(PlanStep::from)
                .collect();
            while steps.len() < self.plan_horizon {
                steps.push(PlanStep::from(cmd(SkillKind::Walk, Magnitude::Medium)));
            }
            steps.truncate(self.plan_horizon);
            let _ = writeln!(out, "Plan: {}", Plan::listing(&steps));
        }
        let _ = write!(
            out,
            "{} {} {}",
            if progress { "Yes" } else { "No" },
            choice.action.skill,
            choice.action.magnitude
        );
        out
    }
}

impl VlmBackend for OracleBackend {
    fn kind_name(&self) -> String {
        format!("oracle:{}", self.flavor)
    }

    fn query(&mut self, bundle: &PromptBundle, privileged: Option<Privileged<'_>>) -> Result<QueryRecord, BackendError> {
        let p = privileged.ok_or(BackendError::MissingPrivilege)?;
        let obs = bundle
            .current_observation()
            .cloned()
            .ok_or_else(|| BackendError::Config("bundle carries no current view".into()))?;
        if bundle.query_index == 1 && self.flavor == OracleFlavor::HintedPlan {
            self.examples = extract_examples(bundle);
        }

        let progress = match self.flavor {
            OracleFlavor::GreedyVisible => !p.state.stuck,
            _ => {
                let g = geodesic_distance(p.state, p.course);
                let made = self.last_geodesic.is_none_or(|prev| prev - g > PROGRESS_EPSILON);
                self.last_geodesic = Some(g);
                made
            }
        };
        let choice = self.decide(bundle, &obs, p.state, p.course, progress);
        let text = self.render(&obs, &choice, progress, bundle.expects_plan);
        Ok(QueryRecord {
            bundle_digest: bundle.digest(),
            response_text: text,
            latency_s: None,
            backend_kind: self.kind_name(),
        })
    }
}
