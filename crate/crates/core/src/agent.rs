//! Episode driver: observe, assemble, query, parse, execute the first
//! command, repeat until the goal or the time budget.

use std::collections::HashMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::backend::{open_backend, BackendConfig, BackendError, Privileged, ScriptRecord, ScriptedBackend, VlmBackend};
use crate::course::{CourseDoc, CourseError, CourseSpec};
use crate::geometry::Pose;
use crate::observation::{render_observation, Observation, ViewConfig};
use crate::prompting::{
    assemble_query, record_entry, HistoryEntry, IclExample, MethodVariant, PromptConfig, PromptError, PromptKind,
    TemplateSet,
};
use crate::protocol::{fallback_decision, parse_response, ParsedDecision, Plan, ProtocolConfig};
use crate::skills::SkillCommand;
use crate::world::{check_goal, geodesic_distance, step_skill, RobotState};

pub const DEFAULT_BUDGET_S: f64 = 100.0;
pub const DEFAULT_PLAN_HORIZON: usize = 3;
/// Grid used when counting returns to the same place.
pub const REVISIT_CELL: f64 = 0.2;
const TRANSCRIPT_FORMAT: u32 = 1;

#[derive(Debug, Clone)]
pub struct EpisodeConfig {
    pub variant: MethodVariant,
    pub course: Arc<CourseSpec>,
    pub backend: BackendConfig,
    pub seed: u64,
    pub budget_s: f64,
    pub plan_horizon: usize,
    pub view: ViewConfig,
    pub history_cap: Option<usize>,
    pub protocol: ProtocolConfig,
    pub templates: Arc<TemplateSet>,
}

impl EpisodeConfig {
    pub fn new(variant: MethodVariant, course: Arc<CourseSpec>, backend: BackendConfig, seed: u64) -> Self {
        Self {
            variant,
            course,
            backend,
            seed,
            budget_s: DEFAULT_BUDGET_S,
            plan_horizon: DEFAULT_PLAN_HORIZON,
            view: ViewConfig::default(),
            history_cap: None,
            protocol: ProtocolConfig::default(),
            templates: Arc::new(TemplateSet::builtin()),
        }
    }

    fn prompt_config(&self) -> PromptConfig {
        PromptConfig { history_cap: self.history_cap, plan_horizon: self.plan_horizon }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    GoalReached,
    BudgetExhausted,
    BackendFailure,
}

impl fmt::Display for Termination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Termination::GoalReached => "goal_reached",
            Termination::BudgetExhausted => "budget_exhausted",
            Termination::BackendFailure => "backend_failure",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeResult {
    pub course: String,
    pub variant: MethodVariant,
    pub seed: u64,
    pub success: bool,
    /// Simulated seconds; the budget exactly when the episode failed.
    pub time_s: f64,
    pub steps: usize,
    pub termination: Termination,
    /// Most returns to a single rounded position.
    pub revisits: usize,
    pub transcript_hash: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptHeader {
    pub format: u32,
    pub course: String,
    pub course_doc: CourseDoc,
    pub variant: MethodVariant,
    pub seed: u64,
    pub budget_s: f64,
    pub plan_horizon: usize,
    pub history_cap: Option<usize>,
    pub view: ViewConfig,
    pub protocol: ProtocolConfig,
    pub backend: BackendConfig,
    pub templates: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub sim_time_before: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt_kind: Option<PromptKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bundle_digest: Option<String>,
    pub observation: Observation,
    /// Every query issued for this step, retries included.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub queries: Vec<ScriptRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decision: Option<ParsedDecision>,
    pub executed: SkillCommand,
    pub duration_s: f64,
    pub pose_after: Pose,
    pub stuck: bool,
    pub geodesic_after: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptFooter {
    pub result: EpisodeResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TranscriptLine {
    Header(TranscriptHeader),
    Step(StepRecord),
    Footer(TranscriptFooter),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transcript {
    pub header: TranscriptHeader,
    pub steps: Vec<StepRecord>,
    pub footer: TranscriptFooter,
}

fn line_json(line: &TranscriptLine) -> String {
    serde_json::to_string(line).expect("transcript records always serialize")
}

/// Hash over the header and step lines, as they appear in the file.
pub fn hash_lines<'a>(lines: impl IntoIterator<Item = &'a str>) -> String {
    let mut h = Sha256::new();
    for l in lines {
        h.update(l.as_bytes());
        h.update(b"\n");
    }
    hex::encode(h.finalize())
}

impl Transcript {
    fn body_lines(header: &TranscriptHeader, steps: &[StepRecord]) -> Vec<String> {
        std::iter::once(line_json(&TranscriptLine::Header(header.clone())))
            .chain(steps.iter().map(|s| line_json(&TranscriptLine::Step(s.clone()))))
            .collect()
    }

    pub fn compute_hash(&self) -> String {
        let lines = Self::body_lines(&self.header, &self.steps);
        hash_lines(lines.iter().map(String::as_str))
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for l in Self::body_lines(&self.header, &self.steps) {
            out.push_str(&l);
            out.push('\n');
        }
        out.push_str(&line_json(&TranscriptLine::Footer(self.footer.clone())));
        out.push('\n');
        out
    }

    pub fn file_name(&self) -> String {
        transcript_file_name(&self.header.course, self.header.variant, self.header.seed)
    }

    pub fn write_to_dir(&self, dir: &Path) -> std::io::Result<PathBuf> {
        std::fs::create_dir_all(dir)?;
        let path = dir.join(self.file_name());
        std::fs::write(&path, self.to_jsonl())?;
        Ok(path)
    }

    /// Parses a transcript file; the exact stored lines are hashed, so any
    /// byte change in them shows up as a mismatch.
    pub fn parse(text: &str) -> Result<(Transcript, String), ReplayError> {
        let lines: Vec<&str> = text.lines().filter(|l| !l.trim().is_empty()).collect();
        if lines.len() < 2 {
            return Err(ReplayError::Format("transcript needs a header and a footer".into()));
        }
        let parse = |n: usize, l: &str| -> Result<TranscriptLine, ReplayError> {
            serde_json::from_str(l).map_err(|e| ReplayError::Format(format!("line {}: {e}", n + 1)))
        };
        let TranscriptLine::Header(header) = parse(0, lines[0])? else {
            return Err(ReplayError::Format("first line is not a header".into()));
        };
        let last = lines.len() - 1;
        let TranscriptLine::Footer(footer) = parse(last, lines[last])? else {
            return Err(ReplayError::Format("last line is not a footer".into()));
        };
        let mut steps = Vec::with_capacity(last - 1);
        for (n, l) in lines.iter().enumerate().take(last).skip(1) {
            match parse(n, l)? {
                TranscriptLine::Step(s) => steps.push(s),
                _ => return Err(ReplayError::Format(format!("line {}: expected a step record", n + 1))),
            }
        }
        let stored_hash = hash_lines(lines[..last].iter().copied());
        Ok((Transcript { header, steps, footer }, stored_hash))
    }

    pub fn script(&self) -> Vec<ScriptRecord> {
        self.steps.iter().flat_map(|s| s.queries.iter().cloned()).collect()
    }
}

pub fn transcript_file_name(course: &str, variant: MethodVariant, seed: u64) -> String {
    format!("{course}_{variant}_{seed}.transcript")
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeOutcome {
    pub result: EpisodeResult,
    pub transcript: Transcript,
}

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("invalid episode config: {0}")]
    Config(String),
    #[error("course {0} has no in-context annotations")]
    MissingIcl(String),
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
}

/// Uniform draw over the 18 catalog commands.
pub fn random_action<R: Rng>(rng: &mut R) -> SkillCommand {
    let i = rng.random_range(0..18);
    SkillCommand::all().nth(i).expect("18 catalog commands")
}

/// The plan to carry into the next query.
pub fn retain_or_replace_plan(prior: Option<Plan>, decision: &ParsedDecision) -> Option<Plan> {
    if let Some(p) = &decision.plan {
        return Some(p.clone());
    }
    let mut prior = prior?;
    if prior.steps.len() <= 1 {
        return None;
    }
    prior.steps.remove(0);
    prior.source_text = Plan::listing(&prior.steps);
    Some(prior)
}

/// Most returns to any one position, rounded to [`REVISIT_CELL`]. The start
/// counts as the first visit.
pub fn count_revisits(start: Pose, poses: impl IntoIterator<Item = Pose>) -> usize {
    let key = |p: Pose| ((p.x / REVISIT_CELL).round() as i64, (p.y / REVISIT_CELL).round() as i64);
    let mut visits: HashMap<(i64, i64), usize> = HashMap::new();
    *visits.entry(key(start)).or_default() += 1;
    for p in poses {
        *visits.entry(key(p)).or_default() += 1;
    }
    visits.values().copied().max().unwrap_or(1) - 1
}

fn icl_examples(cfg: &EpisodeConfig, view: &ViewConfig) -> Result<Option<Vec<IclExample>>, AgentError> {
    if cfg.variant != MethodVariant::VlmPcIc {
        return Ok(None);
    }
    let annotations = cfg
        .course
        .icl_annotations
        .as_ref()
        .filter(|a| !a.is_empty())
        .ok_or_else(|| AgentError::MissingIcl(cfg.course.name.clone()))?;
    Ok(Some(
        annotations
            .iter()
            .map(|a| IclExample {
                observation: Arc::new(render_observation(&RobotState::at(a.pose), &cfg.course, view)),
                command: a.command,
            })
            .collect(),
    ))
}

pub fn run_episode(cfg: &EpisodeConfig) -> Result<EpisodeOutcome, AgentError> {
    validate(cfg)?;
    let backend = if cfg.variant == MethodVariant::Random {
        None
    } else {
        Some(open_backend(&cfg.backend, cfg.variant, cfg.seed, cfg.plan_horizon)?)
    };
    run_with(cfg, backend)
}

/// Runs with a caller-supplied backend; the header still records `cfg.backend`.
pub fn run_episode_with_backend(cfg: &EpisodeConfig, backend: Box<dyn VlmBackend>) -> Result<EpisodeOutcome, AgentError> {
    validate(cfg)?;
    run_with(cfg, Some(backend))
}

fn validate(cfg: &EpisodeConfig) -> Result<(), AgentError> {
    if !(cfg.budget_s > 0.0 && cfg.budget_s.is_finite()) {
        return Err(AgentError::Config("budget must be positive".into()));
    }
    if cfg.plan_horizon == 0 {
        return Err(AgentError::Config("plan horizon must be at least 1".into()));
    }
    if cfg.history_cap == Some(0) {
        return Err(AgentError::Config("history cap must leave room for the current view".into()));
    }
    Ok(())
}

fn run_with(cfg: &EpisodeConfig, mut backend: Option<Box<dyn VlmBackend>>) -> Result<EpisodeOutcome, AgentError> {
    let course = &*cfg.course;
    let view = match &backend {
        Some(b) if b.wants_raster() => cfg.view.with_raster(),
        _ => cfg.view,
    };
    let icl = icl_examples(cfg, &view)?;
    let prompt_cfg = cfg.prompt_config();

    let header = TranscriptHeader {
        format: TRANSCRIPT_FORMAT,
        course: course.name.clone(),
        course_doc: course.doc().clone(),
        variant: cfg.variant,
        seed: cfg.seed,
        budget_s: cfg.budget_s,
        plan_horizon: cfg.plan_horizon,
        history_cap: cfg.history_cap,
        view: cfg.view,
        protocol: cfg.protocol,
        backend: cfg.backend.clone(),
        templates: TemplateSet::VERSION.to_string(),
    };

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut state = RobotState::initial(course);
    let mut history: Vec<HistoryEntry> = Vec::new();
    let mut plan_carry: Option<Plan> = None;
    let mut steps: Vec<StepRecord> = Vec::new();
    let mut failure = None;

    let termination = loop {
        if state.sim_time >= cfg.budget_s {
            break Termination::BudgetExhausted;
        }
        let obs = Arc::new(render_observation(&state, course, &view));
        let mut record = StepRecord {
            step: steps.len() + 1,
            sim_time_before: state.sim_time,
            prompt_kind: None,
            bundle_digest: None,
            observation: (*obs).clone(),
            queries: Vec::new(),
            decision: None,
            executed: SkillCommand::new(crate::skills::SkillKind::Walk, crate::skills::Magnitude::Small),
            duration_s: 0.0,
            pose_after: state.pose,
            stuck: false,
            geodesic_after: 0.0,
        };

        let action = match backend.as_mut() {
            None => random_action(&mut rng),
            Some(b) => {
                let bundle = assemble_query(
                    &cfg.templates,
                    &prompt_cfg,
                    cfg.variant,
                    &history,
                    obs.clone(),
                    if cfg.variant.carries_plan() { plan_carry.as_ref() } else { None },
                    icl.as_deref(),
                )?;
                record.prompt_kind = Some(bundle.kind);
                record.bundle_digest = Some(bundle.digest());
                let mut parsed = None;
                let mut last_text = String::new();
                let mut backend_error = None;
                for _ in 0..=cfg.backend.retry_budget {
                    match b.query(&bundle, Some(Privileged { state: &state, course })) {
                        Ok(q) => {
                            record.queries.push(ScriptRecord {
                                bundle_digest: q.bundle_digest.clone(),
                                response_text: q.response_text.clone(),
                            });
                            last_text = q.response_text;
                            if let Ok(d) = parse_response(&last_text, bundle.expects_plan) {
                                parsed = Some(d);
                                break;
                            }
                        }
                        Err(e) => {
                            backend_error = Some(e);
                            break;
                        }
                    }
                }
                if let Some(e) = backend_error {
                    failure = Some(e.to_string());
                    break Termination::BackendFailure;
                }
                let decision = parsed.unwrap_or_else(|| ParsedDecision { raw: last_text.clone(), ..fallback_decision(&cfg.protocol) });
                history = record_entry(history, &bundle, &last_text, decision.clone());
                if cfg.variant.carries_plan() {
                    plan_carry = retain_or_replace_plan(plan_carry.take(), &decision);
                }
                let action = decision.action;
                record.decision = Some(decision);
                action
            }
        };

        let next = step_skill(&state, course, action);
        record.executed = action;
        record.duration_s = next.sim_time - state.sim_time;
        record.pose_after = next.pose;
        record.stuck = next.stuck;
        record.geodesic_after = geodesic_distance(&next, course);
        steps.push(record);
        state = next;

        if check_goal(&state, course) {
            if state.sim_time <= cfg.budget_s {
                break Termination::GoalReached;
            }
            break Termination::BudgetExhausted;
        }
    };

    let success = termination == Termination::GoalReached;
    let mut result = EpisodeResult {
        course: course.name.clone(),
        variant: cfg.variant,
        seed: cfg.seed,
        success,
        time_s: if success { state.sim_time } else { cfg.budget_s },
        steps: steps.len(),
        termination,
        revisits: count_revisits(course.start, steps.iter().map(|s| s.pose_after)),
        transcript_hash: String::new(),
        failure,
    };
    let mut transcript = Transcript { header, steps, footer: TranscriptFooter { result: result.clone() } };
    result.transcript_hash = transcript.compute_hash();
    transcript.footer.result = result.clone();
    Ok(EpisodeOutcome { result, transcript })
}

#[derive(Debug, Error)]
pub enum ReplayError {
    #[error("malformed transcript: {0}")]
    Format(String),
    #[error("stored hash {stored} does not match the transcript contents ({computed})")]
    HashMismatch { stored: String, computed: String },
    #[error("re-execution diverged: stored hash {stored}, replay produced {replayed}")]
    Diverged { stored: String, replayed: String },
    #[error(transparent)]
    Course(#[from] CourseError),
    #[error(transparent)]
    Agent(#[from] AgentError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplayReport {
    pub hash: String,
    pub result: EpisodeResult,
}

/// Checks that a stored transcript is intact and that re-running it through
/// the recorded responses reproduces it exactly.
pub fn verify_transcript(text: &str) -> Result<ReplayReport, ReplayError> {
    let (transcript, computed) = Transcript::parse(text)?;
    let stored = transcript.footer.result.transcript_hash.clone();
    if stored != computed {
        return Err(ReplayError::HashMismatch { stored, computed });
    }
    let h = &transcript.header;
    let course = CourseSpec::from_doc(h.course_doc.clone())?;
    let cfg = EpisodeConfig {
        variant: h.variant,
        course: Arc::new(course),
        backend: h.backend.clone(),
        seed: h.seed,
        budget_s: h.budget_s,
        plan_horizon: h.plan_horizon,
        view: h.view,
        history_cap: h.history_cap,
        protocol: h.protocol,
        templates: Arc::new(TemplateSet::builtin()),
    };
    let outcome = if h.variant == MethodVariant::Random {
        validate(&cfg)?;
        run_with(&cfg, None)?
    } else {
        run_episode_with_backend(&cfg, Box::new(ScriptedBackend::new(transcript.script(), false)))?
    };
    let replayed = outcome.result.transcript_hash.clone();
    if replayed != stored || outcome.result != transcript.footer.result {
        return Err(ReplayError::Diverged { stored, replayed });
    }
    Ok(ReplayReport { hash: stored, result: outcome.result })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::BackendKind;
    use crate::course::{fixture, load_course};
    use crate::protocol::PlanStep;
    use crate::skills::{Magnitude, SkillKind};

    fn plan(skills: &[SkillKind]) -> Plan {
        let steps: Vec<PlanStep> = skills.iter().map(|&skill| PlanStep { skill, magnitude: None }).collect();
        Plan { source_text: Plan::listing(&steps), steps }
    }

    fn decision(p: Option<Plan>) -> ParsedDecision {
        ParsedDecision { plan: p, ..fallback_decision(&ProtocolConfig::default()) }
    }

    #[test]
    fn plan_carry_rules() {
        use SkillKind::*;
        let replaced = retain_or_replace_plan(Some(plan(&[Walk, Climb, Walk])), &decision(Some(plan(&[Backward, TurnLeft]))));
        assert_eq!(replaced.unwrap().steps, plan(&[Backward, TurnLeft]).steps);
        let advanced = retain_or_replace_plan(Some(plan(&[Walk, Climb])), &decision(None));
        assert_eq!(advanced.unwrap().steps, plan(&[Climb]).steps);
        assert_eq!(retain_or_replace_plan(None, &decision(None)), None);
    }

    #[test]
    fn random_draws_are_uniform_and_seeded() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let mut counts: HashMap<SkillCommand, usize> = HashMap::new();
        for _ in 0..18_000 {
            *counts.entry(random_action(&mut rng)).or_default() += 1;
        }
        assert_eq!(counts.len(), 18);
        assert!(counts.values().all(|&c| (800..=1200).contains(&c)), "{counts:?}");
        let draw = |seed| {
            let mut r = ChaCha8Rng::seed_from_u64(seed);
            (0..50).map(|_| random_action(&mut r)).collect::<Vec<_>>()
        };
        assert_eq!(draw(7), draw(7));
    }

    fn empty_goal_ahead() -> Arc<CourseSpec> {
        Arc::new(
            load_course(
                r#"{"name": "ahead", "bounds": {"min_x": -2, "min_y": -2, "max_x": 4, "max_y": 2},
                    "start": {"x": 0, "y": 0, "heading": 0}, "goal": {"x": 1, "y": 0, "radius": 0.4}}"#,
            )
            .unwrap(),
        )
    }

    #[test]
    fn greedy_reaches_a_goal_one_meter_ahead_in_one_step() {
        let cfg = EpisodeConfig::new(
            MethodVariant::NoHistory,
            empty_goal_ahead(),
            BackendConfig::new(BackendKind::Oracle { flavor: Some(crate::backend::OracleFlavor::GreedyVisible) }),
            0,
        );
        let out = run_episode(&cfg).unwrap();
        assert_eq!(out.result.termination, Termination::GoalReached);
        assert_eq!(out.result.steps, 1);
        assert_eq!(out.result.time_s, 3.0);
        assert_eq!(out.transcript.steps[0].executed, SkillCommand::new(SkillKind::Walk, Magnitude::Small));
    }

    #[test]
    fn random_on_dead_end_fixture_fails_at_budget() {
        let cfg = EpisodeConfig::new(MethodVariant::Random, Arc::new(fixture("indoor1").unwrap()), BackendConfig::oracle(), 3);
        let out = run_episode(&cfg).unwrap();
        assert!(!out.result.success);
        assert_eq!(out.result.time_s, 100.0);
        assert_eq!(out.result.termination, Termination::BudgetExhausted);
        let total: f64 = out.transcript.steps.iter().map(|s| s.duration_s).sum();
        assert!(total >= 100.0 && total < 100.0 + crate::skills::max_duration());
    }

    #[test]
    fn executed_command_is_always_the_decision_action() {
        let cfg = EpisodeConfig::new(MethodVariant::VlmPc, Arc::new(fixture("indoor1").unwrap()), BackendConfig::oracle(), 11);
        let out = run_episode(&cfg).unwrap();
        for s in &out.transcript.steps {
            assert_eq!(s.executed, s.decision.as_ref().unwrap().action);
        }
        let times: Vec<f64> = out.transcript.steps.iter().map(|s| s.sim_time_before).collect();
        assert!(times.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn replay_reproduces_and_detects_mutation() {
        let cfg = EpisodeConfig::new(MethodVariant::VlmPc, Arc::new(fixture("indoor2").unwrap()), BackendConfig::oracle(), 5);
        let out = run_episode(&cfg).unwrap();
        let text = out.transcript.to_jsonl();
        let report = verify_transcript(&text).unwrap();
        assert_eq!(report.hash, out.result.transcript_hash);

        let mutated = text.replacen("Yes ", "Yrs ", 1);
        assert_ne!(mutated, text);
        assert!(verify_transcript(&mutated).is_err());
    }

    #[test]
    fn malformed_answers_fall_back_after_retries() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.jsonl");
        let lines: String = (0..20)
            .map(|_| "{\"bundle_digest\":\"x\",\"response_text\":\"I cannot tell.\"}\n")
            .collect();
        std::fs::write(&path, lines).unwrap();
        let mut backend = BackendConfig::scripted(&path);
        backend.allow_drift = true;
        let mut cfg = EpisodeConfig::new(MethodVariant::VlmPc, empty_goal_ahead(), backend, 0);
        cfg.budget_s = 9.0;
        let out = run_episode(&cfg).unwrap();
        let first = &out.transcript.steps[0];
        assert_eq!(first.queries.len(), 3);
        assert_eq!(first.executed, SkillCommand::new(SkillKind::Walk, Magnitude::Small));
        assert_eq!(first.decision.as_ref().unwrap().quality, crate::protocol::ParseQuality::Fallback);
        // the fallback walk reaches the goal one meter ahead
        assert_eq!(out.result.termination, Termination::GoalReached);
    }

    #[test]
    fn exhausted_script_is_a_backend_failure() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.jsonl");
        std::fs::write(&path, "").unwrap();
        let cfg = EpisodeConfig::new(MethodVariant::VlmPc, empty_goal_ahead(), BackendConfig::scripted(&path), 0);
        let out = run_episode(&cfg).unwrap();
        assert_eq!(out.result.termination, Termination::BackendFailure);
        assert!(!out.result.success);
        assert_eq!(out.result.time_s, 100.0);
        assert_eq!(out.result.steps, 0);
    }

    #[test]
    fn revisit_counting() {
        let p = |x, y| Pose::new(x, y, 0.0);
        assert_eq!(count_revisits(p(0.0, 0.0), vec![p(1.0, 0.0), p(2.0, 0.0)]), 0);
        assert_eq!(count_revisits(p(0.0, 0.0), vec![p(0.05, 0.0), p(1.0, 0.0), p(0.0, 0.04)]), 2);
    }
}
