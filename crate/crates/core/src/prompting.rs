//! Query assembly for each method variant.
//!
//! A bundle is a system message, then (for history-conditioned variants) one
//! user/assistant pair per earlier query carrying that query's view and the
//! model's raw answer, then the current prompt with the current view. The
//! prompt text comes from template files with named placeholders.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::observation::Observation;
use crate::protocol::{render_canonical, ParsedDecision, Plan, ParseQuality};
use crate::skills::{skill_menu, SkillCommand};

/// Queries between repeats of the initial prompt.
pub const INITIAL_PROMPT_CYCLE: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodVariant {
    Random,
    NoHistory,
    NoMultiStep,
    VlmPc,
    VlmPcIc,
}

impl MethodVariant {
    pub const ALL: [MethodVariant; 5] = [
        MethodVariant::Random,
        MethodVariant::NoHistory,
        MethodVariant::NoMultiStep,
        MethodVariant::VlmPc,
        MethodVariant::VlmPcIc,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MethodVariant::Random => "random",
            MethodVariant::NoHistory => "no_history",
            MethodVariant::NoMultiStep => "no_multi_step",
            MethodVariant::VlmPc => "vlm_pc",
            MethodVariant::VlmPcIc => "vlm_pc_ic",
        }
    }

    pub fn uses_history(self) -> bool {
        matches!(self, MethodVariant::NoMultiStep | MethodVariant::VlmPc | MethodVariant::VlmPcIc)
    }

    pub fn plans_ahead(self) -> bool {
        matches!(self, MethodVariant::NoHistory | MethodVariant::VlmPc | MethodVariant::VlmPcIc)
    }

    /// Whether the previous plan is shown back to the model.
    pub fn carries_plan(self) -> bool {
        matches!(self, MethodVariant::VlmPc | MethodVariant::VlmPcIc)
    }

    pub fn prompt_kind_at(self, query_index: usize) -> PromptKind {
        match self {
            MethodVariant::NoHistory | MethodVariant::Random => PromptKind::Initial,
            _ if (query_index - 1) % INITIAL_PROMPT_CYCLE == 0 => PromptKind::Initial,
            _ => PromptKind::Successive,
        }
    }
}

impl fmt::Display for MethodVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown method variant {0:?}")]
pub struct UnknownVariant(pub String);

impl FromStr for MethodVariant {
    type Err = UnknownVariant;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.trim().to_ascii_lowercase().replace(['-', '+', ' '], "_");
        Ok(match norm.as_str() {
            "random" => MethodVariant::Random,
            "no_history" | "nohistory" => MethodVariant::NoHistory,
            "no_multi_step" | "nomultistep" | "no_multistep" => MethodVariant::NoMultiStep,
            "vlm_pc" | "vlmpc" => MethodVariant::VlmPc,
            "vlm_pc_ic" | "vlmpcic" | "vlm_pc__ic" => MethodVariant::VlmPcIc,
            _ => return Err(UnknownVariant(s.to_string())),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptKind {
    Initial,
    Successive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Attachment {
    pub label: String,
    pub observation: Arc<Observation>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Message {
    pub role: Role,
    pub text: String,
    pub attachments: Vec<Attachment>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PromptBundle {
    pub messages: Vec<Message>,
    /// 1-based count of queries issued this episode.
    pub query_index: usize,
    pub kind: PromptKind,
    pub is_initial_cycle: bool,
    pub expects_plan: bool,
}

impl PromptBundle {
    pub fn observation_count(&self) -> usize {
        self.messages.iter().map(|m| m.attachments.len()).sum()
    }

    /// The prompt issued at this query (last user message).
    pub fn prompt_text(&self) -> &str {
        self.messages.last().map(|m| m.text.as_str()).unwrap_or("")
    }

    /// The view the decision is made from.
    pub fn current_observation(&self) -> Option<&Arc<Observation>> {
        self.messages.last().and_then(|m| m.attachments.last()).map(|a| &a.observation)
    }

    /// Flat text rendering: every message with its attachments as semantic
    /// records. This is what text-only backends read and what the digest covers.
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        for m in &self.messages {
            let role = match m.role {
                Role::System => "system",
                Role::User => "user",
                Role::Assistant => "assistant",
            };
            out.push_str(&format!("<<{role}>>\n{}\n", m.text));
            for a in &m.attachments {
                out.push_str(&format!("[{}]\n{}\n", a.label, a.observation.semantic_text()));
            }
        }
        out
    }

    /// Content hash over the rendered text. Rasters are excluded, they are a
    /// deterministic function of the semantic record.
    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(self.render_text().as_bytes()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HistoryEntry {
    pub step_index: usize,
    pub observation: Arc<Observation>,
    pub prompt_text: String,
    pub response_text: String,
    pub parsed: ParsedDecision,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IclExample {
    pub observation: Arc<Observation>,
    pub command: SkillCommand,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PromptError {
    #[error("in-context examples were supplied for variant {0}")]
    VariantMismatch(MethodVariant),
    #[error("variant {0} does not query a model")]
    NotQueried(MethodVariant),
    #[error("history is not gapless: expected step {expected}, found {found}")]
    InconsistentHistory { expected: usize, found: usize },
    #[error("missing prompt template {0}")]
    MissingTemplate(String),
    #[error("reading template {path}: {message}")]
    Io { path: String, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptConfig {
    /// Maximum observations per bundle; `None` keeps the full history.
    pub history_cap: Option<usize>,
    pub plan_horizon: usize,
}

impl Default for PromptConfig {
    fn default() -> Self {
        Self { history_cap: None, plan_horizon: 3 }
    }
}

const TEMPLATE_FILES: [&str; 13] = [
    "system",
    "vlm_pc_initial",
    "vlm_pc_successive",
    "vlm_pc_ic_initial",
    "vlm_pc_ic_successive",
    "no_multi_step_initial",
    "no_multi_step_successive",
    "no_history_initial",
    "format_plan",
    "format_single",
    "prior_plan",
    "icl_header",
    "",
];

/// Prompt texts addressed by name, loaded from the built-in set or a directory.
#[derive(Debug, Clone, PartialEq)]
pub struct TemplateSet {
    texts: HashMap<String, String>,
}

impl Default for TemplateSet {
    fn default() -> Self {
        Self::builtin()
    }
}

impl TemplateSet {
    pub const VERSION: &'static str = "v1";

    pub fn builtin() -> Self {
        let pairs: [(&str, &str); 12] = [
            ("system", include_str!("../prompts/v1/system.txt")),
            ("vlm_pc_initial", include_str!("../prompts/v1/vlm_pc_initial.txt")),
            ("vlm_pc_successive", include_str!("../prompts/v1/vlm_pc_successive.txt")),
            ("vlm_pc_ic_initial", include_str!("../prompts/v1/vlm_pc_ic_initial.txt")),
            ("vlm_pc_ic_successive", include_str!("../prompts/v1/vlm_pc_ic_successive.txt")),
            ("no_multi_step_initial", include_str!("../prompts/v1/no_multi_step_initial.txt")),
            ("no_multi_step_successive", include_str!("../prompts/v1/no_multi_step_successive.txt")),
            ("no_history_initial", include_str!("../prompts/v1/no_history_initial.txt")),
            ("format_plan", include_str!("../prompts/v1/format_plan.txt")),
            ("format_single", include_str!("../prompts/v1/format_single.txt")),
            ("prior_plan", include_str!("../prompts/v1/prior_plan.txt")),
            ("icl_header", include_str!("../prompts/v1/icl_header.txt")),
        ];
        Self {
            texts: pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect(),
        }
    }

    /// Loads `<name>.txt` files from `dir`; files that are absent fall back
    /// to the built-in text.
    pub fn from_dir(dir: &Path) -> Result<Self, PromptError> {
        let mut set = Self::builtin();
        for name in TEMPLATE_FILES.iter().filter(|n| !n.is_empty()) {
            let path = dir.join(format!("{name}.txt"));
            if path.exists() {
                let text = std::fs::read_to_string(&path).map_err(|e| PromptError::Io {
                    path: path.display().to_string(),
                    message: e.to_string(),
                })?;
                set.texts.insert(name.to_string(), text);
            }
        }
        Ok(set)
    }

    fn get(&self, name: &str) -> Result<&str, PromptError> {
        self.texts
            .get(name)
            .map(|s| s.as_str())
            .ok_or_else(|| PromptError::MissingTemplate(name.to_string()))
    }

    pub fn prompt(&self, variant: MethodVariant, kind: PromptKind) -> Result<&str, PromptError> {
        let suffix = match kind {
            PromptKind::Initial => "initial",
            PromptKind::Successive => "successive",
        };
        match variant {
            MethodVariant::Random => Err(PromptError::NotQueried(variant)),
            _ => self.get(&format!("{}_{suffix}", variant.name())),
        }
    }
}

fn fill(template: &str, values: &[(&str, &str)]) -> String {
    let mut out = template.to_string();
    for (key, value) in values {
        out = out.replace(&format!("{{{key}}}"), value);
    }
    out
}

fn history_block(entries: &[&HistoryEntry]) -> String {
    if entries.is_empty() {
        return "(no commands executed yet)".to_string();
    }
    entries
        .iter()
        .map(|e| {
            let marker = match e.parsed.quality {
                ParseQuality::Fallback => " (your answer could not be read; a default command was used)",
                _ => "",
            };
            format!(
                "Step {}: you judged progress {} and the robot executed {}{marker}.",
                e.step_index,
                if e.parsed.progress { "yes" } else { "no" },
                e.parsed.action
            )
        })
        .collect::<Vec<_>>()
        .join("\n")
}

/// Entries kept under the cap: the first plus the most recent, so that with
/// the current view the bundle holds at most `cap` observations.
fn kept_entries(history: &[HistoryEntry], cap: Option<usize>) -> Vec<&HistoryEntry> {
    match cap {
        None => history.iter().collect(),
        Some(cap) => {
            let room = cap.saturating_sub(1);
            if history.len() <= room {
                history.iter().collect()
            } else if room == 0 {
                Vec::new()
            } else {
                let recent = room - 1;
                std::iter::once(&history[0]).chain(history[history.len() - recent..].iter()).collect()
            }
        }
    }
}

#[allow(clippy::too_many_arguments)]
pub fn assemble_query(
    templates: &TemplateSet,
    cfg: &PromptConfig,
    variant: MethodVariant,
    history: &[HistoryEntry],
    current: Arc<Observation>,
    plan_carry: Option<&Plan>,
    icl: Option<&[IclExample]>,
) -> Result<PromptBundle, PromptError> {
    if variant == MethodVariant::Random {
        return Err(PromptError::NotQueried(variant));
    }
    if icl.is_some_and(|e| !e.is_empty()) && variant != MethodVariant::VlmPcIc {
        return Err(PromptError::VariantMismatch(variant));
    }
    for (i, e) in history.iter().enumerate() {
        if e.step_index != i + 1 {
            return Err(PromptError::InconsistentHistory { expected: i + 1, found: e.step_index });
        }
    }

    let query_index = history.len() + 1;
    let kind = variant.prompt_kind_at(query_index);
    let kept = if variant.uses_history() { kept_entries(history, cfg.history_cap) } else { Vec::new() };

    let format_spec = if variant.plans_ahead() {
        fill(templates.get("format_plan")?, &[("PLAN_HORIZON", &cfg.plan_horizon.to_string())])
    } else {
        templates.get("format_single")?.to_string()
    };

    let prior_plan = match plan_carry {
        Some(plan) if variant.carries_plan() => {
            let remaining = if plan.steps.len() > 1 { Plan::listing(&plan.steps[1..]) } else { "none".to_string() };
            fill(templates.get("prior_plan")?, &[("PLAN_TEXT", &plan.source_text), ("PLAN_REMAINING", &remaining)])
        }
        _ => String::new(),
    };

    let mut attachments = Vec::new();
    let icl_block = match icl {
        Some(examples) if query_index == 1 && !examples.is_empty() => {
            let mut block = templates.get("icl_header")?.to_string();
            for (i, ex) in examples.iter().enumerate() {
                let label = format!("Example {}", i + 1);
                block.push_str(&format!("{label}: good command {}\n", ex.command));
                attachments.push(Attachment { label, observation: ex.observation.clone() });
            }
            block.push('\n');
            block
        }
        _ => String::new(),
    };

    let text = fill(
        templates.prompt(variant, kind)?,
        &[
            ("SKILL_MENU", &skill_menu()),
            ("HISTORY_BLOCK", &history_block(&kept)),
            ("ICL_BLOCK", &icl_block),
            ("PRIOR_PLAN", &prior_plan),
            ("FORMAT_SPEC", format_spec.trim_end()),
        ],
    );
    attachments.push(Attachment { label: "Current view".to_string(), observation: current });

    let mut messages = vec![Message { role: Role::System, text: templates.get("system")?.trim_end().to_string(), attachments: Vec::new() }];
    for e in &kept {
        messages.push(Message {
            role: Role::User,
            text: format!("View before step {}.", e.step_index),
            attachments: vec![Attachment { label: format!("Step {} view", e.step_index), observation: e.observation.clone() }],
        });
        messages.push(Message { role: Role::Assistant, text: e.response_text.clone(), attachments: Vec::new() });
    }
    messages.push(Message { role: Role::User, text: text.trim_end().to_string(), attachments });

    Ok(PromptBundle {
        messages,
        query_index,
        kind,
        is_initial_cycle: kind == PromptKind::Initial,
        expects_plan: variant.plans_ahead(),
    })
}

/// Appends one exchange. Earlier entries are moved through untouched.
pub fn record_entry(
    mut history: Vec<HistoryEntry>,
    bundle: &PromptBundle,
    response: &str,
    parsed: ParsedDecision,
) -> Vec<HistoryEntry> {
    let observation = bundle
        .current_observation()
        .cloned()
        .unwrap_or_else(|| Arc::new(Observation { rays: Vec::new(), goal_visible: false, goal_bearing: 0.0, raster: None }));
    history.push(HistoryEntry {
        step_index: history.len() + 1,
        observation,
        prompt_text: bundle.prompt_text().to_string(),
        response_text: response.to_string(),
        parsed,
    });
    history
}

/// Canonical text of a decision, used when no raw response exists.
pub fn canonical_response(decision: &ParsedDecision) -> String {
    render_canonical(decision)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::parse_response;

    fn obs(tag: f64) -> Arc<Observation> {
        Arc::new(Observation { rays: Vec::new(), goal_visible: tag > 0.0, goal_bearing: tag, raster: None })
    }

    fn history(n: usize) -> Vec<HistoryEntry> {
        let mut h = Vec::new();
        for i in 0..n {
            let b = assemble_query(&TemplateSet::builtin(), &PromptConfig::default(), MethodVariant::VlmPc, &h, obs(i as f64 + 0.5), None, None).unwrap();
            let resp = format!("reasoning {i}\nPlan: 1. Walk Small 2. Climb\nYes Walk Small");
            let parsed = parse_response(&resp, true).unwrap();
            h = record_entry(h, &b, &resp, parsed);
        }
        h
    }

    #[test]
    fn cadence_repeats_initial_every_six() {
        let initial: Vec<usize> = (1..=20)
            .filter(|&q| MethodVariant::VlmPc.prompt_kind_at(q) == PromptKind::Initial)
            .collect();
        assert_eq!(initial, vec![1, 7, 13, 19]);
        assert!((1..=20).all(|q| MethodVariant::NoHistory.prompt_kind_at(q) == PromptKind::Initial));
    }

    #[test]
    fn vlm_pc_query_13_is_initial_with_13_views() {
        let h = history(12);
        let plan = h[11].parsed.plan.clone();
        let b = assemble_query(&TemplateSet::builtin(), &PromptConfig::default(), MethodVariant::VlmPc, &h, obs(9.0), plan.as_ref(), None).unwrap();
        assert_eq!(b.query_index, 13);
        assert_eq!(b.kind, PromptKind::Initial);
        assert_eq!(b.observation_count(), 13);
        assert!(b.prompt_text().contains(&plan.unwrap().source_text));
    }

    #[test]
    fn no_history_sees_only_current_view() {
        let h = history(12);
        let b = assemble_query(&TemplateSet::builtin(), &PromptConfig::default(), MethodVariant::NoHistory, &h, obs(9.0), None, None).unwrap();
        assert_eq!(b.observation_count(), 1);
        let text = b.render_text();
        for e in &h {
            assert!(!text.contains(&e.response_text));
        }
    }

    #[test]
    fn first_query_omits_plan_comparison() {
        let b = assemble_query(&TemplateSet::builtin(), &PromptConfig::default(), MethodVariant::VlmPc, &[], obs(1.0), None, None).unwrap();
        assert_eq!(b.kind, PromptKind::Initial);
        assert_eq!(b.observation_count(), 1);
        assert!(!b.prompt_text().contains("prior existing plan"));
        assert!(!b.prompt_text().contains('{'));
    }

    #[test]
    fn icl_only_for_the_ic_variant() {
        let ex = [IclExample { observation: obs(2.0), command: SkillCommand::new(crate::skills::SkillKind::Crawl, crate::skills::Magnitude::Large) }];
        let err = assemble_query(&TemplateSet::builtin(), &PromptConfig::default(), MethodVariant::VlmPc, &[], obs(1.0), None, Some(&ex));
        assert_eq!(err, Err(PromptError::VariantMismatch(MethodVariant::VlmPc)));
        let b = assemble_query(&TemplateSet::builtin(), &PromptConfig::default(), MethodVariant::VlmPcIc, &[], obs(1.0), None, Some(&ex)).unwrap();
        assert!(b.prompt_text().contains("Example 1: good command Crawl Large"));
        assert_eq!(b.observation_count(), 2);
        // inserted right after the first paragraph
        let paragraphs: Vec<&str> = b.prompt_text().split("\n\n").collect();
        assert!(paragraphs[1].starts_with("Here are some example views"));
    }

    #[test]
    fn history_cap_keeps_first_and_recent() {
        let h = history(10);
        let cfg = PromptConfig { history_cap: Some(4), plan_horizon: 3 };
        let b = assemble_query(&TemplateSet::builtin(), &cfg, MethodVariant::VlmPc, &h, obs(9.0), None, None).unwrap();
        assert_eq!(b.observation_count(), 4);
        let labels: Vec<&str> = b.messages.iter().flat_map(|m| m.attachments.iter().map(|a| a.label.as_str())).collect();
        assert_eq!(labels, vec!["Step 1 view", "Step 9 view", "Step 10 view", "Current view"]);
    }

    #[test]
    fn record_entry_appends() {
        let h = history(5);
        assert_eq!(h.len(), 5);
        assert_eq!(h[4].step_index, 5);
        let h6 = history(6);
        assert_eq!(h6[5].step_index, 6);
        assert_eq!(h6[..5], h[..]);
    }

    #[test]
    fn gapped_history_is_rejected() {
        let mut h = history(3);
        h[1].step_index = 5;
        let err = assemble_query(&TemplateSet::builtin(), &PromptConfig::default(), MethodVariant::VlmPc, &h, obs(1.0), None, None);
        assert!(matches!(err, Err(PromptError::InconsistentHistory { .. })));
    }

    #[test]
    fn variants_parse_from_cli_spellings() {
        assert_eq!("vlm-pc".parse::<MethodVariant>(), Ok(MethodVariant::VlmPc));
        assert_eq!("VLM-PC+IC".parse::<MethodVariant>(), Ok(MethodVariant::VlmPcIc));
        assert_eq!("no-multi-step".parse::<MethodVariant>(), Ok(MethodVariant::NoMultiStep));
        assert!("greedy".parse::<MethodVariant>().is_err());
    }
}
