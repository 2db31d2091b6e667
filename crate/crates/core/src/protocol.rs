//! Response protocol: turns free-form model output into a decision.
//!
//! The contract is the terminal triple `Yes|No <Skill> <Magnitude>` that ends
//! every answer. When a plan is expected, the most recent enumerated list of
//! skills before the triple is read as the plan. Everything else is prose and
//! is kept only verbatim.

use std::fmt::Write as _;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::skills::{parse_magnitude, parse_skill_name, Magnitude, SkillCommand, SkillKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParseQuality {
    /// The last line is exactly the triple.
    Exact,
    /// The triple was found amid other text or needed repair.
    Recovered,
    /// Nothing usable; the configured fallback was substituted.
    Fallback,
}

/// One plan item. Magnitude is optional because plans often list skills only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanStep {
    pub skill: SkillKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub magnitude: Option<Magnitude>,
}

impl PlanStep {
    pub fn matches(&self, cmd: SkillCommand) -> bool {
        self.skill == cmd.skill && self.magnitude.is_none_or(|m| m == cmd.magnitude)
    }

    pub fn to_command(self, default: Magnitude) -> SkillCommand {
        SkillCommand::new(self.skill, self.magnitude.unwrap_or(default))
    }
}

impl From<SkillCommand> for PlanStep {
    fn from(c: SkillCommand) -> Self {
        Self { skill: c.skill, magnitude: Some(c.magnitude) }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Plan {
    pub steps: Vec<PlanStep>,
    /// The plan exactly as written in the response.
    pub source_text: String,
}

impl Plan {
    /// Canonical `1. Skill [Magnitude] 2. ...` listing.
    pub fn listing(steps: &[PlanStep]) -> String {
        let mut out = String::new();
        for (i, s) in steps.iter().enumerate() {
            if i > 0 {
                out.push(' ');
            }
            let _ = write!(out, "{}. {}", i + 1, s.skill);
            if let Some(m) = s.magnitude {
                let _ = write!(out, " {m}");
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParsedDecision {
    /// Whether the previous command made progress.
    pub progress: bool,
    pub action: SkillCommand,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plan: Option<Plan>,
    pub raw: String,
    pub quality: ParseQuality,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("no terminal `yes|no skill magnitude` triple in response (starts with {excerpt:?})")]
pub struct MalformedResponse {
    pub excerpt: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProtocolConfig {
    pub fallback: SkillCommand,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        Self { fallback: SkillCommand::new(SkillKind::Walk, Magnitude::Small) }
    }
}

pub fn fallback_decision(cfg: &ProtocolConfig) -> ParsedDecision {
    ParsedDecision {
        progress: false,
        action: cfg.fallback,
        plan: None,
        raw: String::new(),
        quality: ParseQuality::Fallback,
    }
}

pub fn render_canonical(decision: &ParsedDecision) -> String {
    let mut out = String::new();
    if let Some(plan) = &decision.plan {
        let _ = writeln!(out, "Plan: {}", Plan::listing(&plan.steps));
    }
    let _ = write!(
        out,
        "{} {} {}",
        if decision.progress { "Yes" } else { "No" },
        decision.action.skill,
        decision.action.magnitude
    );
    out
}

// ---- parsing --------------------------------------------------------------

/// A word token with its starting byte offset in the source.
#[derive(Debug, Clone)]
struct Word {
    text: String,
    start: usize,
}

fn words(text: &str) -> Vec<Word> {
    let mut out = Vec::new();
    let mut cur: Option<(usize, String)> = None;
    for (i, ch) in text.char_indices() {
        if ch.is_ascii_alphabetic() {
            match &mut cur {
                Some((_, w)) => w.push(ch.to_ascii_lowercase()),
                None => cur = Some((i, ch.to_ascii_lowercase().to_string())),
            }
        } else if let Some((start, w)) = cur.take() {
            out.push(Word { text: w, start });
        }
    }
    if let Some((start, w)) = cur {
        out.push(Word { text: w, start });
    }
    out
}

fn yes_no(w: &str) -> Option<bool> {
    match w {
        "yes" => Some(true),
        "no" => Some(false),
        _ => None,
    }
}

/// Skill starting at `words[i]`: tries two-word synonyms first.
fn skill_at(ws: &[Word], i: usize) -> Option<(SkillKind, usize)> {
    if i + 1 < ws.len() {
        if let Ok(k) = parse_skill_name(&format!("{} {}", ws[i].text, ws[i + 1].text)) {
            return Some((k, 2));
        }
    }
    let w = ws.get(i)?;
    parse_skill_name(&w.text).ok().map(|k| (k, 1))
}

struct Triple {
    progress: bool,
    action: SkillCommand,
    /// Byte offset where the triple starts.
    start: usize,
    repaired: bool,
}

fn exact_triple(raw: &str) -> Option<Triple> {
    let trimmed_end = raw.trim_end();
    let line_start = trimmed_end.rfind('\n').map_or(0, |i| i + 1);
    let line = &trimmed_end[line_start..];
    let parts: Vec<&str> = line.split_whitespace().collect();
    if parts.len() != 3 {
        return None;
    }
    let progress = yes_no(&parts[0].to_ascii_lowercase())?;
    let skill = SkillKind::ALL
        .into_iter()
        .find(|k| k.canonical_name().eq_ignore_ascii_case(parts[1]))?;
    let magnitude = Magnitude::ALL
        .into_iter()
        .find(|m| m.canonical_name().eq_ignore_ascii_case(parts[2]))?;
    let start = line_start + (line.len() - line.trim_start().len());
    Some(Triple { progress, action: SkillCommand::new(skill, magnitude), start, repaired: false })
}

fn tolerant_triple(raw: &str) -> Option<Triple> {
    let ws = words(raw);
    // A bare `yes|no skill` tail gets the least-commitment magnitude.
    for tail_len in [2usize, 3] {
        if ws.len() >= tail_len {
            let i = ws.len() - tail_len;
            if let (Some(progress), Some((skill, used))) = (yes_no(&ws[i].text), skill_at(&ws, i + 1)) {
                if i + 1 + used == ws.len() {
                    return Some(Triple {
                        progress,
                        action: SkillCommand::new(skill, Magnitude::Medium),
                        start: ws[i].start,
                        repaired: true,
                    });
                }
            }
        }
    }
    for i in (0..ws.len()).rev() {
        let Some(progress) = yes_no(&ws[i].text) else { continue };
        let Some((skill, used)) = skill_at(&ws, i + 1) else { continue };
        let Some(mw) = ws.get(i + 1 + used) else { continue };
        let Ok(magnitude) = parse_magnitude(&mw.text) else { continue };
        return Some(Triple {
            progress,
            action: SkillCommand::new(skill, magnitude),
            start: ws[i].start,
            repaired: false,
        });
    }
    None
}

fn plan_item_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(
            r"(?i)\b(\d{1,2})\s*[.):]\s*[*_`]*\s*(walk[\s_-]+forward|walk|climb|crawl|turn[\s_-]*left|left[\s_-]+turn|turn[\s_-]*right|right[\s_-]+turn|backward|back[\s_-]+up)\b(?:[*_`]*[\s,:(-]*(small|medium|large)\b)?",
        )
        .expect("plan regex compiles")
    })
}

/// Most recent enumerated list (numbered from 1, consecutive) in `text`.
fn extract_plan(text: &str) -> Option<Plan> {
    let mut lists: Vec<(usize, usize, Vec<PlanStep>)> = Vec::new();
    let mut current: Option<(usize, usize, Vec<PlanStep>)> = None;
    for cap in plan_item_regex().captures_iter(text) {
        let whole = cap.get(0).expect("match");
        let n: usize = cap[1].parse().unwrap_or(0);
        let Ok(skill) = parse_skill_name(&cap[2]) else { continue };
        let magnitude = cap.get(3).and_then(|m| parse_magnitude(m.as_str()).ok());
        let step = PlanStep { skill, magnitude };
        match &mut current {
            Some((_, end, steps)) if n == steps.len() + 1 => {
                steps.push(step);
                *end = whole.end();
            }
            _ => {
                if let Some(done) = current.take() {
                    lists.push(done);
                }
                if n == 1 {
                    current = Some((whole.start(), whole.end(), vec![step]));
                }
            }
        }
    }
    if let Some(done) = current.take() {
        lists.push(done);
    }
    let (start, end, steps) = lists.pop()?;
    Some(Plan { steps, source_text: text[start..end].to_string() })
}

pub fn parse_response(raw: &str, expects_plan: bool) -> Result<ParsedDecision, MalformedResponse> {
    let (triple, mut quality) = match exact_triple(raw) {
        Some(t) => (t, ParseQuality::Exact),
        None => match tolerant_triple(raw) {
            Some(t) => (t, ParseQuality::Recovered),
            None => {
                return Err(MalformedResponse { excerpt: raw.chars().take(80).collect() });
            }
        },
    };
    debug_assert!(!triple.repaired || quality == ParseQuality::Recovered);

    let plan = if expects_plan {
        extract_plan(&raw[..triple.start]).map(|mut plan| {
            if !plan.steps[0].matches(triple.action) {
                // the terminal triple is the latest statement of intent
                plan.steps[0] = PlanStep::from(triple.action);
                quality = ParseQuality::Recovered;
            }
            plan
        })
    } else {
        None
    };

    Ok(ParsedDecision {
        progress: triple.progress,
        action: triple.action,
        plan,
        raw: raw.to_string(),
        quality,
    })
}
