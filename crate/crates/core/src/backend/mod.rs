//! Query interface shared by the live client, scripted replay, and the
//! privileged oracle policies.

mod live;
mod oracle;
mod scripted;

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::course::CourseSpec;
use crate::prompting::{MethodVariant, PromptBundle};
use crate::world::RobotState;

pub use live::{build_request_body, LiveBackend, ENV_API_KEY, ENV_ENDPOINT, ENV_MODEL};
pub use oracle::{
    OracleBackend, OracleFlavor, DEAD_END_RANGE, GOAL_BEARING_THRESHOLD, STUCK_REPEAT_COUNT, WALL_NEAR_RANGE,
};
pub use scripted::{load_script, ScriptRecord, ScriptedBackend};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplingParams {
    pub temperature: f64,
    pub top_p: f64,
    pub max_tokens: u32,
}

impl Default for SamplingParams {
    fn default() -> Self {
        Self { temperature: 0.7, top_p: 0.95, max_tokens: 800 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum BackendKind {
    Live,
    Scripted { path: PathBuf },
    /// `None` picks the flavor matched to the method variant.
    Oracle { flavor: Option<OracleFlavor> },
}

impl fmt::Display for BackendKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BackendKind::Live => f.write_str("live"),
            BackendKind::Scripted { path } => write!(f, "scripted:{}", path.display()),
            BackendKind::Oracle { flavor: None } => f.write_str("oracle"),
            BackendKind::Oracle { flavor: Some(fl) } => write!(f, "oracle:{fl}"),
        }
    }
}

impl FromStr for BackendKind {
    type Err = BackendError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s == "live" {
            return Ok(BackendKind::Live);
        }
        if s == "oracle" {
            return Ok(BackendKind::Oracle { flavor: None });
        }
        if let Some(fl) = s.strip_prefix("oracle:") {
            return Ok(BackendKind::Oracle { flavor: Some(fl.parse()?) });
        }
        if let Some(path) = s.strip_prefix("scripted:") {
            return Ok(BackendKind::Scripted { path: PathBuf::from(path) });
        }
        Err(BackendError::Config(format!("unknown backend {s:?}; expected live, oracle[:flavor] or scripted:<path>")))
    }
}

/// Everything needed to open a backend. Never holds the credential.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendConfig {
    pub kind: BackendKind,
    pub sampling: SamplingParams,
    pub endpoint: String,
    pub model_name: String,
    pub request_timeout_s: f64,
    /// Re-queries after a malformed response, and transport retries for Live.
    pub retry_budget: u32,
    /// Scripted only: accept records whose digest does not match.
    #[serde(default)]
    pub allow_drift: bool,
}

impl BackendConfig {
    pub const DEFAULT_ENDPOINT: &'static str = "https://api.openai.com/v1";
    pub const DEFAULT_MODEL: &'static str = "gpt-4o";

    pub fn new(kind: BackendKind) -> Self {
        Self {
            kind,
            sampling: SamplingParams::default(),
            endpoint: Self::DEFAULT_ENDPOINT.to_string(),
            model_name: Self::DEFAULT_MODEL.to_string(),
            request_timeout_s: 60.0,
            retry_budget: 2,
            allow_drift: false,
        }
    }

    pub fn oracle() -> Self {
        Self::new(BackendKind::Oracle { flavor: None })
    }

    pub fn scripted(path: impl Into<PathBuf>) -> Self {
        Self::new(BackendKind::Scripted { path: path.into() })
    }

    /// Endpoint and model overrides from the environment, for Live runs.
    pub fn with_env_overrides(mut self) -> Self {
        if let Ok(e) = std::env::var(ENV_ENDPOINT) {
            if !e.trim().is_empty() {
                self.endpoint = e.trim().to_string();
            }
        }
        if let Ok(m) = std::env::var(ENV_MODEL) {
            if !m.trim().is_empty() {
                self.model_name = m.trim().to_string();
            }
        }
        self
    }
}

impl Default for BackendConfig {
    fn default() -> Self {
        Self::oracle()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryRecord {
    pub bundle_digest: String,
    pub response_text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub latency_s: Option<f64>,
    pub backend_kind: String,
}

/// World state handed to privileged backends.
#[derive(Debug, Clone, Copy)]
pub struct Privileged<'a> {
    pub state: &'a RobotState,
    pub course: &'a CourseSpec,
}

#[derive(Debug, Error)]
pub enum BackendError {
    #[error("transport error after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },
    #[error("environment variable {0} is not set")]
    MissingCredential(&'static str),
    #[error("script exhausted after {0} record(s)")]
    TranscriptExhausted(usize),
    #[error("bundle digest mismatch at record {index}: script has {expected}, query is {actual}")]
    DigestMismatch { index: usize, expected: String, actual: String },
    #[error("oracle backend needs privileged world state")]
    MissingPrivilege,
    #[error("observation {0:?} has no raster to attach")]
    MissingRaster(String),
    #[error("malformed service reply: {0}")]
    BadReply(String),
    #[error("reading script {path}: {message}")]
    Io { path: String, message: String },
    #[error("{0}")]
    Config(String),
}

pub trait VlmBackend: Send {
    fn kind_name(&self) -> String;

    /// Whether observations should carry rasters.
    fn wants_raster(&self) -> bool {
        false
    }

    fn query(&mut self, bundle: &PromptBundle, privileged: Option<Privileged<'_>>) -> Result<QueryRecord, BackendError>;
}

/// Opens a fresh per-episode backend instance.
pub fn open_backend(
    cfg: &BackendConfig,
    variant: MethodVariant,
    seed: u64,
    plan_horizon: usize,
) -> Result<Box<dyn VlmBackend>, BackendError> {
    Ok(match &cfg.kind {
        BackendKind::Live => Box::new(LiveBackend::from_env(cfg)?),
        BackendKind::Scripted { path } => {
            Box::new(ScriptedBackend::new(load_script(path)?, cfg.allow_drift))
        }
        BackendKind::Oracle { flavor } => {
            let flavor = flavor.unwrap_or_else(|| OracleFlavor::for_variant(variant));
            Box::new(OracleBackend::new(flavor, seed, plan_horizon))
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn live_defaults() {
        let s = SamplingParams::default();
        assert_eq!((s.temperature, s.top_p, s.max_tokens), (0.7, 0.95, 800));
        assert_eq!(BackendConfig::oracle().retry_budget, 2);
    }

    #[test]
    fn backend_spec_strings() {
        assert_eq!("live".parse::<BackendKind>().unwrap(), BackendKind::Live);
        assert_eq!("oracle".parse::<BackendKind>().unwrap(), BackendKind::Oracle { flavor: None });
        assert_eq!(
            "oracle:memory_plan".parse::<BackendKind>().unwrap(),
            BackendKind::Oracle { flavor: Some(OracleFlavor::MemoryPlan) }
        );
        assert_eq!(
            "scripted:/tmp/a.jsonl".parse::<BackendKind>().unwrap(),
            BackendKind::Scripted { path: PathBuf::from("/tmp/a.jsonl") }
        );
        assert!("gpt".parse::<BackendKind>().is_err());
        for k in ["live", "oracle", "oracle:greedy_visible", "scripted:x.jsonl"] {
            assert_eq!(k.parse::<BackendKind>().unwrap().to_string(), k);
        }
    }
}
