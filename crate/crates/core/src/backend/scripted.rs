//! Replays recorded responses in order, checking each query's digest.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{BackendError, Privileged, QueryRecord, VlmBackend};
use crate::prompting::PromptBundle;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptRecord {
    pub bundle_digest: String,
    pub response_text: String,
}

/// Reads a script file. Accepts plain `{bundle_digest, response_text}` lines
/// or an episode transcript, whose per-step `queries` are taken in order.
pub fn load_script(path: &Path) -> Result<Vec<ScriptRecord>, BackendError> {
    let io = |message: String| BackendError::Io { path: path.display().to_string(), message };
    let text = std::fs::read_to_string(path).map_err(|e| io(e.to_string()))?;
    parse_script(&text).map_err(io)
}

pub(crate) fn parse_script(text: &str) -> Result<Vec<ScriptRecord>, String> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let v: Value = serde_json::from_str(line).map_err(|e| format!("line {}: {e}", n + 1))?;
        if let Some(queries) = v.get("queries").and_then(Value::as_array) {
            for q in queries {
                out.push(serde_json::from_value(q.clone()).map_err(|e| format!("line {}: {e}", n + 1))?);
            }
        } else if v.get("bundle_digest").is_some() {
            out.push(serde_json::from_value(v).map_err(|e| format!("line {}: {e}", n + 1))?);
        }
    }
    Ok(out)
}

pub struct ScriptedBackend {
    records: Vec<ScriptRecord>,
    cursor: usize,
    allow_drift: bool,
}

impl ScriptedBackend {
    pub fn new(records: Vec<ScriptRecord>, allow_drift: bool) -> Self {
        Self { records, cursor: 0, allow_drift }
    }

    pub fn remaining(&self) -> usize {
        self.records.len() - self.cursor
    }
}

impl VlmBackend for ScriptedBackend {
    fn kind_name(&self) -> String {
        "scripted".to_string()
    }

    fn query(&mut self, bundle: &PromptBundle, _privileged: Option<Privileged<'_>>) -> Result<QueryRecord, BackendError> {
        let rec = self
            .records
            .get(self.cursor)
            .ok_or(BackendError::TranscriptExhausted(self.records.len()))?;
        let digest = bundle.digest();
        if rec.bundle_digest != digest && !self.allow_drift {
            return Err(BackendError::DigestMismatch {
                index: self.cursor,
                expected: rec.bundle_digest.clone(),
                actual: digest,
            });
        }
        self.cursor += 1;
        Ok(QueryRecord {
            bundle_digest: digest,
            response_text: rec.response_text.clone(),
            latency_s: None,
            backend_kind: self.kind_name(),
        })
    }
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::observation::Observation;
    use crate::prompting::{assemble_query, MethodVariant, PromptConfig, TemplateSet};

    fn bundle() -> PromptBundle {
        let o = Arc::new(Observation { rays: Vec::new(), goal_visible: false, goal_bearing: 0.0, raster: None });
        assemble_query(&TemplateSet::builtin(), &PromptConfig::default(), MethodVariant::NoHistory, &[], o, None, None).unwrap()
    }

    #[test]
    fn three_records_then_exhausted() {
        let b = bundle();
        let d = b.digest();
        let recs: Vec<ScriptRecord> = ["a", "b", "c"]
            .iter()
            .map(|t| ScriptRecord { bundle_digest: d.clone(), response_text: t.to_string() })
            .collect();
        let mut s = ScriptedBackend::new(recs, false);
        let got: Vec<String> = (0..3).map(|_| s.query(&b, None).unwrap().response_text).collect();
        assert_eq!(got, ["a", "b", "c"]);
        assert!(matches!(s.query(&b, None), Err(BackendError::TranscriptExhausted(3))));
    }

    #[test]
    fn digest_drift_is_an_error_unless_allowed() {
        let b = bundle();
        let recs = vec![ScriptRecord { bundle_digest: "0".repeat(64), response_text: "Yes Walk Small".into() }];
        let mut strict = ScriptedBackend::new(recs.clone(), false);
        assert!(matches!(strict.query(&b, None), Err(BackendError::DigestMismatch { index: 0, .. })));
        let mut loose = ScriptedBackend::new(recs, true);
        assert_eq!(loose.query(&b, None).unwrap().response_text, "Yes Walk Small");
    }

    #[test]
    fn transcript_lines_are_read_as_scripts() {
        let text = concat!(
            "{\"kind\":\"header\",\"course\":\"x\"}\n",
            "{\"kind\":\"step\",\"queries\":[{\"bundle_digest\":\"aa\",\"response_text\":\"r1\"},{\"bundle_digest\":\"bb\",\"response_text\":\"r2\"}]}\n",
            "{\"bundle_digest\":\"cc\",\"response_text\":\"r3\"}\n",
        );
        let recs = parse_script(text).unwrap();
        assert_eq!(recs.iter().map(|r| r.response_text.as_str()).collect::<Vec<_>>(), ["r1", "r2", "r3"]);
    }
}
