//! Chat-completions client. Observations go out as base64 PNG data URLs.

use std::time::{Duration, Instant};

use base64::Engine as _;
use serde_json::{json, Value};

use super::{BackendConfig, BackendError, Privileged, QueryRecord, SamplingParams, VlmBackend};
use crate::prompting::{PromptBundle, Role};

pub const ENV_API_KEY: &str = "VLMPC_API_KEY";
pub const ENV_ENDPOINT: &str = "VLMPC_ENDPOINT";
pub const ENV_MODEL: &str = "VLMPC_MODEL";

/// Serialized request body for one query. Pure; carries no credential.
pub fn build_request_body(bundle: &PromptBundle, model: &str, sampling: &SamplingParams) -> Result<Value, BackendError> {
    let mut messages = Vec::with_capacity(bundle.messages.len());
    for m in &bundle.messages {
        let role = match m.role {
            Role::System => "system",
            Role::User => "user",
            Role::Assistant => "assistant",
        };
        if m.attachments.is_empty() {
            messages.push(json!({ "role": role, "content": m.text }));
            continue;
        }
        let mut parts = vec![json!({ "type": "text", "text": m.text })];
        for a in &m.attachments {
            let raster = a
                .observation
                .raster
                .as_ref()
                .ok_or_else(|| BackendError::MissingRaster(a.label.clone()))?;
            let data = base64::engine::general_purpose::STANDARD.encode(raster.to_png());
            parts.push(json!({ "type": "text", "text": a.label }));
            parts.push(json!({
                "type": "image_url",
                "image_url": { "url": format!("data:image/png;base64,{data}") }
            }));
        }
        messages.push(json!({ "role": role, "content": parts }));
    }
    Ok(json!({
        "model": model,
        "messages": messages,
        "temperature": sampling.temperature,
        "top_p": sampling.top_p,
        "max_tokens": sampling.max_tokens,
    }))
}

pub struct LiveBackend {
    agent: ureq::Agent,
    url: String,
    api_key: String,
    model: String,
    sampling: SamplingParams,
    retry_budget: u32,
}

impl LiveBackend {
    pub fn from_env(cfg: &BackendConfig) -> Result<Self, BackendError> {
        let api_key = std::env::var(ENV_API_KEY)
            .ok()
            .filter(|k| !k.trim().is_empty())
            .ok_or(BackendError::MissingCredential(ENV_API_KEY))?;
        let cfg = cfg.clone().with_env_overrides();
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs_f64(cfg.request_timeout_s.max(1.0))))
            .build()
            .into();
        Ok(Self {
            agent,
            url: format!("{}/chat/completions", cfg.endpoint.trim_end_matches('/')),
            api_key: api_key.trim().to_string(),
            model: cfg.model_name,
            sampling: cfg.sampling,
            retry_budget: cfg.retry_budget,
        })
    }

    fn send_once(&self, body: &Value) -> Result<String, String> {
        let mut resp = self
            .agent
            .post(&self.url)
            .header("Authorization", &format!("Bearer {}", self.api_key))
            .send_json(body)
            .map_err(|e| e.to_string())?;
        let reply: Value = resp.body_mut().read_json().map_err(|e| e.to_string())?;
        reply["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| format!("no choices[0].message.content in reply: {}", truncate(&reply.to_string(), 200)))
    }
}

fn truncate(s: &str, n: usize) -> String {
    s.chars().take(n).collect()
}

impl VlmBackend for LiveBackend {
    fn kind_name(&self) -> String {
        format!("live:{}", self.model)
    }

    fn wants_raster(&self) -> bool {
        true
    }

    fn query(&mut self, bundle: &PromptBundle, _privileged: Option<Privileged<'_>>) -> Result<QueryRecord, BackendError> {
        let body = build_request_body(bundle, &self.model, &self.sampling)?;
        let started = Instant::now();
        let attempts = self.retry_budget + 1;
        let mut last = String::new();
        for attempt in 0..attempts {
            if attempt > 0 {
                std::thread::sleep(Duration::from_millis(500 << attempt.min(4)));
            }
            match self.send_once(&body) {
                Ok(text) => {
                    return Ok(QueryRecord {
                        bundle_digest: bundle.digest(),
                        response_text: text,
                        latency_s: Some(started.elapsed().as_secs_f64()),
                        backend_kind: self.kind_name(),
                    })
                }
                Err(e) => last = e,
            }
        }
        Err(BackendError::Transport { attempts, message: last })
    }
}
