use std::path::PathBuf;
use std::sync::Arc;

use base64::Engine as _;
use serde_json::Value;
use sha2::{Digest, Sha256};

use vlmpc_core::backend::{build_request_body, BackendError, SamplingParams};
use vlmpc_core::fixture;
use vlmpc_core::geometry::Pose;
use vlmpc_core::observation::{render_observation, Observation, ViewConfig};
use vlmpc_core::prompting::{assemble_query, record_entry, IclExample, MethodVariant, PromptBundle, PromptConfig, TemplateSet};
use vlmpc_core::protocol::parse_response;
use vlmpc_core::world::RobotState;

fn view(course: &vlmpc_core::CourseSpec, x: f64, y: f64, h: f64, cfg: &ViewConfig) -> Arc<Observation> {
    Arc::new(render_observation(&RobotState::at(Pose::new(x, y, h)), course, cfg))
}

fn bundle_with_history(cfg: &ViewConfig) -> PromptBundle {
    let course = fixture("indoor2").unwrap();
    let templates = TemplateSet::builtin();
    let pc = PromptConfig::default();
    let mut history = Vec::new();
    let answers = ["Low couch ahead.\nPlan: 1. Crawl Medium 2. Crawl Medium\nYes Crawl Medium", "No Crawl Small"];
    let poses = [(0.3, 0.0, 0.0), (1.2, 0.0, 0.0), (2.1, 0.0, 0.2)];
    for (i, a) in answers.iter().enumerate() {
        let (x, y, h) = poses[i];
        let b = assemble_query(&templates, &pc, MethodVariant::VlmPc, &history, view(&course, x, y, h, cfg), None, None).unwrap();
        history = record_entry(history, &b, a, parse_response(a, true).unwrap());
    }
    let (x, y, h) = poses[2];
    assemble_query(&templates, &pc, MethodVariant::VlmPc, &history, view(&course, x, y, h, cfg), None, None).unwrap()
}

fn icl_bundle(cfg: &ViewConfig) -> PromptBundle {
    let course = fixture("indoor2").unwrap();
    let icl: Vec<IclExample> = course
        .icl_annotations
        .as_ref()
        .unwrap()
        .iter()
        .map(|a| IclExample { observation: view(&course, a.pose.x, a.pose.y, a.pose.heading, cfg), command: a.command })
        .collect();
    assemble_query(
        &TemplateSet::builtin(),
        &PromptConfig::default(),
        MethodVariant::VlmPcIc,
        &[],
        view(&course, 0.3, 0.0, 0.0, cfg),
        None,
        Some(&icl),
    )
    .unwrap()
}

/// Replaces each data URL by a digest of the decoded PNG and its size.
fn redact_images(body: &mut Value) -> usize {
    let mut n = 0;
    for m in body["messages"].as_array_mut().unwrap() {
        let Some(parts) = m["content"].as_array_mut() else { continue };
        for p in parts {
            if p["type"] == "image_url" {
                let url = p["image_url"]["url"].as_str().unwrap();
                let b64 = url.strip_prefix("data:image/png;base64,").expect("png data url");
                let bytes = base64::engine::general_purpose::STANDARD.decode(b64).unwrap();
                let decoder = png::Decoder::new(std::io::Cursor::new(&bytes));
                let reader = decoder.read_info().unwrap();
                let info = reader.info();
                let tag = format!("png {}x{} sha256:{}", info.width, info.height, hex::encode(Sha256::digest(&bytes)));
                p["image_url"]["url"] = Value::String(tag);
                n += 1;
            }
        }
    }
    n
}

fn check_golden(name: &str, actual: &str) {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden");
    let path = dir.join(name);
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::create_dir_all(&dir).unwrap();
        std::fs::write(&path, actual).unwrap();
    }
    let want = std::fs::read_to_string(&path).unwrap_or_else(|_| panic!("missing golden file {}", path.display()));
    assert!(want == actual, "golden mismatch for {name}");
}

#[test]
fn body_carries_sampling_and_one_image_per_observation() {
    let cfg = ViewConfig::default().with_raster();
    for (name, bundle) in [("history", bundle_with_history(&cfg)), ("icl", icl_bundle(&cfg))] {
        let mut body = build_request_body(&bundle, "gpt-4o", &SamplingParams::default()).unwrap();
        assert_eq!(body["temperature"], 0.7);
        assert_eq!(body["top_p"], 0.95);
        assert_eq!(body["max_tokens"], 800);
        assert_eq!(body["model"], "gpt-4o");
        let images = redact_images(&mut body);
        assert_eq!(images, bundle.observation_count(), "{name}");
        assert_eq!(images, 3, "{name}");
        let text = serde_json::to_string_pretty(&body).unwrap();
        assert!(!text.to_lowercase().contains("authorization"));
        check_golden(&format!("live_body_{name}.json"), &(text + "\n"));
    }
}

#[test]
fn body_is_deterministic() {
    let cfg = ViewConfig::default().with_raster();
    let a = build_request_body(&bundle_with_history(&cfg), "m", &SamplingParams::default()).unwrap();
    let b = build_request_body(&bundle_with_history(&cfg), "m", &SamplingParams::default()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn missing_raster_is_an_error() {
    let bundle = bundle_with_history(&ViewConfig::default());
    assert!(matches!(
        build_request_body(&bundle, "m", &SamplingParams::default()),
        Err(BackendError::MissingRaster(_))
    ));
}
