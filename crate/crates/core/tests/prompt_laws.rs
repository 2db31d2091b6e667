use std::path::PathBuf;
use std::sync::{Arc, Mutex};

use vlmpc_core::agent::{run_episode_with_backend, EpisodeConfig};
use vlmpc_core::backend::{BackendConfig, BackendError, Privileged, QueryRecord, VlmBackend};
use vlmpc_core::geometry::Pose;
use vlmpc_core::observation::{render_observation, ViewConfig};
use vlmpc_core::prompting::{
    assemble_query, record_entry, IclExample, MethodVariant, PromptBundle, PromptConfig, PromptKind, TemplateSet,
};
use vlmpc_core::protocol::parse_response;
use vlmpc_core::world::RobotState;
use vlmpc_core::{fixture, Termination};

/// Answers with numbered turns and keeps every bundle it was sent.
struct Recorder {
    seen: Arc<Mutex<Vec<PromptBundle>>>,
}

fn reply(i: usize) -> String {
    format!("Answer marker-{i:02}. The view is unclear.\nPlan: 1. TurnLeft Small 2. Walk Small 3. Walk Small\nNo TurnLeft Small")
}

impl VlmBackend for Recorder {
    fn kind_name(&self) -> String {
        "recorder".into()
    }

    fn query(&mut self, bundle: &PromptBundle, _: Option<Privileged<'_>>) -> Result<QueryRecord, BackendError> {
        let mut seen = self.seen.lock().unwrap();
        seen.push(bundle.clone());
        Ok(QueryRecord {
            bundle_digest: bundle.digest(),
            response_text: reply(seen.len()),
            latency_s: None,
            backend_kind: self.kind_name(),
        })
    }
}

/// Twenty queries: twenty small turns fill a 50 s budget exactly.
fn record_episode(variant: MethodVariant) -> Vec<PromptBundle> {
    let seen = Arc::new(Mutex::new(Vec::new()));
    let mut cfg = EpisodeConfig::new(variant, Arc::new(fixture("indoor2").unwrap()), BackendConfig::oracle(), 0);
    cfg.budget_s = 50.0;
    let out = run_episode_with_backend(&cfg, Box::new(Recorder { seen: seen.clone() })).unwrap();
    assert_eq!(out.result.termination, Termination::BudgetExhausted);
    assert_eq!(out.result.steps, 20);
    let v = seen.lock().unwrap().clone();
    assert_eq!(v.len(), 20);
    v
}

#[test]
fn initial_prompt_recurs_every_six_responses() {
    for variant in [MethodVariant::VlmPc, MethodVariant::NoMultiStep, MethodVariant::VlmPcIc] {
        let bundles = record_episode(variant);
        let initial: Vec<usize> =
            bundles.iter().filter(|b| b.kind == PromptKind::Initial).map(|b| b.query_index).collect();
        assert_eq!(initial, vec![1, 7, 13, 19], "{variant}");
        for (i, b) in bundles.iter().enumerate() {
            assert_eq!(b.query_index, i + 1);
            assert_eq!(b.is_initial_cycle, b.kind == PromptKind::Initial);
        }
    }
}

#[test]
fn history_variants_see_every_prior_exchange() {
    let bundles = record_episode(MethodVariant::VlmPc);
    for b in &bundles {
        let q = b.query_index;
        assert_eq!(b.observation_count(), q);
        let text = b.render_text();
        for k in 1..q {
            assert!(text.contains(&format!("marker-{k:02}")), "query {q} lacks response {k}");
        }
        assert!(!text.contains(&format!("marker-{q:02}")));
    }
}

#[test]
fn no_history_bundles_are_memoryless() {
    let bundles = record_episode(MethodVariant::NoHistory);
    for b in &bundles {
        assert_eq!(b.observation_count(), 1);
        assert!(!b.render_text().contains("marker-"), "query {}", b.query_index);
        assert_eq!(b.messages.len(), 2);
        assert!(b.expects_plan);
    }
    let first = bundles[0].prompt_text();
    assert!(bundles.iter().all(|b| b.prompt_text() == first));
}

#[test]
fn icl_examples_only_in_the_first_query() {
    let course = fixture("indoor2").unwrap();
    let n = course.icl_annotations.as_ref().unwrap().len();
    let bundles = record_episode(MethodVariant::VlmPcIc);
    let first = &bundles[0];
    assert!(first.prompt_text().contains("good command"));
    let last = first.messages.last().unwrap();
    assert_eq!(last.attachments.len(), n + 1);
    assert!(last.attachments[..n].iter().all(|a| a.label.starts_with("Example ")));
    for b in &bundles[1..] {
        let text = b.render_text();
        assert!(!text.contains("good command"), "query {}", b.query_index);
        assert!(!text.contains("[Example "), "query {}", b.query_index);
        assert_eq!(b.observation_count(), b.query_index);
    }
}

#[test]
fn no_multi_step_never_asks_for_a_plan() {
    let bundles = record_episode(MethodVariant::NoMultiStep);
    assert!(bundles.iter().all(|b| !b.expects_plan));
    assert!(bundles.iter().all(|b| !b.prompt_text().contains("PLAN")));
}

// ---- golden text -----------------------------------------------------------

fn golden_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

/// Compares with the frozen file; `UPDATE_GOLDEN=1` rewrites it.
fn check_golden(name: &str, actual: &str) {
    let path = golden_dir().join(name);
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::create_dir_all(golden_dir()).unwrap();
        std::fs::write(&path, actual).unwrap();
    }
    let want = std::fs::read_to_string(&path).unwrap_or_else(|_| panic!("missing golden file {}", path.display()));
    assert!(want == actual, "golden mismatch for {name}");
}

fn view_at(course: &vlmpc_core::CourseSpec, x: f64, y: f64, h: f64) -> Arc<vlmpc_core::observation::Observation> {
    Arc::new(render_observation(&RobotState::at(Pose::new(x, y, h)), course, &ViewConfig::default()))
}

/// Three-step history on indoor2 with fixed answers.
fn third_query(variant: MethodVariant) -> PromptBundle {
    let course = fixture("indoor2").unwrap();
    let templates = TemplateSet::builtin();
    let cfg = PromptConfig::default();
    let answers = [
        "The couch is low ahead.\nPlan: 1. Crawl Medium 2. Crawl Medium 3. Walk Medium\nYes Crawl Medium",
        "Still under the couch.\nPlan: 1. Crawl Medium 2. Walk Medium 3. Walk Medium\nYes Crawl Medium",
    ];
    let views = [view_at(&course, 0.3, 0.0, 0.0), view_at(&course, 1.2, 0.0, 0.0), view_at(&course, 2.1, 0.0, 0.0)];
    let mut history = Vec::new();
    let mut plan = None;
    for (i, a) in answers.iter().enumerate() {
        let b = assemble_query(&templates, &cfg, variant, &history, views[i].clone(), plan.as_ref(), None).unwrap();
        let d = parse_response(a, variant == MethodVariant::VlmPc).unwrap();
        plan = d.plan.clone();
        history = record_entry(history, &b, a, d);
    }
    assemble_query(&templates, &cfg, variant, &history, views[2].clone(), plan.as_ref(), None).unwrap()
}

#[test]
fn golden_vlm_pc_third_query() {
    check_golden("vlm_pc_q3.txt", &third_query(MethodVariant::VlmPc).render_text());
}

#[test]
fn golden_no_multi_step_third_query() {
    check_golden("no_multi_step_q3.txt", &third_query(MethodVariant::NoMultiStep).render_text());
}

#[test]
fn golden_icl_first_query() {
    let course = fixture("indoor2").unwrap();
    let icl: Vec<IclExample> = course
        .icl_annotations
        .as_ref()
        .unwrap()
        .iter()
        .map(|a| IclExample { observation: view_at(&course, a.pose.x, a.pose.y, a.pose.heading), command: a.command })
        .collect();
    let b = assemble_query(
        &TemplateSet::builtin(),
        &PromptConfig::default(),
        MethodVariant::VlmPcIc,
        &[],
        view_at(&course, 0.3, 0.0, 0.0),
        None,
        Some(&icl),
    )
    .unwrap();
    check_golden("vlm_pc_ic_q1.txt", &b.render_text());
}

#[test]
fn golden_no_history_prompt() {
    let course = fixture("indoor2").unwrap();
    let b = assemble_query(
        &TemplateSet::builtin(),
        &PromptConfig::default(),
        MethodVariant::NoHistory,
        &[],
        view_at(&course, 0.3, 0.0, 0.0),
        None,
        None,
    )
    .unwrap();
    check_golden("no_history_q1.txt", &b.render_text());
    assert_eq!(b.kind, PromptKind::Initial);
}
