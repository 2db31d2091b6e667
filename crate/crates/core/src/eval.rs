//! Trial matrices and the summary metrics over their results.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::{run_episode, AgentError, EpisodeConfig, EpisodeOutcome, EpisodeResult, Termination, DEFAULT_BUDGET_S};
use crate::backend::BackendConfig;
use crate::course::CourseSpec;
use crate::prompting::MethodVariant;

#[derive(Debug, Clone)]
pub struct TrialMatrix {
    pub courses: Vec<Arc<CourseSpec>>,
    pub variants: Vec<MethodVariant>,
    pub trials_per_cell: usize,
    pub base_seed: u64,
    pub budget_s: f64,
    pub plan_horizon: usize,
}

impl TrialMatrix {
    pub fn new(courses: Vec<Arc<CourseSpec>>, variants: Vec<MethodVariant>) -> Self {
        Self {
            courses,
            variants,
            trials_per_cell: 5,
            base_seed: 0,
            budget_s: DEFAULT_BUDGET_S,
            plan_horizon: crate::agent::DEFAULT_PLAN_HORIZON,
        }
    }

    pub fn seed_for(&self, trial: usize) -> u64 {
        self.base_seed + trial as u64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub trial: usize,
    #[serde(flatten)]
    pub result: EpisodeResult,
}

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("matrix has no cells")]
    EmptyMatrix,
    #[error("variant vlm_pc_ic needs in-context annotations, course {0} has none")]
    MissingIcl(String),
    #[error("episode {course}/{variant}/{seed} could not start: {source}")]
    Episode { course: String, variant: MethodVariant, seed: u64, source: AgentError },
    #[error("group {course}/{variant} has no results")]
    EmptyGroup { course: String, variant: MethodVariant },
    #[error("writing {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

/// Runs every cell. Results come back sorted by (course, variant, trial);
/// transcripts are written to `transcript_dir` when given.
pub fn run_matrix(
    matrix: &TrialMatrix,
    backend: &BackendConfig,
    transcript_dir: Option<&Path>,
) -> Result<Vec<(TrialResult, EpisodeOutcome)>, EvalError> {
    if matrix.courses.is_empty() || matrix.variants.is_empty() || matrix.trials_per_cell == 0 {
        return Err(EvalError::EmptyMatrix);
    }
    if matrix.variants.contains(&MethodVariant::VlmPcIc) {
        if let Some(c) = matrix.courses.iter().find(|c| c.icl_annotations.as_ref().is_none_or(|a| a.is_empty())) {
            return Err(EvalError::MissingIcl(c.name.clone()));
        }
    }
    let mut cells = Vec::new();
    for (ci, course) in matrix.courses.iter().enumerate() {
        for &variant in &matrix.variants {
            for trial in 0..matrix.trials_per_cell {
                cells.push((ci, course.clone(), variant, trial));
            }
        }
    }
    let mut out: Vec<(usize, TrialResult, EpisodeOutcome)> = cells
        .into_par_iter()
        .map(|(ci, course, variant, trial)| {
            let seed = matrix.seed_for(trial);
            let mut cfg = EpisodeConfig::new(variant, course.clone(), backend.clone(), seed);
            cfg.budget_s = matrix.budget_s;
            cfg.plan_horizon = matrix.plan_horizon;
            let outcome = match run_episode(&cfg) {
                Ok(o) => o,
                Err(AgentError::Backend(e)) => backend_failure(&cfg, e.to_string()),
                Err(source) => {
                    return Err(EvalError::Episode { course: course.name.clone(), variant, seed, source });
                }
            };
            if let Some(dir) = transcript_dir {
                outcome.transcript.write_to_dir(dir).map_err(|source| EvalError::Io {
                    path: dir.join(outcome.transcript.file_name()).display().to_string(),
                    source,
                })?;
            }
            Ok((ci, TrialResult { trial, result: outcome.result.clone() }, outcome))
        })
        .collect::<Result<_, _>>()?;
    out.sort_by(|a, b| {
        (a.0, a.1.result.variant, a.1.trial).cmp(&(b.0, b.1.result.variant, b.1.trial))
    });
    Ok(out.into_iter().map(|(_, r, o)| (r, o)).collect())
}

/// A backend that could not even be opened still yields a failed trial.
fn backend_failure(cfg: &EpisodeConfig, message: String) -> EpisodeOutcome {
    let result = EpisodeResult {
        course: cfg.course.name.clone(),
        variant: cfg.variant,
        seed: cfg.seed,
        success: false,
        time_s: cfg.budget_s,
        steps: 0,
        termination: Termination::BackendFailure,
        revisits: 0,
        transcript_hash: String::new(),
        failure: Some(message),
    };
    let header = crate::agent::TranscriptHeader {
        format: 1,
        course: cfg.course.name.clone(),
        course_doc: cfg.course.doc().clone(),
        variant: cfg.variant,
        seed: cfg.seed,
        budget_s: cfg.budget_s,
        plan_horizon: cfg.plan_horizon,
        history_cap: cfg.history_cap,
        view: cfg.view,
        protocol: cfg.protocol,
        backend: cfg.backend.clone(),
        templates: crate::prompting::TemplateSet::VERSION.to_string(),
    };
    let mut transcript = crate::agent::Transcript {
        header,
        steps: Vec::new(),
        footer: crate::agent::TranscriptFooter { result },
    };
    transcript.footer.result.transcript_hash = transcript.compute_hash();
    EpisodeOutcome { result: transcript.footer.result.clone(), transcript }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub course: String,
    pub variant: MethodVariant,
    pub trials: usize,
    pub avg_time_s: f64,
    pub median_time_s: f64,
    pub success_rate: f64,
}

/// (mean, median, success percent) over one group's times. Failed trials
/// must already carry the budget as their time.
pub fn summarize(times: &[f64], successes: usize) -> Option<(f64, f64, f64)> {
    if times.is_empty() {
        return None;
    }
    let n = times.len();
    let mut sorted = times.to_vec();
    sorted.sort_by(f64::total_cmp);
    // summed in sorted order so the result does not depend on trial order
    let mean = sorted.iter().sum::<f64>() / n as f64;
    let median = if n % 2 == 1 { sorted[n / 2] } else { 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]) };
    Some((mean, median, 100.0 * successes as f64 / n as f64))
}

/// One row per requested (course, variant) group, in the order given.
pub fn aggregate(results: &[EpisodeResult], groups: &[(String, MethodVariant)]) -> Result<Vec<MetricsRow>, EvalError> {
    groups
        .iter()
        .map(|(course, variant)| {
            let members: Vec<&EpisodeResult> =
                results.iter().filter(|r| &r.course == course && r.variant == *variant).collect();
            let times: Vec<f64> = members.iter().map(|r| r.time_s).collect();
            let successes = members.iter().filter(|r| r.success).count();
            let (avg, median, rate) = summarize(&times, successes)
                .ok_or_else(|| EvalError::EmptyGroup { course: course.clone(), variant: *variant })?;
            Ok(MetricsRow {
                course: course.clone(),
                variant: *variant,
                trials: members.len(),
                avg_time_s: avg,
                median_time_s: median,
                success_rate: rate,
            })
        })
        .collect()
}

/// Every (course, variant) group present, in first-seen order.
pub fn groups_of(results: &[EpisodeResult]) -> Vec<(String, MethodVariant)> {
    let mut seen = Vec::new();
    for r in results {
        let g = (r.course.clone(), r.variant);
        if !seen.contains(&g) {
            seen.push(g);
        }
    }
    seen
}

pub const RESULTS_COLUMNS: [&str; 8] = ["course", "variant", "trial", "seed", "success", "time_s", "steps", "termination"];

pub fn results_csv(rows: &[TrialResult]) -> String {
    let mut out = RESULTS_COLUMNS.join(",");
    out.push('\n');
    for r in rows {
        let e = &r.result;
        let _ = writeln!(
            out,
            "{},{},{},{},{},{:.3},{},{}",
            e.course, e.variant, r.trial, e.seed, e.success, e.time_s, e.steps, e.termination
        );
    }
    out
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Summary {
    pub backend: String,
    pub base_seed: u64,
    pub trials_per_cell: usize,
    pub budget_s: f64,
    pub metrics: Vec<MetricsRow>,
    /// Mean success percent per variant across courses.
    pub mean_success: BTreeMap<String, f64>,
}

pub fn summary(matrix: &TrialMatrix, backend: &BackendConfig, rows: &[TrialResult]) -> Result<Summary, EvalError> {
    let results: Vec<EpisodeResult> = rows.iter().map(|r| r.result.clone()).collect();
    let metrics = aggregate(&results, &groups_of(&results))?;
    let mut mean_success = BTreeMap::new();
    for v in &matrix.variants {
        let rates: Vec<f64> = metrics.iter().filter(|m| m.variant == *v).map(|m| m.success_rate).collect();
        if !rates.is_empty() {
            mean_success.insert(v.to_string(), rates.iter().sum::<f64>() / rates.len() as f64);
        }
    }
    Ok(Summary {
        backend: backend.kind.to_string(),
        base_seed: matrix.base_seed,
        trials_per_cell: matrix.trials_per_cell,
        budget_s: matrix.budget_s,
        metrics,
        mean_success,
    })
}

pub fn write_results(dir: &Path, matrix: &TrialMatrix, backend: &BackendConfig, rows: &[TrialResult]) -> Result<Summary, EvalError> {
    let io = |path: &Path, source| EvalError::Io { path: path.display().to_string(), source };
    std::fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
    let csv = dir.join("results.csv");
    std::fs::write(&csv, results_csv(rows)).map_err(|e| io(&csv, e))?;
    let s = summary(matrix, backend, rows)?;
    let json = dir.join("summary.json");
    std::fs::write(&json, serde_json::to_string_pretty(&s).expect("summary serializes") + "\n").map_err(|e| io(&json, e))?;
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn result(course: &str, variant: MethodVariant, time: f64, success: bool) -> EpisodeResult {
        EpisodeResult {
            course: course.into(),
            variant,
            seed: 0,
            success,
            time_s: time,
            steps: 1,
            termination: if success { Termination::GoalReached } else { Termination::BudgetExhausted },
            revisits: 0,
            transcript_hash: String::new(),
            failure: None,
        }
    }

    #[test]
    fn five_trial_summary() {
        let (avg, med, rate) = summarize(&[10.0, 17.0, 20.0, 100.0, 100.0], 3).unwrap();
        assert!((avg - 49.4).abs() < 1e-9);
        assert_eq!(med, 20.0);
        assert_eq!(rate, 60.0);
        // a vector whose mean and median both land on 49.4 and 17
        let (avg, med, _) = summarize(&[13.0, 17.0, 17.0, 100.0, 100.0], 3).unwrap();
        assert!((avg - 49.4).abs() < 1e-9);
        assert_eq!(med, 17.0);
        assert_eq!(summarize(&[100.0; 5], 0).unwrap(), (100.0, 100.0, 0.0));
        assert_eq!(summarize(&[12.0], 1).unwrap(), (12.0, 12.0, 100.0));
        assert_eq!(summarize(&[10.0, 20.0, 30.0, 100.0], 3).unwrap().1, 25.0);
    }

    #[test]
    fn empty_group_is_an_error() {
        let rs = vec![result("a", MethodVariant::VlmPc, 10.0, true)];
        let err = aggregate(&rs, &[("b".into(), MethodVariant::VlmPc)]);
        assert!(matches!(err, Err(EvalError::EmptyGroup { .. })));
    }

    #[test]
    fn csv_schema() {
        let rows = vec![TrialResult { trial: 2, result: result("indoor1", MethodVariant::NoHistory, 100.0, false) }];
        assert_eq!(
            results_csv(&rows),
            "course,variant,trial,seed,success,time_s,steps,termination\nindoor1,no_history,2,0,false,100.000,1,budget_exhausted\n"
        );
    }
}
