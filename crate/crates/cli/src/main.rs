use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use vlmpc_core::agent::{run_episode, verify_transcript, EpisodeConfig, Transcript};
use vlmpc_core::backend::{BackendConfig, BackendKind};
use vlmpc_core::course::{resolve_course, FIXTURE_NAMES};
use vlmpc_core::eval::{run_matrix, write_results, TrialMatrix, TrialResult};
use vlmpc_core::prompting::{MethodVariant, TemplateSet};
use vlmpc_core::render::render_course;
use vlmpc_core::skills::catalog_table;

#[derive(Parser)]
#[command(name = "vlmpc", version, about = "Run, evaluate and replay skill-selection episodes on obstacle courses")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct BackendArgs {
    /// live, oracle, oracle:<flavor>, or scripted:<path>
    #[arg(long, default_value = "oracle")]
    backend: String,
    /// Accept scripted records whose bundle digest differs.
    #[arg(long)]
    allow_drift: bool,
    /// Re-queries after an unreadable answer.
    #[arg(long, default_value_t = 2)]
    retry_budget: u32,
}

impl BackendArgs {
    fn config(&self) -> Result<BackendConfig> {
        let kind: BackendKind = self.backend.parse()?;
        let mut cfg = BackendConfig::new(kind);
        if cfg.kind == BackendKind::Live {
            cfg = cfg.with_env_overrides();
        }
        cfg.allow_drift = self.allow_drift;
        cfg.retry_budget = self.retry_budget;
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run a single episode.
    Run {
        #[arg(long)]
        course: String,
        #[arg(long, default_value = "vlm_pc")]
        variant: MethodVariant,
        #[command(flatten)]
        backend: BackendArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 100.0)]
        budget_s: f64,
        #[arg(long, default_value_t = 3)]
        plan_horizon: usize,
        /// Maximum observations per query.
        #[arg(long)]
        history_cap: Option<usize>,
        /// Directory with replacement prompt templates.
        #[arg(long)]
        templates: Option<PathBuf>,
        #[arg(long, default_value = "runs")]
        out_dir: PathBuf,
    },
    /// Run every (course, variant, trial) combination.
    Matrix {
        /// Comma-separated fixture names or course files.
        #[arg(long, value_delimiter = ',', default_values_t = FIXTURE_NAMES.map(String::from))]
        courses: Vec<String>,
        #[arg(long, value_delimiter = ',', default_value = "random,no_history,no_multi_step,vlm_pc")]
        variants: Vec<MethodVariant>,
        #[arg(long, default_value_t = 5)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        base_seed: u64,
        #[arg(long, default_value_t = 100.0)]
        budget_s: f64,
        #[arg(long, default_value_t = 3)]
        plan_horizon: usize,
        #[command(flatten)]
        backend: BackendArgs,
        /// Worker threads; defaults to the number of cores.
        #[arg(long)]
        jobs: Option<usize>,
        #[arg(long, default_value = "matrix")]
        out_dir: PathBuf,
    },
    /// Re-execute a stored transcript through its recorded answers.
    Replay {
        #[arg(long)]
        transcript: PathBuf,
    },
    /// Draw a course, optionally with a trajectory, as text and SVG.
    Render {
        #[arg(long)]
        course: String,
        #[arg(long)]
        transcript: Option<PathBuf>,
        /// Output path without extension.
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the skill parameter table.
    Catalog,
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Catalog => print!("{}", catalog_table()),
        Command::Run { course, variant, backend, seed, budget_s, plan_horizon, history_cap, templates, out_dir } => {
            let course = Arc::new(resolve_course(&course).with_context(|| format!("loading course {course}"))?);
            let mut cfg = EpisodeConfig::new(variant, course, backend.config()?, seed);
            cfg.budget_s = budget_s;
            cfg.plan_horizon = plan_horizon;
            cfg.history_cap = history_cap;
            if let Some(dir) = templates {
                cfg.templates = Arc::new(TemplateSet::from_dir(&dir)?);
            }
            let out = run_episode(&cfg)?;
            let path = out.transcript.write_to_dir(&out_dir)?;
            let rows = [TrialResult { trial: 0, result: out.result.clone() }];
            std::fs::write(out_dir.join("results.csv"), vlmpc_core::eval::results_csv(&rows))?;
            let r = &out.result;
            println!(
                "{} {} seed={} success={} time_s={:.1} steps={} termination={} revisits={}",
                r.course, r.variant, r.seed, r.success, r.time_s, r.steps, r.termination, r.revisits
            );
            if let Some(f) = &r.failure {
                println!("failure: {f}");
            }
            println!("transcript: {}", path.display());
        }
        Command::Matrix { courses, variants, trials, base_seed, budget_s, plan_horizon, backend, jobs, out_dir } => {
            let specs = courses
                .iter()
                .map(|c| resolve_course(c).map(Arc::new).with_context(|| format!("loading course {c}")))
                .collect::<Result<Vec<_>>>()?;
            let backend = backend.config()?;
            let mut matrix = TrialMatrix::new(specs, variants);
            matrix.trials_per_cell = trials;
            matrix.base_seed = base_seed;
            matrix.budget_s = budget_s;
            matrix.plan_horizon = plan_horizon;
            let mut pool = rayon::ThreadPoolBuilder::new();
            if let Some(j) = jobs {
                if j == 0 {
                    bail!("--jobs must be at least 1");
                }
                pool = pool.num_threads(j);
            }
            let pool = pool.build()?;
            let transcripts = out_dir.join("transcripts");
            let results = pool.install(|| run_matrix(&matrix, &backend, Some(&transcripts)))?;
            let rows: Vec<TrialResult> = results.into_iter().map(|(r, _)| r).collect();
            let summary = write_results(&out_dir, &matrix, &backend, &rows)?;
            println!("{:<10} {:<14} {:>8} {:>8} {:>8}", "course", "variant", "avg_s", "median_s", "success");
            for m in &summary.metrics {
                println!(
                    "{:<10} {:<14} {:>8.1} {:>8.1} {:>7.0}%",
                    m.course, m.variant.to_string(), m.avg_time_s, m.median_time_s, m.success_rate
                );
            }
            for (v, s) in &summary.mean_success {
                println!("mean success {v}: {s:.1}%");
            }
            println!("results: {}", out_dir.join("results.csv").display());
        }
        Command::Replay { transcript } => {
            let text = std::fs::read_to_string(&transcript).with_context(|| format!("reading {}", transcript.display()))?;
            let report = verify_transcript(&text)?;
            println!("hash OK {}", report.hash);
        }
        Command::Render { course, transcript, out } => {
            let spec = resolve_course(&course).with_context(|| format!("loading course {course}"))?;
            let t = match transcript {
                Some(p) => {
                    let text = std::fs::read_to_string(&p).with_context(|| format!("reading {}", p.display()))?;
                    Some(Transcript::parse(&text)?.0)
                }
                None => None,
            };
            let (txt, svg) = render_course(&spec, t.as_ref(), &out)?;
            print!("{}", std::fs::read_to_string(&txt)?);
            println!("wrote {} and {}", txt.display(), svg.display());
        }
    }
    Ok(())
}
