//! The benchmark runner: executes every (entry, config) pair, judges
//! per-iteration alignment, and aggregates score curves, termination
//! histograms, call counts, and latency statistics into a report.
//!
//! Wall-clock latency is segregated into the report's `timing` section;
//! everything under `meta` and `results` is deterministic for a fixed
//! suite, config list, seed, and simulator backend. Entries execute with
//! bounded parallelism, but per-entry seeds derive from the config seed
//! and the entry id, so scheduling order never affects results.

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::backend::{derive_entry_seed, UnifiedModelBackend};
use crate::engine::{run_pipeline_with_template, RunOutput};
use crate::error::{Error, Result};
use crate::eval::{judge_alignment, JudgeSpec, Suite, SuiteEntry};
use crate::protocol::UnderstandingTemplate;
use crate::trace::{Pipeline, ReasoningConfig, TerminationReason};

#[derive(Debug, Clone)]
pub struct BenchOptions {
    /// Worker threads for entry execution.
    pub parallelism: usize,
    /// When set, every (config, entry) trace is persisted under
    /// `<dir>/<config-label>/<entry-id>.json`.
    pub persist_dir: Option<PathBuf>,
    pub template: UnderstandingTemplate,
}

impl Default for BenchOptions {
    fn default() -> Self {
        BenchOptions {
            parallelism: 4,
            persist_dir: None,
            template: UnderstandingTemplate::builtin(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntryRow {
    pub id: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub final_score: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub terminated_by: Option<TerminationReason>,
    pub steps: u32,
    pub understand_calls: u32,
    pub edit_calls: u32,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineResult {
    pub label: String,
    pub pipeline: Pipeline,
    pub max_iterations: u32,
    pub seed: u64,
    pub entries: usize,
    pub failed: usize,
    pub mean_final_score: f64,
    /// Mean score per iteration; index 0 is the initial image. Runs that
    /// terminate early carry their final value forward.
    pub curve: Vec<f64>,
    pub termination_match: usize,
    pub termination_budget: usize,
    pub mean_generate_calls: f64,
    pub mean_understand_calls: f64,
    pub mean_edit_calls: f64,
    pub rows: Vec<EntryRow>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct LatencyStats {
    pub mean_ms: f64,
    pub p50_ms: u64,
    pub p95_ms: u64,
}

impl LatencyStats {
    fn from_samples(mut samples: Vec<u64>) -> Self {
        if samples.is_empty() {
            return LatencyStats::default();
        }
        samples.sort_unstable();
        let mean_ms = samples.iter().sum::<u64>() as f64 / samples.len() as f64;
        let rank = |q: f64| -> u64 {
            let idx = ((q * samples.len() as f64).ceil() as usize).max(1) - 1;
            samples[idx.min(samples.len() - 1)]
        };
        LatencyStats {
            mean_ms,
            p50_ms: rank(0.50),
            p95_ms: rank(0.95),
        }
    }
}

/// Wall-clock statistics per config; the non-deterministic report section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineTiming {
    pub label: String,
    pub generate: LatencyStats,
    pub understand: LatencyStats,
    pub edit: LatencyStats,
    pub total: LatencyStats,
    /// Sum of `total_latency_ms` over every successful trace, equal to the
    /// sum recomputable from the persisted trace files.
    pub total_latency_ms_sum: u64,
    pub generate_latency_ms_sum: u64,
    pub stage_latency_ms_sum: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMeta {
    pub seed: u64,
    pub suite_digest: String,
    pub entry_count: usize,
    pub configs: Vec<ReasoningConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub meta: ReportMeta,
    pub results: Vec<PipelineResult>,
    pub timing: Vec<PipelineTiming>,
}

impl BenchmarkReport {
    /// The reproducible portion: everything except wall-clock timing.
    pub fn deterministic_json(&self) -> String {
        #[derive(Serialize)]
        struct View<'a> {
            meta: &'a ReportMeta,
            results: &'a [PipelineResult],
        }
        serde_json::to_string_pretty(&View {
            meta: &self.meta,
            results: &self.results,
        })
        .expect("report serialization cannot fail")
    }
}

pub fn config_label(config: &ReasoningConfig) -> String {
    format!("{}@{}", config.pipeline, config.max_iterations)
}

struct EntryOutcome {
    run: Result<(RunOutput, Vec<f64>)>,
}

/// Execute the suite under every config and aggregate a report.
pub fn run_benchmark<B: UnifiedModelBackend + Sync + ?Sized>(
    suite: &Suite,
    backend: &B,
    configs: &[ReasoningConfig],
    opts: &BenchOptions,
) -> Result<BenchmarkReport> {
    if configs.is_empty() {
        return Err(Error::InvalidConfig("no configs to benchmark".into()));
    }
    for config in configs {
        config.validate()?;
    }

    let mut results = Vec::new();
    let mut timing = Vec::new();
    for config in configs {
        let outcomes = run_entries(suite, backend, config, opts);
        if let Some(dir) = &opts.persist_dir {
            persist_traces(dir, config, suite, &outcomes)?;
        }
        let (result, time) = aggregate(config, suite, &outcomes);
        results.push(result);
        timing.push(time);
    }

    Ok(BenchmarkReport {
        meta: ReportMeta {
            seed: configs[0].seed,
            suite_digest: suite.digest.clone(),
            entry_count: suite.entries.len(),
            configs: configs.to_vec(),
        },
        results,
        timing,
    })
}

/// Run all entries for one config with bounded parallelism. Results land
/// in entry order regardless of scheduling.
fn run_entries<B: UnifiedModelBackend + Sync + ?Sized>(
    suite: &Suite,
    backend: &B,
    config: &ReasoningConfig,
    opts: &BenchOptions,
) -> Vec<EntryOutcome> {
    let slots: Mutex<Vec<Option<EntryOutcome>>> =
        Mutex::new((0..suite.entries.len()).map(|_| None).collect());
    let next = AtomicUsize::new(0);
    let workers = opts.parallelism.max(1).min(suite.entries.len().max(1));

    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= suite.entries.len() {
                    break;
                }
                let outcome = run_one(&suite.entries[i], backend, config, &opts.template);
                slots.lock().expect("worker panicked holding slot lock")[i] = Some(outcome);
            });
        }
    });

    slots
        .into_inner()
        .expect("worker panicked holding slot lock")
        .into_iter()
        .map(|o| o.expect("every slot is filled"))
        .collect()
}

fn run_one<B: UnifiedModelBackend + ?Sized>(
    entry: &SuiteEntry,
    backend: &B,
    config: &ReasoningConfig,
    template: &UnderstandingTemplate,
) -> EntryOutcome {
    let mut cfg = *config;
    cfg.seed = derive_entry_seed(config.seed, &entry.prompt.id);
    let run = run_pipeline_with_template(&entry.prompt, backend, &cfg, template)
        .and_then(|out| {
            let curve = score_curve(&out, &entry.judge, backend, &cfg)?;
            Ok((out, curve))
        });
    EntryOutcome { run }
}

/// Per-run score curve: index 0 is the initial image, index i the image
/// after iteration i, carrying the final value forward once the run stops.
fn score_curve<B: UnifiedModelBackend + ?Sized>(
    out: &RunOutput,
    judge: &JudgeSpec,
    backend: &B,
    config: &ReasoningConfig,
) -> Result<Vec<f64>> {
    let len = if config.pipeline == Pipeline::Baseline {
        1
    } else {
        config.max_iterations as usize + 1
    };
    let mut curve = Vec::with_capacity(len);
    curve.push(judge_alignment(&out.images[0], judge, backend)?);
    let mut produced = out.images[1..].iter();
    for step in &out.trace.steps {
        if step.output_image.is_some() {
            let image = produced.next().expect("one produced image per edit");
            curve.push(judge_alignment(image, judge, backend)?);
        }
    }
    while curve.len() < len {
        let last = *curve.last().expect("curve starts non-empty");
        curve.push(last);
    }
    Ok(curve)
}

fn persist_traces(
    dir: &Path,
    config: &ReasoningConfig,
    suite: &Suite,
    outcomes: &[EntryOutcome],
) -> Result<()> {
    let label_dir = dir.join(config_label(config));
    std::fs::create_dir_all(&label_dir)?;
    for (entry, outcome) in suite.entries.iter().zip(outcomes) {
        if let Ok((out, _)) = &outcome.run {
            let path = label_dir.join(format!("{}.json", entry.prompt.id));
            std::fs::write(path, out.trace.to_json_pretty())?;
        }
    }
    Ok(())
}

fn aggregate(
    config: &ReasoningConfig,
    suite: &Suite,
    outcomes: &[EntryOutcome],
) -> (PipelineResult, PipelineTiming) {
    let label = config_label(config);
    let mut rows = Vec::with_capacity(outcomes.len());
    let mut final_scores = Vec::new();
    let mut curves: Vec<&Vec<f64>> = Vec::new();
    let mut termination_match = 0usize;
    let mut termination_budget = 0usize;
    let mut understand_total = 0u64;
    let mut edit_total = 0u64;
    let mut generate_samples = Vec::new();
    let mut understand_samples = Vec::new();
    let mut edit_samples = Vec::new();
    let mut total_samples = Vec::new();
    let mut failed = 0usize;

    for (entry, outcome) in suite.entries.iter().zip(outcomes) {
        match &outcome.run {
            Ok((out, curve)) => {
                let trace = &out.trace;
                let final_score = *curve.last().expect("curves are non-empty");
                final_scores.push(final_score);
                curves.push(curve);
                match trace.terminated_by {
                    TerminationReason::Match => termination_match += 1,
                    TerminationReason::Budget => termination_budget += 1,
                }
                understand_total += u64::from(trace.understand_calls());
                edit_total += u64::from(trace.edit_calls());
                generate_samples.push(trace.latency_generate_ms);
                understand_samples
                    .push(trace.steps.iter().map(|s| s.latency_understand_ms).sum());
                edit_samples.push(trace.steps.iter().map(|s| s.latency_edit_ms).sum());
                total_samples.push(trace.total_latency_ms);
                rows.push(EntryRow {
                    id: entry.prompt.id.clone(),
                    final_score: Some(final_score),
                    terminated_by: Some(trace.terminated_by),
                    steps: trace.steps.len() as u32,
                    understand_calls: trace.understand_calls(),
                    edit_calls: trace.edit_calls(),
                    error: None,
                });
            }
            Err(e) => {
                failed += 1;
                rows.push(EntryRow {
                    id: entry.prompt.id.clone(),
                    final_score: None,
                    terminated_by: None,
                    steps: 0,
                    understand_calls: 0,
                    edit_calls: 0,
                    error: Some(e.to_string()),
                });
            }
        }
    }

    let ok = final_scores.len();
    let mean = |sum: f64| if ok == 0 { 0.0 } else { sum / ok as f64 };
    let curve_len = curves.iter().map(|c| c.len()).max().unwrap_or(0);
    let mut curve = Vec::with_capacity(curve_len);
    for i in 0..curve_len {
        let sum: f64 = curves.iter().map(|c| c[i]).sum();
        curve.push(mean(sum));
    }

    let result = PipelineResult {
        label: label.clone(),
        pipeline: config.pipeline,
        max_iterations: config.max_iterations,
        seed: config.seed,
        entries: outcomes.len(),
        failed,
        mean_final_score: mean(final_scores.iter().sum()),
        curve,
        termination_match,
        termination_budget,
        // Every successful run makes exactly one generate call.
        mean_generate_calls: if ok == 0 { 0.0 } else { 1.0 },
        mean_understand_calls: mean(understand_total as f64),
        mean_edit_calls: mean(edit_total as f64),
        rows,
    };

    let stage_latency_ms_sum = generate_samples.iter().sum::<u64>()
        + understand_samples.iter().sum::<u64>()
        + edit_samples.iter().sum::<u64>();
    let timing = PipelineTiming {
        label,
        generate: LatencyStats::from_samples(generate_samples.clone()),
        understand: LatencyStats::from_samples(understand_samples),
        edit: LatencyStats::from_samples(edit_samples),
        total: LatencyStats::from_samples(total_samples.clone()),
        total_latency_ms_sum: total_samples.iter().sum(),
        generate_latency_ms_sum: generate_samples.iter().sum(),
        stage_latency_ms_sum,
    };

    (result, timing)
}

pub fn write_report(report: &BenchmarkReport, path: &Path) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    std::fs::write(path, serde_json::to_string_pretty(report)?)?;
    Ok(())
}

pub fn read_report(path: &Path) -> Result<BenchmarkReport> {
    Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
}

/// Flat CSV of the per-iteration mean curves, one row per
/// (config, iteration) pair.
pub fn render_trend_csv(report: &BenchmarkReport, path: &Path) -> Result<()> {
    let mut out = String::from("pipeline,max_iterations,iteration,mean_score\n");
    for result in &report.results {
        for (i, score) in result.curve.iter().enumerate() {
            out.push_str(&format!(
                "{},{},{},{}\n",
                result.pipeline, result.max_iterations, i, score
            ));
        }
    }
    std::fs::write(path, out)?;
    Ok(())
}
