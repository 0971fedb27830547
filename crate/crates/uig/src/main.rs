//! `uig` — run, benchmark, and inspect understanding-in-generation loops.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use uig::backend::http::{BackendEndpoint, HttpBackend};
use uig::backend::sim::SimBackend;
use uig::backend::UnifiedModelBackend;
use uig::engine::run_pipeline_with_template;
use uig::error::Error;
use uig::eval::{load_suite, render_trend_csv, run_benchmark, write_report, BenchOptions};
use uig::protocol::UnderstandingTemplate;
use uig::sim::NoiseConfig;
use uig::store::{read_trace, ArtifactStore};
use uig::trace::{MissingEditPolicy, Pipeline, PromptSpec, ReasoningConfig};

#[derive(Parser)]
#[command(name = "uig", version, about = "Understanding-in-generation reasoning loops")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one reasoning loop and persist its trace and images.
    Run(RunArgs),
    /// Run a prompt suite through one or more pipelines and write a report.
    Bench(BenchArgs),
    /// Print and validate a persisted trace.
    Inspect(InspectArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendKind {
    Sim,
    Http,
}

#[derive(Clone, Copy, ValueEnum)]
enum PipelineArg {
    Baseline,
    Nobridge,
    Uig,
}

impl From<PipelineArg> for Pipeline {
    fn from(p: PipelineArg) -> Pipeline {
        match p {
            PipelineArg::Baseline => Pipeline::Baseline,
            PipelineArg::Nobridge => Pipeline::Nobridge,
            PipelineArg::Uig => Pipeline::Uig,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum PolicyArg {
    Error,
    #[value(name = "fallback-original-prompt")]
    FallbackOriginalPrompt,
}

impl From<PolicyArg> for MissingEditPolicy {
    fn from(p: PolicyArg) -> MissingEditPolicy {
        match p {
            PolicyArg::Error => MissingEditPolicy::Error,
            PolicyArg::FallbackOriginalPrompt => MissingEditPolicy::FallbackOriginalPrompt,
        }
    }
}

#[derive(Args)]
struct BackendArgs {
    /// Backend implementation.
    #[arg(long, value_enum, default_value = "sim")]
    backend: BackendKind,

    /// Simulator: per-constraint generator violation probability.
    #[arg(long, default_value_t = 0.5)]
    p_violate: f64,
    /// Simulator: per-op silent edit failure probability.
    #[arg(long, default_value_t = 0.0)]
    p_edit_fail: f64,
    /// Simulator: collateral-damage probability.
    #[arg(long, default_value_t = 0.0)]
    p_collateral: f64,

    /// HTTP: server base URL, e.g. http://127.0.0.1:8080
    #[arg(long)]
    base_url: Option<String>,
    #[arg(long, default_value_t = 30_000)]
    timeout_ms: u64,
    #[arg(long, default_value_t = 3)]
    max_retries: u32,
    #[arg(long, default_value_t = 100)]
    backoff_base_ms: u64,
    /// Bearer token (falls back to UIG_HTTP_TOKEN).
    #[arg(long)]
    auth_token: Option<String>,
    /// Allow sending scene-graph payloads to the HTTP backend.
    #[arg(long, default_value_t = false)]
    accept_scene_graph: bool,
}

impl BackendArgs {
    fn build(&self) -> Result<Box<dyn UnifiedModelBackend>, Error> {
        match self.backend {
            BackendKind::Sim => {
                let noise = NoiseConfig::new(self.p_violate, self.p_edit_fail, self.p_collateral)?;
                Ok(Box::new(SimBackend::new(noise)))
            }
            BackendKind::Http => {
                let base_url = self.base_url.clone().ok_or_else(|| {
                    Error::InvalidConfig("--base-url is required with --backend http".into())
                })?;
                let mut endpoint = BackendEndpoint::new(base_url);
                endpoint.timeout_ms = self.timeout_ms;
                endpoint.max_retries = self.max_retries;
                endpoint.backoff_base_ms = self.backoff_base_ms;
                endpoint.auth_token = self
                    .auth_token
                    .clone()
                    .or_else(|| std::env::var("UIG_HTTP_TOKEN").ok());
                let backend = HttpBackend::new(endpoint)?;
                Ok(Box::new(if self.accept_scene_graph {
                    backend.with_scene_graph_support()
                } else {
                    backend
                }))
            }
        }
    }
}

#[derive(Args)]
struct RunArgs {
    /// Prompt text, or @path to read it from a file.
    #[arg(long)]
    prompt: String,

    #[arg(long, value_enum, default_value = "uig")]
    pipeline: PipelineArg,

    /// Understand/edit iteration budget.
    #[arg(long, default_value_t = 4, value_parser = clap::value_parser!(u32).range(1..=32))]
    max_iter: u32,

    #[arg(long, default_value_t = 42)]
    seed: u64,

    #[arg(long, value_enum, default_value = "error")]
    missing_edit_policy: PolicyArg,

    /// Store directory (falls back to UIG_STORE_DIR, then ./uig-store).
    #[arg(long)]
    out: Option<PathBuf>,

    /// Override the shipped understanding-prompt template.
    #[arg(long)]
    understanding_template: Option<PathBuf>,

    #[command(flatten)]
    backend: BackendArgs,
}

#[derive(Args)]
struct BenchArgs {
    /// Suite file: .jsonl records, or DSL text (one prompt per line).
    #[arg(long)]
    suite: PathBuf,

    /// Comma-separated pipelines to run.
    #[arg(long, value_enum, value_delimiter = ',', default_value = "uig")]
    pipelines: Vec<PipelineArg>,

    /// Sweep the iteration budget over an inclusive range, e.g. 1..5.
    #[arg(long, value_parser = parse_sweep)]
    sweep_max_iter: Option<(u32, u32)>,

    #[arg(long, default_value_t = 4, value_parser = clap::value_parser!(u32).range(1..=32))]
    max_iter: u32,

    #[arg(long, default_value_t = 42)]
    seed: u64,

    /// Report output path (JSON).
    #[arg(long)]
    report: PathBuf,

    /// Trend CSV output path (defaults to the report path with .csv).
    #[arg(long)]
    trend_csv: Option<PathBuf>,

    /// Persist per-entry traces under this directory.
    #[arg(long)]
    out: Option<PathBuf>,

    #[arg(long, default_value_t = 4, value_parser = clap::value_parser!(u32).range(1..=256))]
    parallelism: u32,

    #[arg(long, value_enum, default_value = "error")]
    missing_edit_policy: PolicyArg,

    #[arg(long)]
    understanding_template: Option<PathBuf>,

    #[command(flatten)]
    backend: BackendArgs,
}

#[derive(Args)]
struct InspectArgs {
    /// Path to a trace.json.
    trace: PathBuf,
}

fn parse_sweep(s: &str) -> Result<(u32, u32), String> {
    let (lo, hi) = s
        .split_once("..")
        .ok_or_else(|| format!("expected A..B, got {s:?}"))?;
    let lo: u32 = lo.trim().parse().map_err(|e| format!("bad lower bound: {e}"))?;
    let hi: u32 = hi.trim().parse().map_err(|e| format!("bad upper bound: {e}"))?;
    if lo < 1 || hi > 32 || lo > hi {
        return Err(format!("sweep bounds must satisfy 1 <= A <= B <= 32, got {lo}..{hi}"));
    }
    Ok((lo, hi))
}

fn load_template(path: &Option<PathBuf>) -> Result<UnderstandingTemplate, Error> {
    match path {
        Some(p) => UnderstandingTemplate::from_file(p),
        None => Ok(UnderstandingTemplate::builtin()),
    }
}

fn store_dir(explicit: &Option<PathBuf>) -> PathBuf {
    explicit
        .clone()
        .or_else(|| std::env::var("UIG_STORE_DIR").ok().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("uig-store"))
}

fn cmd_run(args: &RunArgs) -> Result<(), Error> {
    let text = if let Some(path) = args.prompt.strip_prefix('@') {
        std::fs::read_to_string(path)?.trim().to_string()
    } else {
        args.prompt.clone()
    };
    let id = format!("cli-{}", &uig::image::content_address(text.as_bytes())[..12]);
    let prompt = PromptSpec::new(id, text)?;

    let config = ReasoningConfig {
        max_iterations: args.max_iter,
        seed: args.seed,
        missing_edit_policy: args.missing_edit_policy.into(),
        pipeline: args.pipeline.into(),
    };
    config.validate()?;
    let template = load_template(&args.understanding_template)?;
    let backend = args.backend.build()?;

    let out = run_pipeline_with_template(&prompt, backend.as_ref(), &config, &template)?;
    let store = ArtifactStore::open(store_dir(&args.out))?;
    let record = store.persist_run(&out)?;

    println!("run:         {}", record.run_id);
    println!("final image: {}", out.trace.final_image.address);
    println!("terminated:  {}", out.trace.terminated_by);
    println!("steps:       {}", out.trace.steps.len());
    println!("trace:       {}", record.trace_path.display());
    Ok(())
}

fn cmd_bench(args: &BenchArgs) -> Result<(), Error> {
    let suite = load_suite(&args.suite)?;
    let backend = args.backend.build()?;
    let template = load_template(&args.understanding_template)?;

    let iter_range = match args.sweep_max_iter {
        Some((lo, hi)) => (lo..=hi).collect::<Vec<_>>(),
        None => vec![args.max_iter],
    };
    let mut configs = Vec::new();
    for pipeline in &args.pipelines {
        for max_iter in &iter_range {
            configs.push(ReasoningConfig {
                max_iterations: *max_iter,
                seed: args.seed,
                missing_edit_policy: args.missing_edit_policy.into(),
                pipeline: (*pipeline).into(),
            });
        }
    }

    let opts = BenchOptions {
        parallelism: args.parallelism as usize,
        persist_dir: args.out.clone(),
        template,
    };
    let report = run_benchmark(&suite, backend.as_ref(), &configs, &opts)?;
    write_report(&report, &args.report)?;
    let csv_path = args
        .trend_csv
        .clone()
        .unwrap_or_else(|| args.report.with_extension("csv"));
    render_trend_csv(&report, &csv_path)?;

    for result in &report.results {
        println!(
            "{:<14} entries={} failed={} mean_final={:.4} match={} budget={}",
            result.label,
            result.entries,
            result.failed,
            result.mean_final_score,
            result.termination_match,
            result.termination_budget
        );
    }
    println!("report: {}", args.report.display());
    println!("trends: {}", csv_path.display());
    Ok(())
}

fn cmd_inspect(args: &InspectArgs) -> Result<(), Error> {
    let trace = read_trace(&args.trace)?;
    println!(
        "prompt {:?} pipeline={} max_iter={} seed={}",
        trace.prompt.id, trace.config.pipeline, trace.config.max_iterations, trace.config.seed
    );
    println!("initial image: {}", trace.initial_image.address);
    println!("step  verdict input          output             t_und   t_edit  edit prompt");
    for step in &trace.steps {
        println!(
            "{:<5} {:<7} {:<14} {:<14} {:>7}ms {:>5}ms  {}",
            step.index,
            if step.verdict.matched { "Yes" } else { "No" },
            short(&step.input_image.address),
            step.output_image
                .as_ref()
                .map_or_else(|| "-".to_string(), |i| short(&i.address)),
            step.latency_understand_ms,
            step.latency_edit_ms,
            step.edit_prompt.as_deref().unwrap_or("-")
        );
    }
    println!(
        "final image:   {} (terminated by {})",
        trace.final_image.address, trace.terminated_by
    );
    println!(
        "latency: generate={}ms steps={}ms total={}ms",
        trace.latency_generate_ms,
        trace.step_latency_sum(),
        trace.total_latency_ms
    );
    trace.validate()?;
    println!("trace is consistent ({} steps)", trace.steps.len());
    Ok(())
}

fn short(address: &str) -> String {
    address.chars().take(12).collect()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Bench(args) => cmd_bench(args),
        Command::Inspect(args) => cmd_inspect(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                // Usage-class errors mirror clap's exit code.
                Error::InvalidConfig(_) | Error::Template(_) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}
