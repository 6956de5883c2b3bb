use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use instructplan::dataset;
use instructplan::metrics::ScoreSource;
use instructplan::prompting::InjectionScope;
use instructplan::report::{self, ReportOptions};
use instructplan::runner::{self, ConditionSet, PipelineSettings, RunConfig};
use instructplan::vlm_client::{self, BackendConfig, EndpointConfig};

#[derive(Parser)]
#[command(name = "instructplan", version, about = "Instruction-conditioned VLM planner evaluation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run baseline and instructed plans for every scene into a JSONL log.
    Run(RunArgs),
    /// Build tables and overlay documents from a results log.
    Report(ReportArgs),
    /// Serve the planning API.
    Serve(ServeArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendChoice {
    Mock,
    Http,
}

#[derive(Clone, Copy, ValueEnum)]
enum Conditions {
    Both,
    Baseline,
    Instructed,
}

#[derive(Clone, Copy, ValueEnum)]
enum Scope {
    All,
    SceneDescription,
}

#[derive(Clone, Copy, ValueEnum)]
enum Source {
    PooledMax,
    BaselineOnly,
    InstructedOnly,
}

#[derive(Args)]
struct BackendArgs {
    #[arg(long, value_enum, default_value = "mock")]
    backend: BackendChoice,
    /// TOML file with a `[backend]` table.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    base_url: Option<String>,
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    api_key: Option<String>,
    /// JSON rules for the mock backend.
    #[arg(long)]
    mock_script: Option<PathBuf>,
    #[arg(long, hide = true, default_value_t = 0)]
    mock_delay_ms: u64,
    #[arg(long)]
    temperature: Option<f64>,
    #[arg(long)]
    max_tokens: Option<u32>,
}

impl BackendArgs {
    fn resolve(&self) -> Result<BackendConfig> {
        Ok(match self.backend {
            BackendChoice::Mock => BackendConfig::Mock {
                script: self.mock_script.clone(),
                delay: Duration::from_millis(self.mock_delay_ms),
            },
            BackendChoice::Http => {
                let mut cfg = EndpointConfig::resolve(self.config.as_deref())?;
                if let Some(v) = &self.base_url {
                    cfg.base_url = v.clone();
                }
                if let Some(v) = &self.model {
                    cfg.model = v.clone();
                }
                if let Some(v) = &self.api_key {
                    cfg.api_key = Some(v.clone());
                }
                if let Some(v) = self.temperature {
                    cfg.temperature = v;
                }
                if let Some(v) = self.max_tokens {
                    cfg.max_tokens = v;
                }
                BackendConfig::Http(cfg)
            }
        })
    }

    /// Sampling settings: explicit flags, then the endpoint config.
    fn sampling(&self, backend: &BackendConfig) -> (f64, u32) {
        let defaults = PipelineSettings::default();
        match backend {
            BackendConfig::Http(cfg) => (cfg.temperature, cfg.max_tokens),
            BackendConfig::Mock { .. } => (
                self.temperature.unwrap_or(defaults.temperature),
                self.max_tokens.unwrap_or(defaults.max_tokens),
            ),
        }
    }
}

#[derive(Args)]
struct PipelineArgs {
    /// Most recent camera frames attached to each image prompt.
    #[arg(long, default_value_t = 6)]
    frames_per_call: usize,
    /// Extra trajectory requests after an unparseable answer.
    #[arg(long, default_value_t = 2)]
    reprompt_limit: u32,
    #[arg(long, value_enum, default_value = "all")]
    injection_scope: Scope,
    #[arg(long, default_value_t = instructplan::metrics::DEFAULT_OOB_MARGIN)]
    oob_margin: f64,
}

impl PipelineArgs {
    fn scope(&self) -> InjectionScope {
        match self.injection_scope {
            Scope::All => InjectionScope::AllStages,
            Scope::SceneDescription => InjectionScope::SceneDescriptionOnly,
        }
    }
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    annotations: PathBuf,
    #[command(flatten)]
    backend: BackendArgs,
    #[command(flatten)]
    pipeline: PipelineArgs,
    #[arg(long, value_enum, default_value = "both")]
    conditions: Conditions,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Maximum concurrent pipeline runs.
    #[arg(long, default_value_t = 1)]
    k: usize,
    /// Must equal the manifest horizon when given.
    #[arg(long)]
    horizon: Option<usize>,
    /// Overrides the manifest step in seconds.
    #[arg(long)]
    dt: Option<f64>,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long)]
    results: PathBuf,
    #[arg(long, default_value_t = instructplan::metrics::DEFAULT_FILTER_QUANTILE)]
    q: f64,
    #[arg(long)]
    out_dir: PathBuf,
    /// Adds ground truth and bounds to the overlay documents.
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "pooled-max")]
    score_source: Source,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    annotations: Option<PathBuf>,
    #[command(flatten)]
    backend: BackendArgs,
    #[command(flatten)]
    pipeline: PipelineArgs,
    #[arg(long, default_value_t = 8080)]
    port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    host: String,
    /// Concurrent plan requests before answering 409.
    #[arg(long, default_value_t = 1)]
    k: usize,
    /// Seed used when a plan request does not carry one.
    #[arg(long)]
    seed: Option<u64>,
}

fn run(args: RunArgs) -> Result<()> {
    let backend = args.backend.resolve()?;
    let (temperature, max_tokens) = args.backend.sampling(&backend);
    let mut config = RunConfig::new(&args.manifest, &args.annotations, &args.out);
    config.backend = backend;
    config.conditions = match args.conditions {
        Conditions::Both => ConditionSet::Both,
        Conditions::Baseline => ConditionSet::Baseline,
        Conditions::Instructed => ConditionSet::Instructed,
    };
    config.horizon = args.horizon;
    config.dt = args.dt;
    config.frames_per_call = args.pipeline.frames_per_call;
    config.max_in_flight = args.k;
    config.reprompt_limit = args.pipeline.reprompt_limit;
    config.seed = args.seed;
    config.temperature = temperature;
    config.max_tokens = max_tokens;
    config.injection = args.pipeline.scope();
    config.oob_margin = args.pipeline.oob_margin;

    let summary = runner::run_batch(&config)?;
    println!(
        "{} work items: {} run, {} already logged, {} failed",
        summary.total, summary.executed, summary.skipped, summary.failed
    );
    for (kind, n) in &summary.failures_by_kind {
        println!("  {kind} failures: {n}");
    }
    for (tier, n) in &summary.parse_tiers {
        println!("  parsed at tier {tier}: {n}");
    }
    if summary.clamped_values > 0 {
        println!("  clamped values: {}", summary.clamped_values);
    }
    if summary.rejected_annotations > 0 {
        println!("  annotations for unknown scenes: {}", summary.rejected_annotations);
    }
    println!("results: {}", args.out.display());
    Ok(())
}

fn report(args: ReportArgs) -> Result<()> {
    let log = runner::read_results(&args.results)?;
    let manifest = args
        .manifest
        .as_deref()
        .map(dataset::load_scenes)
        .transpose()?;
    let options = ReportOptions {
        q: args.q,
        score_source: match args.score_source {
            Source::PooledMax => ScoreSource::PooledMax,
            Source::BaselineOnly => ScoreSource::BaselineOnly,
            Source::InstructedOnly => ScoreSource::InstructedOnly,
        },
    };
    let summary = report::write_report(&log.records, &options, manifest.as_ref(), &args.out_dir)?;
    print!(
        "{}",
        std::fs::read_to_string(args.out_dir.join("table1.txt")).context("reading table1.txt")?
    );
    if let Some(p) = summary.improvement_all {
        println!("improvement (all): {}", report::fmt_percent(p));
    }
    if let Some(p) = summary.improvement_filtered {
        println!("improvement (filtered): {}", report::fmt_percent(p));
    }
    println!(
        "kept {} scene(s), dropped {} above {}",
        summary.kept_scenes,
        summary.dropped_scenes.len(),
        report::fmt_ade(summary.threshold)
    );
    println!("wrote {} files to {}", summary.files.len(), args.out_dir.display());
    Ok(())
}

fn serve(args: ServeArgs) -> Result<()> {
    let manifest = dataset::load_scenes(&args.manifest)?;
    let annotations = match &args.annotations {
        Some(path) => dataset::load_annotations(path)?,
        None => Vec::new(),
    };
    let backend_config = args.backend.resolve()?;
    let (temperature, max_tokens) = args.backend.sampling(&backend_config);
    let backend = vlm_client::connect(&backend_config)?;
    let mut settings = PipelineSettings::for_manifest(&manifest);
    settings.frames_per_call = args.pipeline.frames_per_call;
    settings.reprompt_limit = args.pipeline.reprompt_limit;
    settings.injection = args.pipeline.scope();
    settings.oob_margin = args.pipeline.oob_margin;
    settings.seed = args.seed;
    settings.temperature = temperature;
    settings.max_tokens = max_tokens;
    if args.k == 0 {
        bail!("--k must be at least 1");
    }
    let addr: SocketAddr = format!("{}:{}", args.host, args.port)
        .parse()
        .with_context(|| format!("invalid listen address {}:{}", args.host, args.port))?;
    let state = instructplan_service::AppState::new(
        manifest,
        annotations,
        Arc::from(backend),
        settings,
        args.k,
    );
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(instructplan_service::serve(state, addr))?;
    Ok(())
}

fn init_logging() {
    let filter = tracing_subscriber::EnvFilter::try_from_default_env()
        .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("warn"));
    tracing_subscriber::fmt()
        .with_env_filter(filter)
        .with_writer(std::io::stderr)
        .init();
}

fn main() -> ExitCode {
    init_logging();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => run(args),
        Command::Report(args) => report(args),
        Command::Serve(args) => serve(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
