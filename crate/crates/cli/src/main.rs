use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::sync::Arc;

use forage_core::layout::{generate, parse_layout_file, scatter_csv, write_layout_file, ClusterSchedule, ScheduleTier};
use forage_core::pheromone::PheromoneSelection;
use forage_core::tuner::{ga_run, GaConfig};
use forage_core::{run_trial_with, Arena, CpfaParams, Distribution, LayoutSpec, PolicyKind, TrialConfig};
use forage_gateway::{mock_serve, ApiStyle, Gateway, GatewayConfig, LlmPolicyProvider, MockBehavior, Mode};
use forage_harness::{load_rows, resource_count_for_arena, run_grid, summarize, verify_summary, write_report, GridSpec, RunOptions};

#[derive(Parser)]
#[command(name = "forage", version, about = "Swarm foraging simulator with tactical decision policies")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a resource layout file
    GenLayout(GenLayoutArgs),
    /// Run one trial and print its result
    RunTrial(RunTrialArgs),
    /// Tune the CPFA parameters with the genetic algorithm
    GaTrain(GaTrainArgs),
    /// Run an experiment grid into a results directory
    RunGrid(RunGridArgs),
    /// Summarize a results directory
    Report(ReportArgs),
    /// Serve a mock OpenAI-compatible endpoint
    MockLlmServe(MockServeArgs),
}

#[derive(Args)]
struct GenLayoutArgs {
    #[arg(long, default_value = "clustered")]
    distribution: Distribution,
    /// Defaults to the arena's standard count
    #[arg(long)]
    count: Option<usize>,
    /// Arena side in meters
    #[arg(long, default_value_t = 6.0)]
    arena: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Powerlaw schedule such as `4x16,8x4,32x1` (count x size)
    #[arg(long)]
    schedule: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write `kind,x,y,radius` scatter data
    #[arg(long)]
    scatter: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct GatewayArgs {
    /// Gateway config file (JSON); the flags below override it
    #[arg(long)]
    gateway_config: Option<PathBuf>,
    #[arg(long)]
    mode: Option<Mode>,
    #[arg(long)]
    base_url: Option<String>,
    #[arg(long)]
    model: Option<String>,
    /// Environment variable holding the API key
    #[arg(long)]
    api_key_env: Option<String>,
    #[arg(long)]
    mock_behavior: Option<MockBehavior>,
    #[arg(long)]
    cassette: Option<PathBuf>,
    #[arg(long)]
    timeout: Option<f64>,
    #[arg(long)]
    injected_latency: Option<f64>,
    #[arg(long, value_parser = parse_style)]
    api_style: Option<ApiStyle>,
    #[arg(long)]
    lenient: bool,
}

fn parse_style(s: &str) -> Result<ApiStyle, String> {
    match s {
        "chat" => Ok(ApiStyle::Chat),
        "responses" => Ok(ApiStyle::Responses),
        _ => Err(format!("unknown api style `{s}`")),
    }
}

impl GatewayArgs {
    fn apply(&self, mut c: GatewayConfig) -> Result<GatewayConfig> {
        if let Some(p) = &self.gateway_config {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            c = serde_json::from_str(&text).context("parsing gateway config")?;
        }
        if let Some(v) = self.mode {
            c.mode = v;
        }
        if let Some(v) = &self.base_url {
            c.base_url = v.clone();
        }
        if let Some(v) = &self.model {
            c.model_name = v.clone();
        }
        if let Some(v) = &self.api_key_env {
            c.api_key_env = Some(v.clone());
        }
        if let Some(v) = &self.mock_behavior {
            c.mock_behavior = v.clone();
        }
        if let Some(v) = &self.cassette {
            c.cassette = Some(v.clone());
        }
        if let Some(v) = self.timeout {
            c.timeout_secs = v;
        }
        if let Some(v) = self.injected_latency {
            c.injected_latency_secs = Some(v);
        }
        if let Some(v) = self.api_style {
            c.api_style = v;
        }
        if self.lenient {
            c.lenient = true;
        }
        Ok(c)
    }
}

#[derive(Args)]
struct RunTrialArgs {
    #[arg(long, default_value_t = 4)]
    team: usize,
    #[arg(long, default_value_t = 6)]
    arena: u32,
    #[arg(long, default_value = "clustered")]
    distribution: Distribution,
    /// Defaults to the arena's standard count
    #[arg(long)]
    count: Option<usize>,
    #[arg(long, default_value = "cascade")]
    policy: PolicyKind,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Defaults to --seed
    #[arg(long)]
    layout_seed: Option<u64>,
    #[arg(long, default_value_t = 1200.0)]
    duration: f64,
    /// Key-value parameter file, as written by ga-train
    #[arg(long)]
    params: Option<PathBuf>,
    /// Write the JSONL event log here
    #[arg(long)]
    log: Option<PathBuf>,
    /// Reuse a layout written by gen-layout
    #[arg(long)]
    layout_file: Option<PathBuf>,
    #[arg(long)]
    uniform_pheromone: bool,
    #[arg(long)]
    no_yield: bool,
    #[command(flatten)]
    gateway: GatewayArgs,
}

#[derive(Args)]
struct GaTrainArgs {
    #[arg(long, default_value_t = 10)]
    population: usize,
    #[arg(long, default_value_t = 30)]
    generations: usize,
    #[arg(long, default_value_t = 10)]
    trials: usize,
    /// Evaluation trial length in seconds
    #[arg(long, default_value_t = 720.0)]
    duration: f64,
    #[arg(long, default_value_t = 6)]
    team: usize,
    #[arg(long, default_value_t = 8)]
    arena: u32,
    #[arg(long, default_value = "powerlaw")]
    distribution: Distribution,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    serial: bool,
    #[arg(long, default_value = "best_params.toml")]
    out: PathBuf,
    #[arg(long, default_value = "ga_history.csv")]
    history: PathBuf,
}

#[derive(Args)]
struct RunGridArgs {
    /// Grid spec (.json or .toml); defaults to the full 36-cell grid
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Comma-separated policies, overriding the spec
    #[arg(long, value_delimiter = ',')]
    policies: Option<Vec<PolicyKind>>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    duration: Option<f64>,
    #[arg(long)]
    params: Option<PathBuf>,
    #[arg(long)]
    parallelism: Option<usize>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    resume: bool,
    #[arg(long)]
    no_logs: bool,
    #[command(flatten)]
    gateway: GatewayArgs,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long)]
    store: PathBuf,
    #[arg(long, default_value = "cascade")]
    baseline: PolicyKind,
    #[arg(long, default_value = "llm")]
    candidate: PolicyKind,
    /// Defaults to <store>/report
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct MockServeArgs {
    #[arg(long, default_value = "scripted")]
    behavior: MockBehavior,
    #[arg(long, default_value_t = 8089)]
    port: u16,
}

fn parse_schedule(s: &str) -> Result<ClusterSchedule> {
    let mut tiers = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (count, size) = part
            .split_once('x')
            .with_context(|| format!("schedule entry `{part}` is not COUNTxSIZE"))?;
        tiers.push(ScheduleTier {
            count: count.trim().parse()?,
            size: size.trim().parse()?,
        });
    }
    Ok(ClusterSchedule { tiers })
}

fn gen_layout(a: GenLayoutArgs) -> Result<()> {
    let count = match a.count {
        Some(c) => c,
        None => resource_count_for_arena(a.arena as u32)?,
    };
    let mut spec = LayoutSpec::new(a.distribution, count, Arena::square(a.arena), a.seed);
    if let Some(s) = &a.schedule {
        spec.schedule_override = Some(parse_schedule(s)?);
    }
    if spec.distribution != Distribution::Random {
        eprintln!("schedule {}", spec.schedule()?);
    }
    let points = generate(&spec)?;
    let text = write_layout_file(&spec, &points);
    match &a.out {
        Some(p) => std::fs::write(p, text)?,
        None => print!("{text}"),
    }
    if let Some(p) = &a.scatter {
        std::fs::write(p, scatter_csv(&spec, &points))?;
    }
    Ok(())
}

fn run_trial_cmd(a: RunTrialArgs) -> Result<()> {
    let count = match a.count {
        Some(c) => c,
        None => resource_count_for_arena(a.arena)?,
    };
    let mut config = TrialConfig::new(a.team, a.arena as f64, a.distribution, count, a.policy, a.seed);
    config.layout.seed = a.layout_seed.unwrap_or(a.seed);
    config.duration_secs = a.duration;
    if let Some(p) = &a.params {
        config.params = CpfaParams::load(p)?;
    }
    if let Some(p) = &a.layout_file {
        let points = parse_layout_file(&std::fs::read_to_string(p)?)?;
        config.layout.resource_count = points.len();
        config.preset_layout = Some(points);
    }
    if a.uniform_pheromone {
        config.pheromone_selection = PheromoneSelection::Uniform;
    }
    config.limits.yield_enabled = !a.no_yield;
    let gateway = Arc::new(Gateway::new(a.gateway.apply(GatewayConfig::default())?)?);
    let provider = LlmPolicyProvider::new(gateway.clone());
    let result = run_trial_with(config, &provider)?;
    if let Some(p) = &a.log {
        std::fs::write(p, result.event_log_jsonl())?;
    }
    let n = result.latency_samples.len();
    let summary = serde_json::json!({
        "deposits": result.deposits,
        "initial_resources": result.initial_resources,
        "llm_calls": result.llm_calls,
        "llm_fallbacks": result.llm_fallbacks,
        "latency_mean_secs": (n > 0).then(|| result.latency_samples.iter().sum::<f64>() / n as f64),
        "events": result.event_log.len(),
        "network_ops": gateway.network_ops(),
    });
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(())
}

fn ga_train(a: GaTrainArgs) -> Result<()> {
    let count = resource_count_for_arena(a.arena)?;
    let config = GaConfig {
        population: a.population,
        generations: a.generations,
        trials_per_genome: a.trials,
        eval_duration_secs: a.duration,
        training: TrialConfig::new(a.team, a.arena as f64, a.distribution, count, PolicyKind::Cascade, a.seed),
        master_seed: a.seed,
        parallel: !a.serial,
        ..GaConfig::default()
    };
    let result = ga_run(&config)?;
    for d in &result.diagnostics {
        eprintln!("warning: {d}");
    }
    std::fs::write(&a.out, result.best.to_kv_text())?;
    std::fs::write(&a.history, result.history_csv())?;
    println!("best fitness {} written to {}", result.best_fitness, a.out.display());
    Ok(())
}

fn run_grid_cmd(a: RunGridArgs) -> Result<i32> {
    let mut spec = match &a.spec {
        Some(p) => GridSpec::load(p)?,
        None => GridSpec::default(),
    };
    if let Some(p) = a.policies {
        spec.policies = p;
    }
    if let Some(t) = a.trials {
        spec.trials_per_cell = t;
    }
    if let Some(d) = a.duration {
        spec.duration_secs = d;
    }
    if let Some(p) = &a.params {
        spec.params = CpfaParams::load(p)?;
    }
    spec.gateway = a.gateway.apply(spec.gateway)?;
    let mut options = RunOptions {
        resume: a.resume,
        keep_logs: !a.no_logs,
        ..RunOptions::default()
    };
    if let Some(p) = a.parallelism {
        options.parallelism = p;
    }
    let report = run_grid(&spec, &a.out, &options)?;
    println!(
        "{} trials: {} run, {} already done, {} failed, {} network requests",
        report.total,
        report.completed,
        report.skipped,
        report.failures.len(),
        report.network_ops
    );
    for (key, err) in &report.failures {
        eprintln!("failed {key}: {err}");
    }
    Ok(report.exit_code())
}

fn report_cmd(a: ReportArgs) -> Result<()> {
    let rows = load_rows(&a.store)?;
    if rows.is_empty() {
        bail!("no trial rows in {}", a.store.display());
    }
    let summary = summarize(&rows, a.baseline, a.candidate);
    if let Err(e) = verify_summary(&summary, &rows) {
        bail!("summary verification failed: {e}");
    }
    let out = a.out.unwrap_or_else(|| a.store.join("report"));
    write_report(&out, &summary, &rows)?;
    if !summary.missing_cells.is_empty() {
        eprintln!("warning: partial summary, missing cells: {}", summary.missing_cells.join(", "));
    }
    print!("{}", forage_harness::summary_markdown(&summary));
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::GenLayout(a) => gen_layout(a),
        Command::RunTrial(a) => run_trial_cmd(a),
        Command::GaTrain(a) => ga_train(a),
        Command::RunGrid(a) => {
            let code = run_grid_cmd(a)?;
            std::process::exit(code)
        }
        Command::Report(a) => report_cmd(a),
        Command::MockLlmServe(a) => {
            let server = mock_serve(a.behavior, a.port)?;
            eprintln!("mock endpoint at {}", server.base_url());
            server.wait();
            Ok(())
        }
    }
}
