mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use crowdfront::dataset::{DatasetError, DatasetFormat};
use crowdfront::paretolab::ParetoError;
use serde::Serialize;

use config::{Grid, RunConfig, Window};

/// Failure carried to the process boundary: exit code plus a
/// machine-readable record written to stderr as one JSON line.
#[derive(Debug, Serialize)]
pub struct CliError {
    #[serde(skip)]
    pub code: u8,
    pub error: String,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub record: Option<String>,
}

impl CliError {
    pub fn runtime(kind: &str, message: impl Into<String>) -> Self {
        CliError { code: 2, error: kind.into(), message: message.into(), record: None }
    }

    pub fn with_record(mut self, record: String) -> Self {
        self.record = Some(record);
        self
    }
}

impl From<DatasetError> for CliError {
    fn from(e: DatasetError) -> Self {
        let code = if matches!(e, DatasetError::Io { .. }) { 2 } else { 1 };
        CliError { code, error: e.kind().into(), message: e.to_string(), record: e.record_id().map(String::from) }
    }
}

impl From<ParetoError> for CliError {
    fn from(e: ParetoError) -> Self {
        let kind = match &e {
            ParetoError::EmptySubset { .. } => "EmptySubset",
            ParetoError::InsufficientRounds { .. } => "InsufficientRounds",
            ParetoError::TooFewPoints { .. } => "TooFewPoints",
            ParetoError::EmptyWindow { .. } => "EmptyWindow",
            ParetoError::InvalidArgument(_) => "InvalidArgument",
            ParetoError::Stats(_) => "Stats",
        };
        CliError::runtime(kind, e.to_string())
    }
}

#[derive(Parser)]
#[command(name = "crowdfront", version, about = "Belief-update modelling and accuracy-risk analysis of crowd forecasts")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check every dataset invariant and list all violations.
    Validate(RunArgs),
    /// Per-round summary table (summary.csv).
    Summarize(RunArgs),
    /// Mean absolute residual of every model per round (residuals.csv).
    FitModels(RunArgs),
    /// Social-learning scores per prediction set (alphas.csv).
    Alpha(RunArgs),
    /// Bootstrapped improvement and risk per alpha boundary
    /// (pareto.csv, improvement.csv, pareto_smooth.csv).
    Pareto(RunArgs),
    /// Write a synthetic dataset from a simulation config.
    Simulate(SimArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Dataset directory.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Dataset layout; detected from the files present when omitted.
    #[arg(long, value_parser = parse_format)]
    format: Option<DatasetFormat>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    n_boot: Option<usize>,
    /// Number of equal-count alpha groups for the default grid.
    #[arg(long)]
    n_bins: Option<usize>,
    /// Fixed extrapolation horizon in trading days.
    #[arg(long)]
    horizon_days: Option<u32>,
    /// Only use prediction sets dated FROM:TO (inclusive, YYYY-MM-DD).
    #[arg(long)]
    window: Option<Window>,
    /// Alpha boundaries: comma-separated values or `linspace:N`.
    #[arg(long, allow_hyphen_values = true)]
    grid: Option<Grid>,
    /// Keep the full crowd fixed across bootstrap replicates.
    #[arg(long)]
    fixed_full_set: bool,
    /// JSON run configuration; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Worker threads.
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Args)]
struct SimArgs {
    /// Simulation config: one JSON object or an array of them, one per round.
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Replaces each round's seed with one derived from this value.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
}

fn parse_format(s: &str) -> Result<DatasetFormat, String> {
    match s {
        "jsonl" => Ok(DatasetFormat::Jsonl),
        "csv-bundle" | "csv" => Ok(DatasetFormat::CsvBundle),
        _ => Err(format!("unknown format `{s}` (expected jsonl or csv-bundle)")),
    }
}

impl RunArgs {
    fn resolve(self) -> Result<RunConfig, CliError> {
        let mut c = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        c.input = self.input.or(c.input);
        c.out = self.out.or(c.out);
        c.format = self.format.or(c.format);
        c.seed = self.seed.unwrap_or(c.seed);
        c.n_boot = self.n_boot.unwrap_or(c.n_boot);
        c.n_bins = self.n_bins.unwrap_or(c.n_bins);
        c.horizon_days = self.horizon_days.or(c.horizon_days);
        c.window = self.window.or(c.window);
        c.grid = self.grid.or(c.grid);
        c.fixed_full_set |= self.fixed_full_set;
        c.workers = self.workers.or(c.workers);
        Ok(c)
    }
}

fn in_pool<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T, CliError> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = workers {
        if n == 0 {
            return Err(CliError::runtime("Config", "--workers must be at least 1"));
        }
        b = b.num_threads(n);
    }
    let pool = b.build().map_err(|e| CliError::runtime("ThreadPool", e.to_string()))?;
    Ok(pool.install(f))
}

fn run(cli: Cli) -> Result<ExitCode, CliError> {
    let analysis = |args: RunArgs, f: fn(&RunConfig) -> Result<(), CliError>| {
        let cfg = args.resolve()?;
        in_pool(cfg.workers, || f(&cfg))??;
        Ok(ExitCode::SUCCESS)
    };
    match cli.command {
        Command::Validate(args) => {
            let cfg = args.resolve()?;
            let valid = in_pool(cfg.workers, || commands::validate(&cfg))??;
            Ok(if valid { ExitCode::SUCCESS } else { ExitCode::from(1) })
        }
        Command::Summarize(args) => analysis(args, commands::summarize),
        Command::FitModels(args) => analysis(args, commands::fit_models),
        Command::Alpha(args) => analysis(args, commands::alpha),
        Command::Pareto(args) => analysis(args, commands::pareto),
        Command::Simulate(args) => {
            in_pool(args.workers, || commands::simulate(&args.config, &args.out, args.seed))??;
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            let record = CliError::runtime("Usage", e.kind().to_string());
            eprintln!("{}", serde_json::to_string(&record).expect("error record serialises"));
            return ExitCode::from(record.code);
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("{}", serde_json::to_string(&e).expect("error record serialises"));
            ExitCode::from(e.code)
        }
    }
}
