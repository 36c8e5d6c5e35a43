use std::fs::{self, File};
use std::io::BufWriter;
use std::path::Path;

use crowdfront::attribution::{alpha_records, build_alpha_grid, AlphaGrid};
use crowdfront::beliefmodels::{residual_table, ModelContext};
use crowdfront::dataset::{detect_format, summarize_round, validate_dataset, DatasetFormat, Round};
use crowdfront::paretolab::{pareto_curve, smooth_frontier, window_filter, ParetoError};
use crowdfront::report;
use crowdfront::simcrowd::{generate_dataset, SimConfig};
use crowdfront::{seeds, ModelKind};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::CliError;

fn format_for(cfg: &RunConfig, dir: &Path) -> DatasetFormat {
    cfg.format.or_else(|| detect_format(dir)).unwrap_or(DatasetFormat::Jsonl)
}

fn create(out: &Path, name: &str) -> Result<BufWriter<File>, CliError> {
    fs::create_dir_all(out).map_err(|e| CliError::runtime("Io", format!("{}: {e}", out.display())))?;
    let path = out.join(name);
    File::create(&path)
        .map(BufWriter::new)
        .map_err(|e| CliError::runtime("Io", format!("{}: {e}", path.display())))
}

fn write_csv(out: &Path, name: &str, f: impl FnOnce(BufWriter<File>) -> csv::Result<()>) -> Result<(), CliError> {
    f(create(out, name)?).map_err(|e| CliError::runtime("Io", format!("{name}: {e}")))
}

fn write_json<T: Serialize>(out: &Path, name: &str, value: &T) -> Result<(), CliError> {
    let mut w = create(out, name)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| CliError::runtime("Io", format!("{name}: {e}")))?;
    std::io::Write::write_all(&mut w, b"\n").map_err(|e| CliError::runtime("Io", format!("{name}: {e}")))
}

/// Loads the input dataset, restricted to the configured window if any.
fn load(cfg: &RunConfig) -> Result<Vec<Round>, CliError> {
    let dir = cfg.input()?;
    let rounds = crowdfront::dataset::load_dataset(dir, format_for(cfg, dir)).map_err(CliError::from)?;
    match cfg.window {
        Some(w) => window_filter(&rounds, w.from, w.to).map_err(CliError::from),
        None => Ok(rounds),
    }
}

#[derive(Serialize)]
struct ViolationRecord {
    kind: &'static str,
    record: Option<String>,
    message: String,
}

#[derive(Serialize)]
struct ValidationSummary {
    rounds: usize,
    prediction_sets: usize,
    violations: Vec<ViolationRecord>,
}

/// Returns whether the dataset is valid.
pub fn validate(cfg: &RunConfig) -> Result<bool, CliError> {
    let dir = cfg.input()?;
    let report = validate_dataset(dir, format_for(cfg, dir));
    let summary = ValidationSummary {
        rounds: report.rounds.len(),
        prediction_sets: report.n_sets(),
        violations: report
            .violations
            .iter()
            .map(|v| ViolationRecord { kind: v.kind(), record: v.record_id().map(String::from), message: v.to_string() })
            .collect(),
    };
    for v in &summary.violations {
        println!("{}: {}", v.kind, v.message);
    }
    println!(
        "{} rounds, {} prediction sets, {} violations",
        summary.rounds,
        summary.prediction_sets,
        summary.violations.len()
    );
    if let Some(out) = &cfg.out {
        write_json(out, "validation.json", &summary)?;
    }
    Ok(report.is_valid())
}

pub fn summarize(cfg: &RunConfig) -> Result<(), CliError> {
    let rounds = load(cfg)?;
    let rows = rounds.iter().map(summarize_round).collect::<Result<Vec<_>, _>>().map_err(CliError::from)?;
    write_csv(cfg.out()?, "summary.csv", |w| report::write_summary(w, &rows))
}

pub fn fit_models(cfg: &RunConfig) -> Result<(), CliError> {
    let rounds = load(cfg)?;
    let ctx = ModelContext::new(cfg.model_config());
    let rows = residual_table(&ctx, &ModelKind::ALL, &rounds, cfg.horizon())
        .map_err(|e| CliError::runtime("Model", e.to_string()).with_record(e.set_id.clone()))?;
    let out = cfg.out()?;
    write_csv(out, "residuals.csv", |w| report::write_residuals(w, &rows))?;
    write_json(out, "fit_report.json", &serde_json::json!({ "config": cfg.effective(), "rows": rows }))
}

fn alphas(cfg: &RunConfig, rounds: &[Round]) -> Result<Vec<crowdfront::AlphaRecord>, CliError> {
    alpha_records(rounds, cfg.horizon(), &cfg.model_config()).map_err(|e| {
        let record = match &e {
            crowdfront::attribution::AttributionError::Model { set_id, .. } => Some(set_id.clone()),
            _ => None,
        };
        let err = CliError::runtime("Attribution", e.to_string());
        match record {
            Some(r) => err.with_record(r),
            None => err,
        }
    })
}

pub fn alpha(cfg: &RunConfig) -> Result<(), CliError> {
    let rounds = load(cfg)?;
    let records = alphas(cfg, &rounds)?;
    write_csv(cfg.out()?, "alphas.csv", |w| report::write_alphas(w, &records))
}

pub fn pareto(cfg: &RunConfig) -> Result<(), CliError> {
    let rounds = load(cfg)?;
    let records = alphas(cfg, &rounds)?;
    let grid = match &cfg.grid {
        Some(g) => AlphaGrid::new(g.0.clone()),
        None => build_alpha_grid(&records, cfg.n_bins),
    }
    .map_err(|e| CliError::runtime("Grid", e.to_string()))?;
    let curve = pareto_curve(&rounds, &records, &grid, &cfg.bootstrap()).map_err(CliError::from)?;
    let smooth = match smooth_frontier(&curve, cfg.loess_span) {
        Ok(s) => s,
        Err(ParetoError::TooFewPoints { .. }) => Vec::new(),
        Err(e) => return Err(e.into()),
    };
    let out = cfg.out()?;
    write_csv(out, "alphas.csv", |w| report::write_alphas(w, &records))?;
    write_csv(out, "pareto.csv", |w| report::write_pareto(w, &curve))?;
    write_csv(out, "improvement.csv", |w| report::write_improvement(w, &curve))?;
    write_csv(out, "pareto_smooth.csv", |w| report::write_smooth(w, &smooth))?;
    write_json(out, "pareto_run.json", &serde_json::json!({ "config": cfg.effective(), "grid": grid.boundaries }))
}

#[derive(Deserialize)]
#[serde(untagged)]
enum SimConfigFile {
    Many(Vec<SimConfig>),
    One(SimConfig),
}

/// `seed` replaces every round's seed with one derived from it and the
/// round's position.
pub fn simulate(config: &Path, out: &Path, seed: Option<u64>) -> Result<(), CliError> {
    let text = fs::read_to_string(config).map_err(|e| CliError::runtime("Io", format!("{}: {e}", config.display())))?;
    let mut configs = match serde_json::from_str::<SimConfigFile>(&text) {
        Ok(SimConfigFile::Many(v)) => v,
        Ok(SimConfigFile::One(c)) => vec![c],
        Err(e) => return Err(CliError::runtime("Config", format!("{}: {e}", config.display()))),
    };
    if let Some(s) = seed {
        for (k, c) in configs.iter_mut().enumerate() {
            c.seed = seeds::derive(s, &[k as u64]);
        }
    }
    let sims = generate_dataset(&configs, out).map_err(|e| CliError::runtime("Simulation", e.to_string()))?;
    let labels: Vec<_> = sims
        .iter()
        .flat_map(|s| s.round.prediction_sets.iter().zip(&s.agents).map(|(p, k)| serde_json::json!({ "prediction_set_id": p.id, "agent": k })))
        .collect();
    write_json(out, "agents.json", &labels)
}
