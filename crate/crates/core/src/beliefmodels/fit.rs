//! Per-model, per-round residual summaries.

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use super::{residual, ModelContext, ModelError, ModelKind};
use crate::dataset::{Horizon, Round};
use crate::stats;

#[derive(Debug, Error, Clone, PartialEq)]
#[error("{} on prediction set {set_id}: {source}", model.name())]
pub struct FitError {
    pub model: ModelKind,
    pub set_id: String,
    pub source: ModelError,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidualRow {
    pub model: ModelKind,
    pub round_id: String,
    /// Sets the model could be evaluated on.
    pub n_sets: usize,
    /// Sets skipped because the model does not apply (for example an empty
    /// social histogram).
    pub n_skipped: usize,
    pub mean_abs_residual_pct: f64,
    /// `None` with fewer than two evaluated sets.
    pub ci95_half_width_pct: Option<f64>,
}

/// |relative residual| in percent of every analysis set, `None` where the
/// model does not apply to the set.
pub fn round_residuals(
    ctx: &ModelContext,
    model: ModelKind,
    round: &Round,
    horizon: Horizon,
) -> Result<Vec<Option<f64>>, FitError> {
    let sets: Vec<_> = round.analysis_sets().collect();
    sets.par_iter()
        .map(|set| match ctx.evaluate(model, set, horizon.days(round, set)) {
            Ok(p) => Ok(Some(residual(&p, set.b_post).abs() * 100.0)),
            Err(ModelError::EmptyHistogram)
            | Err(ModelError::InsufficientHistory { .. })
            | Err(ModelError::ZeroPosteriorMass) => Ok(None),
            Err(source) => Err(FitError { model, set_id: set.id.clone(), source }),
        })
        .collect()
}

/// One row per (model, round), models in `models` order, rounds in input order.
pub fn residual_table(ctx: &ModelContext, models: &[ModelKind], rounds: &[Round], horizon: Horizon) -> Result<Vec<ResidualRow>, FitError> {
    models
        .iter()
        .flat_map(|&model| rounds.iter().map(move |r| (model, r)))
        .map(|(model, round)| {
            let all = round_residuals(ctx, model, round, horizon)?;
            let ok: Vec<f64> = all.iter().flatten().copied().collect();
            Ok(ResidualRow {
                model,
                round_id: round.round_id.clone(),
                n_sets: ok.len(),
                n_skipped: all.len() - ok.len(),
                mean_abs_residual_pct: if ok.is_empty() { f64::NAN } else { stats::mean(&ok) },
                ci95_half_width_pct: stats::t_half_width(&ok, 0.95).ok(),
            })
        })
        .collect()
}
