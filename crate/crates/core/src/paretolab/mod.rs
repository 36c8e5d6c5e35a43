//! Subset improvement over the full crowd, its bootstrap mean, confidence
//! interval and cross-round risk, and the resulting Pareto frontier.
//!
//! Errors and improvements are in percent. Improvement is signed:
//! `err(full crowd) - err(subset)`, so positive means the subset wins.

mod loess;

use std::collections::{BTreeMap, HashMap};

use chrono::NaiveDate;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::attribution::{in_subset, AlphaGrid, AlphaRecord};
use crate::dataset::{Phase, Round};
use crate::seeds::{self, tag};
use crate::stats::{self, StatsError};

pub use loess::{loess_smooth, DEFAULT_SPAN};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParetoError {
    #[error("round {round_id}: empty subset at alpha_s = {alpha_s}")]
    EmptySubset { round_id: String, alpha_s: f64 },
    #[error("alpha_s = {alpha_s}: {got} round(s) with a non-empty subset, need at least 2")]
    InsufficientRounds { alpha_s: f64, got: usize },
    #[error("need at least {needed} points, got {got}")]
    TooFewPoints { got: usize, needed: usize },
    #[error("no prediction sets between {from} and {to}")]
    EmptyWindow { from: NaiveDate, to: NaiveDate },
    #[error("{0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Stats(#[from] StatsError),
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct ImprovementSample {
    pub alpha_s: f64,
    pub bootstrap_index: usize,
    pub per_round_improvements: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct ParetoPoint {
    pub alpha_s: f64,
    pub improvement_mean: f64,
    pub ci95_half_width: f64,
    pub risk: f64,
    pub n_rounds_used: usize,
    pub n_rounds_excluded: usize,
}

/// One grid position of a Pareto curve. Grid values where fewer than two
/// rounds have a non-empty subset are kept as explicit gaps.
#[derive(Debug, Clone, Serialize, PartialEq)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum CurvePoint {
    Point(ParetoPoint),
    Gap { alpha_s: f64, n_rounds_used: usize, n_rounds_excluded: usize },
}

impl CurvePoint {
    pub fn alpha_s(&self) -> f64 {
        match self {
            CurvePoint::Point(p) => p.alpha_s,
            CurvePoint::Gap { alpha_s, .. } => *alpha_s,
        }
    }

    pub fn point(&self) -> Option<&ParetoPoint> {
        match self {
            CurvePoint::Point(p) => Some(p),
            CurvePoint::Gap { .. } => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BootstrapConfig {
    pub n_boot: usize,
    pub seed: u64,
    pub level: f64,
    /// Keep the full crowd at its original sample instead of resampling it.
    pub fixed_full_set: bool,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        BootstrapConfig { n_boot: 100, seed: 0, level: 0.95, fixed_full_set: false }
    }
}

fn pct_error(mean: f64, truth: f64) -> f64 {
    (mean - truth).abs() / truth * 100.0
}

/// Error of the mean prediction of the sets in `ids`, restricted to the
/// round's analysis window.
pub fn subset_error<S: AsRef<str>>(round: &Round, ids: &[S], phase: Phase) -> Result<f64, ParetoError> {
    let wanted: std::collections::HashSet<&str> = ids.iter().map(|s| s.as_ref()).collect();
    let preds: Vec<f64> = round
        .analysis_sets()
        .filter(|s| wanted.contains(s.id.as_str()))
        .map(|s| s.prediction(phase))
        .collect();
    if preds.is_empty() {
        return Err(ParetoError::EmptySubset { round_id: round.round_id.clone(), alpha_s: f64::NAN });
    }
    Ok(pct_error(stats::mean(&preds), round.ground_truth))
}

/// `err(all analysis sets) - err(ids)` on revised beliefs.
pub fn improvement<S: AsRef<str>>(round: &Round, ids: &[S]) -> Result<f64, ParetoError> {
    let all: Vec<&str> = round.analysis_sets().map(|s| s.id.as_str()).collect();
    Ok(subset_error(round, &all, Phase::Post)? - subset_error(round, ids, Phase::Post)?)
}

struct RoundSample<'a> {
    round_id: &'a str,
    truth: f64,
    all: Vec<f64>,
    subset: Vec<f64>,
}

fn round_samples<'a>(rounds: &'a [Round], records: &[AlphaRecord], alpha_s: f64) -> (Vec<RoundSample<'a>>, usize) {
    let alpha: HashMap<(&str, &str), f64> = records
        .iter()
        .map(|r| ((r.round_id.as_str(), r.prediction_set_id.as_str()), r.alpha_scaled))
        .collect();
    let mut used = Vec::new();
    let mut excluded = 0;
    for round in rounds {
        let mut all = Vec::new();
        let mut subset = Vec::new();
        for set in round.analysis_sets() {
            // the full crowd is every set that carries an alpha
            let Some(&a) = alpha.get(&(round.round_id.as_str(), set.id.as_str())) else {
                continue;
            };
            all.push(set.b_post);
            if in_subset(a, alpha_s) {
                subset.push(set.b_post);
            }
        }
        if subset.is_empty() {
            excluded += 1;
        } else {
            used.push(RoundSample { round_id: &round.round_id, truth: round.ground_truth, all, subset });
        }
    }
    (used, excluded)
}

fn resampled_mean(values: &[f64], rng: &mut impl Rng) -> f64 {
    let n = values.len();
    (0..n).map(|_| values[rng.gen_range(0..n)]).sum::<f64>() / n as f64
}

/// Per-round improvements for every bootstrap replicate. Replicate `b` of
/// round `r` draws both the subset and the full crowd from one stream keyed
/// by `(seed, alpha_s, b, r)`, so a subset equal to the full crowd always
/// yields exactly zero.
pub fn bootstrap_samples(
    rounds: &[Round],
    records: &[AlphaRecord],
    alpha_s: f64,
    cfg: &BootstrapConfig,
) -> (Vec<ImprovementSample>, usize) {
    let (used, excluded) = round_samples(rounds, records, alpha_s);
    let samples = (0..cfg.n_boot)
        .into_par_iter()
        .map(|b| {
            let per_round_improvements = used
                .iter()
                .map(|r| {
                    let stream = seeds::derive(
                        cfg.seed,
                        &[tag::BOOTSTRAP, alpha_s.to_bits(), b as u64, seeds::hash_str(r.round_id)],
                    );
                    let sub = resampled_mean(&r.subset, &mut seeds::rng(stream));
                    let all = if cfg.fixed_full_set {
                        stats::mean(&r.all)
                    } else {
                        resampled_mean(&r.all, &mut seeds::rng(stream))
                    };
                    (r.round_id.to_string(), pct_error(all, r.truth) - pct_error(sub, r.truth))
                })
                .collect();
            ImprovementSample { alpha_s, bootstrap_index: b, per_round_improvements }
        })
        .collect();
    (samples, excluded)
}

pub fn bootstrap_analysis(
    rounds: &[Round],
    records: &[AlphaRecord],
    alpha_s: f64,
    cfg: &BootstrapConfig,
) -> Result<ParetoPoint, ParetoError> {
    if cfg.n_boot < 2 {
        return Err(ParetoError::InvalidArgument("n_boot must be at least 2".into()));
    }
    let (samples, excluded) = bootstrap_samples(rounds, records, alpha_s, cfg);
    let n_used = samples.first().map_or(0, |s| s.per_round_improvements.len());
    if n_used < 2 {
        return Err(ParetoError::InsufficientRounds { alpha_s, got: n_used });
    }
    let (means, risks): (Vec<f64>, Vec<f64>) = samples
        .iter()
        .map(|s| {
            let per_round: Vec<f64> = s.per_round_improvements.values().copied().collect();
            (stats::mean(&per_round), stats::std_dev(&per_round, 0))
        })
        .unzip();
    Ok(ParetoPoint {
        alpha_s,
        improvement_mean: stats::mean(&means),
        ci95_half_width: stats::t_half_width(&means, cfg.level)?,
        risk: stats::mean(&risks),
        n_rounds_used: n_used,
        n_rounds_excluded: excluded,
    })
}

pub fn pareto_curve(
    rounds: &[Round],
    records: &[AlphaRecord],
    grid: &AlphaGrid,
    cfg: &BootstrapConfig,
) -> Result<Vec<CurvePoint>, ParetoError> {
    grid.boundaries
        .par_iter()
        .map(|&alpha_s| match bootstrap_analysis(rounds, records, alpha_s, cfg) {
            Ok(p) => Ok(CurvePoint::Point(p)),
            Err(ParetoError::InsufficientRounds { got, .. }) => Ok(CurvePoint::Gap {
                alpha_s,
                n_rounds_used: got,
                n_rounds_excluded: rounds.len() - got,
            }),
            Err(e) => Err(e),
        })
        .collect()
}

/// LOESS of improvement against risk over the non-gap points.
pub fn smooth_frontier(curve: &[CurvePoint], span: f64) -> Result<Vec<(f64, f64)>, ParetoError> {
    let pts: Vec<(f64, f64)> = curve
        .iter()
        .filter_map(CurvePoint::point)
        .map(|p| (p.risk, p.improvement_mean))
        .collect();
    loess_smooth(&pts, span)
}

/// Keeps only sets submitted on dates in `[from, to]`. Each kept round's
/// analysis cutoff is moved to `to` (bounded by the round's end) so the
/// window is not clipped by the default cutoff. Rounds left empty are
/// dropped.
pub fn window_filter(rounds: &[Round], from: NaiveDate, to: NaiveDate) -> Result<Vec<Round>, ParetoError> {
    if from > to {
        return Err(ParetoError::InvalidArgument(format!("window start {from} is after its end {to}")));
    }
    let out: Vec<Round> = rounds
        .iter()
        .filter_map(|r| {
            let sets: Vec<_> = r
                .prediction_sets
                .iter()
                .filter(|s| (from..=to).contains(&s.date()))
                .cloned()
                .collect();
            if sets.is_empty() {
                return None;
            }
            let analysis_cutoff = r.analysis_cutoff.max(to).min(r.end_date);
            Some(Round { prediction_sets: sets, analysis_cutoff, ..r.clone() })
        })
        .filter(|r| r.n_analysis_sets() > 0)
        .collect();
    if out.is_empty() {
        return Err(ParetoError::EmptyWindow { from, to });
    }
    Ok(out)
}
