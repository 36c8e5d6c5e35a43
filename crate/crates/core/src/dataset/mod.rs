//! Prediction rounds: domain types, ingestion and per-round baselines.

mod io;
mod summary;

use std::collections::{HashMap, HashSet};

use chrono::{DateTime, Datelike, Duration, NaiveDate, Utc, Weekday};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use io::{detect_format, load_dataset, validate_dataset, write_dataset, ValidationReport};
pub use summary::{
    crowd_mean_error, futures_mean_error, linear_extrapolation_error, price_change,
    summarize_round, RoundSummary,
};

/// Days before the round's end at which the default analysis window closes.
pub const DEFAULT_CUTOFF_DAYS: i64 = 7;

/// Length of the trailing window used for the linear-extrapolation baseline.
pub const HISTORY_WINDOW_DAYS: i64 = 183;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DatasetError {
    #[error("record {record}: missing field `{field}`")]
    MissingField { record: String, field: String },
    #[error("record {record}: non-positive price in `{field}`")]
    NonPositivePrice { record: String, field: String },
    #[error("record {record}: dates in `{field}` are not strictly increasing or run past the prediction time")]
    NonMonotoneDates { record: String, field: String },
    #[error("record {record}: unknown round reference `{round_id}`")]
    UnknownRoundReference { record: String, round_id: String },
    #[error("record {record}: social histogram contains predictions made after this set")]
    CausalityViolation { record: String },
    #[error("round {record}: requires start_date < analysis_cutoff <= end_date")]
    InvalidRoundDates { record: String },
    #[error("duplicate identifier `{record}`")]
    DuplicateId { record: String },
    #[error("{location}: {message}")]
    Parse { location: String, message: String },
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("round {0} has no prediction sets in its analysis window")]
    EmptyRound(String),
    #[error("round {0}: not enough price history")]
    InsufficientHistory(String),
    #[error("round {0}: no futures prices in the analysis window")]
    MissingFutures(String),
}

impl DatasetError {
    /// Identifier of the offending record, when the error concerns one.
    pub fn record_id(&self) -> Option<&str> {
        match self {
            DatasetError::MissingField { record, .. }
            | DatasetError::NonPositivePrice { record, .. }
            | DatasetError::NonMonotoneDates { record, .. }
            | DatasetError::UnknownRoundReference { record, .. }
            | DatasetError::CausalityViolation { record }
            | DatasetError::InvalidRoundDates { record }
            | DatasetError::DuplicateId { record } => Some(record),
            DatasetError::EmptyRound(r)
            | DatasetError::InsufficientHistory(r)
            | DatasetError::MissingFutures(r) => Some(r),
            DatasetError::Parse { .. } | DatasetError::Io { .. } => None,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            DatasetError::MissingField { .. } => "MissingField",
            DatasetError::NonPositivePrice { .. } => "NonPositivePrice",
            DatasetError::NonMonotoneDates { .. } => "NonMonotoneDates",
            DatasetError::UnknownRoundReference { .. } => "UnknownRoundReference",
            DatasetError::CausalityViolation { .. } => "CausalityViolation",
            DatasetError::InvalidRoundDates { .. } => "InvalidRoundDates",
            DatasetError::DuplicateId { .. } => "DuplicateId",
            DatasetError::Parse { .. } => "Parse",
            DatasetError::Io { .. } => "Io",
            DatasetError::EmptyRound(_) => "EmptyRound",
            DatasetError::InsufficientHistory(_) => "InsufficientHistory",
            DatasetError::MissingFutures(_) => "MissingFutures",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PricePoint {
    pub date: NaiveDate,
    pub close: f64,
}

/// One forecaster interaction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionSet {
    pub id: String,
    pub round_id: String,
    pub timestamp: DateTime<Utc>,
    pub b_pre: f64,
    pub b_post: f64,
    /// Peer predictions shown before revision, in display order.
    pub social_histogram: Vec<f64>,
    /// Submission times of the peer predictions, when the source records them.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub social_histogram_timestamps: Option<Vec<DateTime<Utc>>>,
    pub price_history: Vec<PricePoint>,
}

impl PredictionSet {
    pub fn date(&self) -> NaiveDate {
        self.timestamp.date_naive()
    }

    pub fn history_closes(&self) -> Vec<f64> {
        self.price_history.iter().map(|p| p.close).collect()
    }

    /// Every invariant violation of this record, in field order.
    pub fn violations(&self) -> Vec<DatasetError> {
        let mut out = Vec::new();
        let rec = || self.id.clone();
        let positive = |x: f64| x > 0.0 && x.is_finite();
        if !positive(self.b_pre) {
            out.push(DatasetError::NonPositivePrice { record: rec(), field: "b_pre".into() });
        }
        if !positive(self.b_post) {
            out.push(DatasetError::NonPositivePrice { record: rec(), field: "b_post".into() });
        }
        if !self.social_histogram.iter().all(|&x| positive(x)) {
            out.push(DatasetError::NonPositivePrice {
                record: rec(),
                field: "social_histogram".into(),
            });
        }
        if !self.price_history.iter().all(|p| positive(p.close)) {
            out.push(DatasetError::NonPositivePrice {
                record: rec(),
                field: "price_history".into(),
            });
        }
        let increasing = self.price_history.windows(2).all(|w| w[0].date < w[1].date);
        let not_future = self.price_history.iter().all(|p| p.date <= self.date());
        if !increasing || !not_future {
            out.push(DatasetError::NonMonotoneDates {
                record: rec(),
                field: "price_history".into(),
            });
        }
        if let Some(ts) = &self.social_histogram_timestamps {
            if ts.len() != self.social_histogram.len() {
                out.push(DatasetError::Parse {
                    location: self.id.clone(),
                    message: "social_histogram_timestamps length differs from social_histogram"
                        .into(),
                });
            } else if ts.iter().any(|t| *t >= self.timestamp) {
                out.push(DatasetError::CausalityViolation { record: rec() });
            }
        }
        out
    }
}

/// One prediction task: an asset, its realised price and the sets collected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Round {
    pub round_id: String,
    pub asset_symbol: String,
    pub start_date: NaiveDate,
    pub end_date: NaiveDate,
    pub ground_truth: f64,
    pub analysis_cutoff: NaiveDate,
    pub futures: Option<Vec<PricePoint>>,
    pub prediction_sets: Vec<PredictionSet>,
}

impl Round {
    pub fn default_cutoff(end_date: NaiveDate) -> NaiveDate {
        end_date - Duration::days(DEFAULT_CUTOFF_DAYS)
    }

    /// Sets submitted on or before the analysis cutoff.
    pub fn analysis_sets(&self) -> impl Iterator<Item = &PredictionSet> + '_ {
        self.prediction_sets
            .iter()
            .filter(move |s| s.date() <= self.analysis_cutoff)
    }

    pub fn n_analysis_sets(&self) -> usize {
        self.analysis_sets().count()
    }

    /// Union of the asset closes seen by any of the round's forecasters,
    /// ordered by date. The first close recorded for a date wins.
    pub fn asset_history(&self) -> Vec<PricePoint> {
        let mut by_date: HashMap<NaiveDate, f64> = HashMap::new();
        for set in &self.prediction_sets {
            for p in &set.price_history {
                by_date.entry(p.date).or_insert(p.close);
            }
        }
        let mut out: Vec<PricePoint> = by_date
            .into_iter()
            .map(|(date, close)| PricePoint { date, close })
            .collect();
        out.sort_by_key(|p| p.date);
        out
    }

    /// Trading days (Mon-Fri) strictly after the set's date up to and
    /// including the round's end date; at least one.
    pub fn horizon_days(&self, set: &PredictionSet) -> u32 {
        let mut d = set.date();
        let mut n = 0u32;
        while d < self.end_date {
            d = d.succ_opt().expect("date in range");
            if !matches!(d.weekday(), Weekday::Sat | Weekday::Sun) {
                n += 1;
            }
        }
        n.max(1)
    }

    pub fn violations(&self) -> Vec<DatasetError> {
        let mut out = Vec::new();
        if !(self.ground_truth > 0.0 && self.ground_truth.is_finite()) {
            out.push(DatasetError::NonPositivePrice {
                record: self.round_id.clone(),
                field: "ground_truth".into(),
            });
        }
        if !(self.start_date < self.analysis_cutoff && self.analysis_cutoff <= self.end_date) {
            out.push(DatasetError::InvalidRoundDates { record: self.round_id.clone() });
        }
        if let Some(fut) = &self.futures {
            if !fut.iter().all(|p| p.close > 0.0 && p.close.is_finite()) {
                out.push(DatasetError::NonPositivePrice {
                    record: self.round_id.clone(),
                    field: "futures".into(),
                });
            }
            if !fut.windows(2).all(|w| w[0].date < w[1].date) {
                out.push(DatasetError::NonMonotoneDates {
                    record: self.round_id.clone(),
                    field: "futures".into(),
                });
            }
        }
        for set in &self.prediction_sets {
            if set.round_id != self.round_id {
                out.push(DatasetError::UnknownRoundReference {
                    record: set.id.clone(),
                    round_id: set.round_id.clone(),
                });
            }
            out.extend(set.violations());
        }
        out
    }
}

/// Checks identifiers are unique across rounds and sets, then every
/// per-record invariant.
pub fn validate_rounds(rounds: &[Round]) -> Vec<DatasetError> {
    let mut out = Vec::new();
    let mut round_ids = HashSet::new();
    let mut set_ids = HashSet::new();
    for round in rounds {
        if !round_ids.insert(round.round_id.as_str()) {
            out.push(DatasetError::DuplicateId { record: round.round_id.clone() });
        }
        for set in &round.prediction_sets {
            if !set_ids.insert(set.id.as_str()) {
                out.push(DatasetError::DuplicateId { record: set.id.clone() });
            }
        }
        out.extend(round.violations());
    }
    out
}

/// How far ahead price-history models extrapolate for a given set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Horizon {
    /// Trading days from the set's date to the round's end.
    #[default]
    UntilRoundEnd,
    Fixed(u32),
}

impl Horizon {
    pub fn days(self, round: &Round, set: &PredictionSet) -> u32 {
        match self {
            Horizon::UntilRoundEnd => round.horizon_days(set),
            Horizon::Fixed(n) => n,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Pre,
    Post,
}

impl PredictionSet {
    pub fn prediction(&self, phase: Phase) -> f64 {
        match phase {
            Phase::Pre => self.b_pre,
            Phase::Post => self.b_post,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DatasetFormat {
    Jsonl,
    CsvBundle,
}
