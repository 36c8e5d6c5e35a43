//! Per-round baselines: price change, linear extrapolation, crowd and
//! futures errors. All values are percentages of the reference price.

use chrono::Duration;
use serde::Serialize;

use super::{DatasetError, Phase, Round, HISTORY_WINDOW_DAYS};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RoundSummary {
    pub round_id: String,
    pub asset_symbol: String,
    pub ground_truth: f64,
    pub n_prediction_sets: usize,
    pub price_change_pct: f64,
    pub linear_extrapolation_error_pct: f64,
    pub crowd_mean_error_pct: f64,
    pub futures_mean_error_pct: Option<f64>,
}

fn pct_error(estimate: f64, truth: f64) -> f64 {
    (estimate - truth).abs() / truth * 100.0
}

/// `|mean(predictions) - V| / V` over the round's analysis window.
pub fn crowd_mean_error(round: &Round, phase: Phase) -> Result<f64, DatasetError> {
    let preds: Vec<f64> = round.analysis_sets().map(|s| s.prediction(phase)).collect();
    if preds.is_empty() {
        return Err(DatasetError::EmptyRound(round.round_id.clone()));
    }
    let mean = preds.iter().sum::<f64>() / preds.len() as f64;
    Ok(pct_error(mean, round.ground_truth))
}

/// Fits an ordinary least-squares line to the closes in the six months up to
/// the analysis cutoff and extrapolates it to the round's end date.
pub fn linear_extrapolation_error(round: &Round) -> Result<f64, DatasetError> {
    let window_start = round.analysis_cutoff - Duration::days(HISTORY_WINDOW_DAYS);
    let points: Vec<(f64, f64)> = round
        .asset_history()
        .into_iter()
        .filter(|p| p.date > window_start && p.date <= round.analysis_cutoff)
        .map(|p| ((p.date - round.analysis_cutoff).num_days() as f64, p.close))
        .collect();
    if points.len() < 2 {
        return Err(DatasetError::InsufficientHistory(round.round_id.clone()));
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let target = (round.end_date - round.analysis_cutoff).num_days() as f64;
    let extrapolated = my + slope * (target - mx);
    Ok(pct_error(extrapolated, round.ground_truth))
}

/// Mean over analysis-window days of `|futures - V| / V`.
pub fn futures_mean_error(round: &Round) -> Result<f64, DatasetError> {
    let errs: Vec<f64> = round
        .futures
        .iter()
        .flatten()
        .filter(|p| p.date >= round.start_date && p.date <= round.analysis_cutoff)
        .map(|p| pct_error(p.close, round.ground_truth))
        .collect();
    if errs.is_empty() {
        return Err(DatasetError::MissingFutures(round.round_id.clone()));
    }
    Ok(errs.iter().sum::<f64>() / errs.len() as f64)
}

/// `|V - P_start| / P_start`, where `P_start` is the last close on or before
/// the round's start date.
pub fn price_change(round: &Round) -> Result<f64, DatasetError> {
    let start = round
        .asset_history()
        .into_iter()
        .filter(|p| p.date <= round.start_date)
        .last()
        .ok_or_else(|| DatasetError::InsufficientHistory(round.round_id.clone()))?;
    Ok(pct_error(round.ground_truth, start.close))
}

pub fn summarize_round(round: &Round) -> Result<RoundSummary, DatasetError> {
    let futures_mean_error_pct = match futures_mean_error(round) {
        Ok(v) => Some(v),
        Err(DatasetError::MissingFutures(_)) => None,
        Err(e) => return Err(e),
    };
    Ok(RoundSummary {
        round_id: round.round_id.clone(),
        asset_symbol: round.asset_symbol.clone(),
        ground_truth: round.ground_truth,
        n_prediction_sets: round.n_analysis_sets(),
        price_change_pct: price_change(round)?,
        linear_extrapolation_error_pct: linear_extrapolation_error(round)?,
        crowd_mean_error_pct: crowd_mean_error(round, Phase::Post)?,
        futures_mean_error_pct,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::fixtures::*;
    use crate::dataset::PricePoint;

    const V: f64 = 2037.41;

    #[test]
    fn crowd_error_exact_and_symmetric() {
        let d = date(2016, 6, 6);
        let exact = round("r", V, vec![set("a", "r", d, 2000.0, V)]);
        assert_eq!(crowd_mean_error(&exact, Phase::Post).unwrap(), 0.0);
        let sym = round(
            "r",
            100.0,
            vec![set("a", "r", d, 1.0, 90.0), set("b", "r", d, 1.0, 110.0)],
        );
        assert!(crowd_mean_error(&sym, Phase::Post).unwrap().abs() < 1e-12);
        // pre phase uses b_pre = 1
        assert!((crowd_mean_error(&sym, Phase::Pre).unwrap() - 99.0).abs() < 1e-12);
    }

    #[test]
    fn crowd_error_ignores_last_week_and_errors_when_empty() {
        let late = round("r", V, vec![set("a", "r", date(2016, 6, 20), 1.0, 1.0)]);
        assert_eq!(crowd_mean_error(&late, Phase::Post), Err(DatasetError::EmptyRound("r".into())));
    }

    fn with_history(truth: f64, closes: &[f64]) -> Round {
        let mut s = set("a", "r", date(2016, 6, 17), 1.0, 1.0);
        s.price_history = history(date(2016, 6, 17) - Duration::days(closes.len() as i64 - 1), closes);
        round("r", truth, vec![s])
    }

    #[test]
    fn flat_history_extrapolates_flat() {
        let r = with_history(2000.0, &[2000.0; 30]);
        assert!(linear_extrapolation_error(&r).unwrap().abs() < 1e-12);
    }

    #[test]
    fn exact_line_hits_truth() {
        // close = 1500 + 2.5 * day; cutoff is the last day, end is 7 days later
        let closes: Vec<f64> = (0..120).map(|d| 1500.0 + 2.5 * d as f64).collect();
        let truth = 1500.0 + 2.5 * (119.0 + 7.0);
        let r = with_history(truth, &closes);
        let err = linear_extrapolation_error(&r).unwrap();
        assert!(err < 1e-9 * 100.0, "{err}");
    }

    #[test]
    fn only_six_months_used() {
        // an old regime beyond the window must not affect the fit
        let mut closes: Vec<f64> = vec![10.0; 200];
        closes.extend((0..200).map(|d| 100.0 + d as f64));
        let truth = 100.0 + 199.0 + 7.0;
        let r = with_history(truth, &closes);
        assert!(linear_extrapolation_error(&r).unwrap() < 1e-9);
    }

    #[test]
    fn extrapolation_needs_two_points() {
        let r = with_history(100.0, &[100.0]);
        assert_eq!(linear_extrapolation_error(&r), Err(DatasetError::InsufficientHistory("r".into())));
    }

    #[test]
    fn futures_error_mean_of_abs_devs() {
        let mut r = round("r", V, vec![]);
        r.futures = Some(vec![
            PricePoint { date: date(2016, 6, 2), close: V * 1.02 },
            PricePoint { date: date(2016, 6, 3), close: V * 0.98 },
            // outside the analysis window
            PricePoint { date: date(2016, 6, 22), close: V * 3.0 },
        ]);
        assert!((futures_mean_error(&r).unwrap() - 2.0).abs() < 1e-9);
        r.futures = Some(vec![PricePoint { date: date(2016, 6, 2), close: V }]);
        assert_eq!(futures_mean_error(&r).unwrap(), 0.0);
        r.futures = None;
        assert_eq!(futures_mean_error(&r), Err(DatasetError::MissingFutures("r".into())));
    }

    #[test]
    fn price_change_from_start_close() {
        let mut s = set("a", "r", date(2016, 6, 6), 1.0, 1.0);
        s.price_history = history(date(2016, 5, 31), &[99.0, 100.0, 104.0]);
        let r = round("r", 111.03, vec![s.clone()]);
        assert!((price_change(&r).unwrap() - 11.03).abs() < 1e-9);
        let r = round("r", 100.0, vec![s]);
        assert_eq!(price_change(&r).unwrap(), 0.0);
    }

    #[test]
    fn summary_leaves_futures_empty() {
        let r = with_history(2000.0, &[2000.0; 30]);
        let s = summarize_round(&r).unwrap();
        assert_eq!(s.futures_mean_error_pct, None);
        assert_eq!(s.n_prediction_sets, 1);
    }
}
