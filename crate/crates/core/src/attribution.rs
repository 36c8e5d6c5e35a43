//! Social-learning attribution.
//!
//! For each prediction set, `epsilon_h` and `epsilon_t` are the absolute
//! relative residuals of the GaussianSocial and GaussianPrice models against
//! the revised belief, and `alpha = epsilon_t - epsilon_h`. Positive alpha
//! means the revision is better explained by the social histogram. Alphas
//! are rescaled into [-1, 1] per round by the round's largest |alpha|, which
//! keeps the sign and keeps zero at zero.

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::beliefmodels::{gaussian_price, gaussian_social, residual, ModelError, MonteCarloConfig};
use crate::dataset::{Horizon, PredictionSet, Round};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AttributionError {
    #[error("prediction set {set_id}: {source}")]
    Model { set_id: String, source: ModelError },
    #[error("need at least {needed} alpha records, got {got}")]
    TooFewRecords { got: usize, needed: usize },
    #[error("invalid alpha grid: {0}")]
    InvalidGrid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlphaRecord {
    pub prediction_set_id: String,
    pub round_id: String,
    pub epsilon_h: f64,
    pub epsilon_t: f64,
    pub alpha_raw: f64,
    pub alpha_scaled: f64,
}

/// `(epsilon_h, epsilon_t)` for one set.
pub fn compute_epsilons(set: &PredictionSet, horizon_days: u32, mc: &MonteCarloConfig) -> Result<(f64, f64), ModelError> {
    let social = gaussian_social(set)?;
    let price = gaussian_price(set, horizon_days, mc)?;
    Ok((residual(&social, set.b_post).abs(), residual(&price, set.b_post).abs()))
}

/// Divides each alpha by the largest |alpha| among `records`. All-zero
/// input stays all zero.
pub fn rescale_alphas(records: &mut [AlphaRecord]) {
    let max_abs = records.iter().map(|r| r.alpha_raw.abs()).fold(0.0, f64::max);
    for r in records.iter_mut() {
        r.alpha_scaled = if max_abs > 0.0 { r.alpha_raw / max_abs } else { 0.0 };
    }
}

/// Alpha records for the sets in the round's analysis window, rescaled
/// within the round, in the round's set order. Sets that show no peer
/// predictions or too little price history have no alpha and are left out.
pub fn round_alpha_records(round: &Round, horizon: Horizon, mc: &MonteCarloConfig) -> Result<Vec<AlphaRecord>, AttributionError> {
    let sets: Vec<&PredictionSet> = round.analysis_sets().collect();
    let scored = sets
        .par_iter()
        .map(|set| match compute_epsilons(set, horizon.days(round, set), mc) {
            Ok((epsilon_h, epsilon_t)) => Ok(Some(AlphaRecord {
                prediction_set_id: set.id.clone(),
                round_id: round.round_id.clone(),
                epsilon_h,
                epsilon_t,
                alpha_raw: epsilon_t - epsilon_h,
                alpha_scaled: 0.0,
            })),
            Err(ModelError::EmptyHistogram | ModelError::InsufficientHistory { .. }) => Ok(None),
            Err(source) => Err(AttributionError::Model { set_id: set.id.clone(), source }),
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut records: Vec<AlphaRecord> = scored.into_iter().flatten().collect();
    rescale_alphas(&mut records);
    Ok(records)
}

pub fn alpha_records(rounds: &[Round], horizon: Horizon, mc: &MonteCarloConfig) -> Result<Vec<AlphaRecord>, AttributionError> {
    let per_round = rounds
        .iter()
        .map(|r| round_alpha_records(r, horizon, mc))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(per_round.into_iter().flatten().collect())
}

/// Ordered one-sided subset boundaries `alpha_s`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlphaGrid {
    pub boundaries: Vec<f64>,
}

pub const DEFAULT_GRID_BINS: usize = 15;

impl AlphaGrid {
    pub fn new(mut boundaries: Vec<f64>) -> Result<Self, AttributionError> {
        if boundaries.is_empty() {
            return Err(AttributionError::InvalidGrid("no boundaries".into()));
        }
        if let Some(b) = boundaries.iter().find(|b| !(-1.0..=1.0).contains(*b)) {
            return Err(AttributionError::InvalidGrid(format!("{b} outside [-1, 1]")));
        }
        boundaries.sort_by(f64::total_cmp);
        boundaries.dedup();
        Ok(AlphaGrid { boundaries })
    }

    /// `n` evenly spaced values from -1 to 1.
    pub fn linspace(n: usize) -> Result<Self, AttributionError> {
        match n {
            0 => Err(AttributionError::InvalidGrid("no boundaries".into())),
            1 => Self::new(vec![1.0]),
            _ => Self::new((0..n).map(|i| -1.0 + 2.0 * i as f64 / (n - 1) as f64).collect()),
        }
    }
}

/// Equal-count grid over the pooled scaled alphas: the `n_bins + 1` quantile
/// edges, with the outer edges pinned to -1 and +1.
pub fn build_alpha_grid(records: &[AlphaRecord], n_bins: usize) -> Result<AlphaGrid, AttributionError> {
    if n_bins == 0 || records.len() < n_bins {
        return Err(AttributionError::TooFewRecords { got: records.len(), needed: n_bins.max(1) });
    }
    let mut a: Vec<f64> = records.iter().map(|r| r.alpha_scaled).collect();
    a.sort_by(f64::total_cmp);
    let last = (a.len() - 1) as f64;
    let mut edges: Vec<f64> = (0..=n_bins)
        .map(|k| {
            // linear interpolation between order statistics
            let pos = k as f64 / n_bins as f64 * last;
            let lo = pos.floor() as usize;
            let hi = pos.ceil() as usize;
            a[lo] + (a[hi] - a[lo]) * (pos - lo as f64)
        })
        .collect();
    edges[0] = -1.0;
    edges[n_bins] = 1.0;
    AlphaGrid::new(edges)
}

/// Whether a scaled alpha falls in the one-sided subset for `alpha_s`:
/// `0 <= a < alpha_s` for positive boundaries, `alpha_s < a <= 0` for
/// negative ones, the outer endpoint included at `|alpha_s| = 1`, and
/// exactly zero for `alpha_s = 0`.
pub fn in_subset(alpha_scaled: f64, alpha_s: f64) -> bool {
    if alpha_s > 0.0 {
        alpha_scaled >= 0.0 && (alpha_scaled < alpha_s || (alpha_s >= 1.0 && alpha_scaled <= 1.0))
    } else if alpha_s < 0.0 {
        alpha_scaled <= 0.0 && (alpha_scaled > alpha_s || (alpha_s <= -1.0 && alpha_scaled >= -1.0))
    } else {
        alpha_scaled == 0.0
    }
}

pub fn select_subset(records: &[AlphaRecord], alpha_s: f64) -> Vec<String> {
    records
        .iter()
        .filter(|r| in_subset(r.alpha_scaled, alpha_s))
        .map(|r| r.prediction_set_id.clone())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rec(id: &str, raw: f64) -> AlphaRecord {
        AlphaRecord {
            prediction_set_id: id.into(),
            round_id: "r".into(),
            epsilon_h: 0.0,
            epsilon_t: raw.max(0.0),
            alpha_raw: raw,
            alpha_scaled: raw,
        }
    }

    #[test]
    fn rescale_by_max_abs() {
        let mut rs = vec![rec("a", -2.0), rec("b", 1.0), rec("c", 4.0)];
        rescale_alphas(&mut rs);
        let got: Vec<f64> = rs.iter().map(|r| r.alpha_scaled).collect();
        assert_eq!(got, vec![-0.5, 0.25, 1.0]);
        let mut zeros = vec![rec("a", 0.0), rec("b", 0.0)];
        rescale_alphas(&mut zeros);
        assert!(zeros.iter().all(|r| r.alpha_scaled == 0.0));
    }

    #[test]
    fn epsilons_from_model_outputs() {
        use crate::dataset::fixtures::{date, history, set};
        // GaussianSocial = (100 + 120) / 2 = 110, GaussianPrice = (100 + 80) / 2 = 90
        let mut s = set("p", "r", date(2016, 6, 3), 100.0, 100.0);
        s.social_histogram = vec![120.0];
        s.price_history = history(date(2016, 1, 1), &[80.0; 30]);
        let (h, t) = compute_epsilons(&s, 5, &MonteCarloConfig::default()).unwrap();
        assert!((h - 0.10).abs() < 1e-15 && (t - 0.10).abs() < 1e-15);
        s.b_post = 110.0;
        assert_eq!(compute_epsilons(&s, 5, &MonteCarloConfig::default()).unwrap().0, 0.0);
    }

    #[test]
    fn grid_on_uniform_alphas() {
        let rs: Vec<AlphaRecord> =
            (0..150).map(|i| rec(&i.to_string(), -1.0 + 2.0 * i as f64 / 149.0)).collect();
        let g = build_alpha_grid(&rs, 15).unwrap();
        assert_eq!(g.boundaries.len(), 16);
        for (k, b) in g.boundaries.iter().enumerate() {
            assert!((b - (-1.0 + 2.0 * k as f64 / 15.0)).abs() < 1e-12, "{k}: {b}");
        }
        assert_eq!(build_alpha_grid(&rs, 1).unwrap().boundaries, vec![-1.0, 1.0]);
        assert!(matches!(build_alpha_grid(&rs[..3], 4), Err(AttributionError::TooFewRecords { .. })));
    }

    #[test]
    fn linspace_grid_rounds_to_published_values() {
        let g = AlphaGrid::linspace(15).unwrap();
        let rounded: Vec<f64> = g.boundaries.iter().map(|b| (b * 10.0).round() / 10.0).collect();
        let published = [-1.0, -0.9, -0.7, -0.6, -0.4, -0.3, -0.1, 0.0, 0.1, 0.3, 0.4, 0.6, 0.7, 0.9, 1.0];
        assert_eq!(rounded, published);
    }

    #[test]
    fn subset_membership() {
        let rs = vec![rec("a", -0.5), rec("b", 0.2), rec("c", 0.7), rec("z", 0.0), rec("one", 1.0), rec("neg", -1.0)];
        assert_eq!(select_subset(&rs[..3], 0.5), vec!["b"]);
        assert_eq!(select_subset(&rs, 1.0), vec!["b", "c", "z", "one"]);
        assert_eq!(select_subset(&rs, -1.0), vec!["a", "z", "neg"]);
        assert_eq!(select_subset(&rs, 0.0), vec!["z"]);
        assert_eq!(select_subset(&rs, -0.5), vec!["z"]);
    }

    proptest! {
        #[test]
        fn nested_subsets(alphas in prop::collection::vec(-1.0f64..=1.0, 1..60), a in 0.001f64..1.0, b in 0.001f64..1.0) {
            let rs: Vec<_> = alphas.iter().enumerate().map(|(i, &x)| rec(&i.to_string(), x)).collect();
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            for sign in [1.0, -1.0] {
                let small = select_subset(&rs, sign * lo);
                let big = select_subset(&rs, sign * hi);
                prop_assert!(small.iter().all(|id| big.contains(id)));
            }
        }

        #[test]
        fn full_sides_cover_everything(alphas in prop::collection::vec(-1.0f64..=1.0, 1..60)) {
            let rs: Vec<_> = alphas.iter().enumerate().map(|(i, &x)| rec(&i.to_string(), x)).collect();
            let pos = select_subset(&rs, 1.0);
            let neg = select_subset(&rs, -1.0);
            for r in &rs {
                let in_pos = pos.contains(&r.prediction_set_id);
                let in_neg = neg.contains(&r.prediction_set_id);
                prop_assert!(in_pos || in_neg);
                prop_assert_eq!(in_pos && in_neg, r.alpha_scaled == 0.0);
            }
        }

        #[test]
        fn rescaling_is_scale_equivariant(raws in prop::collection::vec(-5.0f64..5.0, 1..40), k in 0.01f64..100.0) {
            let mut a: Vec<_> = raws.iter().enumerate().map(|(i, &x)| rec(&i.to_string(), x)).collect();
            let mut b: Vec<_> = raws.iter().enumerate().map(|(i, &x)| rec(&i.to_string(), x * k)).collect();
            rescale_alphas(&mut a);
            rescale_alphas(&mut b);
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x.alpha_scaled - y.alpha_scaled).abs() < 1e-12);
                prop_assert!((-1.0..=1.0).contains(&x.alpha_scaled));
                prop_assert_eq!(x.alpha_scaled.signum() * (x.alpha_scaled != 0.0) as i32 as f64,
                                x.alpha_raw.signum() * (x.alpha_raw != 0.0) as i32 as f64);
            }
            if raws.iter().any(|&r| r != 0.0) {
                let m = a.iter().map(|r| r.alpha_scaled.abs()).fold(0.0, f64::max);
                prop_assert_eq!(m, 1.0);
            }
        }
    }
}
