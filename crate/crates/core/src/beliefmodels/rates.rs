//! Rates-histogram extrapolation of a price history.
//!
//! Daily rates are `r_t = (B_t - B_{t-1}) / B_t`, so `B_t = B_{t-1} / (1 - r_t)`.
//! Future paths resample the empirical rates with replacement and compound
//! forward from the last close with that same multiplier.

use rand::Rng;

use super::distribution::{Binning, DistributionSource, PriceDistribution};
use super::ModelError;
use crate::dataset::PricePoint;
use crate::seeds;

pub fn daily_rates(closes: &[f64]) -> Result<Vec<f64>, ModelError> {
    if closes.len() < 2 {
        return Err(ModelError::InsufficientHistory { points: closes.len() });
    }
    let rates: Vec<f64> = closes.windows(2).map(|w| (w[1] - w[0]) / w[1]).collect();
    if let Some((index, &rate)) = rates.iter().enumerate().find(|(_, r)| **r >= 1.0 || !r.is_finite()) {
        return Err(ModelError::DegenerateRate { index, rate });
    }
    Ok(rates)
}

/// Simulated closes `horizon_days` ahead, one per path.
pub fn rates_terminal_prices(closes: &[f64], horizon_days: u32, n_paths: usize, seed: u64) -> Result<Vec<f64>, ModelError> {
    let rates = daily_rates(closes)?;
    if horizon_days == 0 || n_paths == 0 {
        return Err(ModelError::InvalidArgument("horizon_days and n_paths must be at least 1".into()));
    }
    let multipliers: Vec<f64> = rates.iter().map(|r| 1.0 / (1.0 - r)).collect();
    let last = *closes.last().expect("checked length");
    let mut rng = seeds::rng(seed);
    Ok((0..n_paths)
        .map(|_| {
            (0..horizon_days).fold(last, |price, _| price * multipliers[rng.gen_range(0..multipliers.len())])
        })
        .collect())
}

/// Distribution of prices `horizon_days` after the last close, binned into
/// `n_bins` equal-width bins.
pub fn rates_histogram(
    price_history: &[PricePoint],
    horizon_days: u32,
    n_paths: usize,
    n_bins: usize,
    seed: u64,
) -> Result<PriceDistribution, ModelError> {
    let closes: Vec<f64> = price_history.iter().map(|p| p.close).collect();
    let terminal = rates_terminal_prices(&closes, horizon_days, n_paths, seed)?;
    PriceDistribution::from_samples(&terminal, Binning::EqualWidth(n_bins), DistributionSource::Rates)
}
