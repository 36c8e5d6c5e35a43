//! Belief-update models.
//!
//! Each model maps a prediction set (pre-exposure belief plus the information
//! shown) to a modelled post-exposure belief. The two Gaussian models are
//! closed forms: with equal information content for the prior and the
//! evidence, the posterior mean is the midpoint of the pre-exposure belief
//! and the evidence mean. The numerical models replace the Gaussian evidence
//! with the binned evidence distribution itself.

mod dip;
mod distribution;
mod fit;
mod posterior;
mod rates;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use dip::{dip_sorted, dip_statistic, dip_test, dip_test_with_null, DipNull, DipNullCache, DipResult, MIN_DIP_SAMPLES};
pub use distribution::{social_histogram_distribution, Binning, DistributionSource, PriceDistribution};
pub use fit::{residual_table, round_residuals, FitError, ResidualRow};
pub use posterior::{numerical_posterior, NumericalPosterior, MIN_PRIOR_DENSITY};
pub use rates::{daily_rates, rates_histogram, rates_terminal_prices};

use crate::dataset::PredictionSet;
use crate::seeds::{self, tag};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("social histogram is empty")]
    EmptyHistogram,
    #[error("price history has {points} points, need at least 2")]
    InsufficientHistory { points: usize },
    #[error("daily rate {rate} at index {index} is not below 1")]
    DegenerateRate { index: usize, rate: f64 },
    #[error("prior and likelihood have no overlapping mass")]
    ZeroPosteriorMass,
    #[error("prior standard deviation must be positive, got {0}")]
    InvalidPriorStd(f64),
    #[error("dip test needs at least {needed} samples, got {got}")]
    TooFewSamples { got: usize, needed: usize },
    #[error("{0}")]
    InvalidArgument(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ModelKind {
    GaussianSocial,
    GaussianSocialModes,
    NumericalSocial,
    NumericalPrice,
    GaussianPrice,
    DeGroot,
}

impl ModelKind {
    pub const ALL: [ModelKind; 6] = [
        ModelKind::GaussianSocial,
        ModelKind::GaussianSocialModes,
        ModelKind::NumericalSocial,
        ModelKind::NumericalPrice,
        ModelKind::GaussianPrice,
        ModelKind::DeGroot,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::GaussianSocial => "GaussianSocial",
            ModelKind::GaussianSocialModes => "GaussianSocialModes",
            ModelKind::NumericalSocial => "NumericalSocial",
            ModelKind::NumericalPrice => "NumericalPrice",
            ModelKind::GaussianPrice => "GaussianPrice",
            ModelKind::DeGroot => "DeGroot",
        }
    }
}

/// Which mean the numerical models report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PosteriorMethod {
    /// Weighted average over the posterior bins.
    ExactBins,
    /// Mean of the rejection-sampled draws.
    RejectionSampling,
}

/// What the price-history models use as evidence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PriceEvidence {
    /// Rates histogram extrapolated to the round's end.
    RatesExtrapolated,
    /// Plain mean of the closes shown. Kept for sensitivity analysis.
    HistoryMean,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MonteCarloConfig {
    pub n_paths: usize,
    pub n_samples: usize,
    pub seed: u64,
    pub rates_bins: usize,
    pub social_max_bins: usize,
    pub dip_null: usize,
    pub dip_alpha: f64,
    pub posterior_method: PosteriorMethod,
    pub price_evidence: PriceEvidence,
    pub retain_samples: bool,
}

impl Default for MonteCarloConfig {
    fn default() -> Self {
        MonteCarloConfig {
            n_paths: 2000,
            n_samples: 1000,
            seed: 0,
            rates_bins: 50,
            social_max_bins: 50,
            dip_null: 2000,
            dip_alpha: dip::DEFAULT_SIGNIFICANCE,
            posterior_method: PosteriorMethod::ExactBins,
            price_evidence: PriceEvidence::RatesExtrapolated,
            retain_samples: false,
        }
    }
}

impl MonteCarloConfig {
    pub fn social_binning(&self) -> Binning {
        Binning::Auto { max_bins: self.social_max_bins }
    }

    fn set_seed(&self, set: &PredictionSet, purpose: u64) -> u64 {
        seeds::derive(self.seed, &[seeds::hash_str(&set.id), purpose])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostics {
    pub acceptance_rate: f64,
    pub exact_mean: f64,
    pub sampled_mean: f64,
    pub mc_std_error: f64,
    /// Bound on `|mean - sampled_mean|` expected from Monte Carlo error.
    pub mc_tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PosteriorEstimate {
    pub model: ModelKind,
    pub mean: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diagnostics: Option<Diagnostics>,
}

impl PosteriorEstimate {
    fn closed_form(model: ModelKind, mean: f64) -> Self {
        PosteriorEstimate { model, mean, samples: None, diagnostics: None }
    }
}

/// Signed relative residual `(mu - b_post) / b_post`.
pub fn residual(posterior: &PosteriorEstimate, b_post: f64) -> f64 {
    (posterior.mean - b_post) / b_post
}

fn histogram_mean(set: &PredictionSet) -> Result<f64, ModelError> {
    if set.social_histogram.is_empty() {
        return Err(ModelError::EmptyHistogram);
    }
    Ok(crate::stats::mean(&set.social_histogram))
}

pub fn gaussian_social(set: &PredictionSet) -> Result<PosteriorEstimate, ModelError> {
    let evidence = histogram_mean(set)?;
    Ok(PosteriorEstimate::closed_form(ModelKind::GaussianSocial, (set.b_pre + evidence) / 2.0))
}

/// Evidence distribution built from the price history shown with `set`.
pub fn price_likelihood(set: &PredictionSet, horizon_days: u32, mc: &MonteCarloConfig) -> Result<PriceDistribution, ModelError> {
    rates_histogram(
        &set.price_history,
        horizon_days,
        mc.n_paths,
        mc.rates_bins,
        mc.set_seed(set, tag::RATES),
    )
}

pub fn gaussian_price(set: &PredictionSet, horizon_days: u32, mc: &MonteCarloConfig) -> Result<PosteriorEstimate, ModelError> {
    let evidence = match mc.price_evidence {
        PriceEvidence::RatesExtrapolated => price_likelihood(set, horizon_days, mc)?.mean(),
        PriceEvidence::HistoryMean => {
            if set.price_history.len() < 2 {
                return Err(ModelError::InsufficientHistory { points: set.price_history.len() });
            }
            crate::stats::mean(&set.history_closes())
        }
    };
    Ok(PosteriorEstimate::closed_form(ModelKind::GaussianPrice, (set.b_pre + evidence) / 2.0))
}

/// Evidence is the largest mode of the social histogram when the dip test
/// rejects unimodality, the histogram mean otherwise.
pub fn gaussian_social_modes(set: &PredictionSet, mc: &MonteCarloConfig, nulls: &DipNullCache) -> Result<PosteriorEstimate, ModelError> {
    let mean = histogram_mean(set)?;
    let h = &set.social_histogram;
    let multimodal = if h.len() < MIN_DIP_SAMPLES {
        false
    } else {
        let null = nulls.get(h.len(), mc.dip_null, seeds::derive(mc.seed, &[tag::DIP_NULL]));
        null.p_value(dip_statistic(h)) < mc.dip_alpha
    };
    let evidence = if multimodal { largest_mode(h, mc.social_binning(), mean)? } else { mean };
    Ok(PosteriorEstimate::closed_form(ModelKind::GaussianSocialModes, (set.b_pre + evidence) / 2.0))
}

/// Point of the highest-mass bin; ties go to the bin closest to `mean`.
pub fn largest_mode(histogram: &[f64], binning: Binning, mean: f64) -> Result<f64, ModelError> {
    let d = social_histogram_distribution(histogram, binning)?;
    let best = (0..d.n_bins())
        .max_by(|&a, &b| {
            d.densities[a]
                .total_cmp(&d.densities[b])
                .then_with(|| (d.points[b] - mean).abs().total_cmp(&(d.points[a] - mean).abs()))
        })
        .expect("at least one bin");
    Ok(d.points[best])
}

fn numerical_from_likelihood(
    model: ModelKind,
    set: &PredictionSet,
    likelihood: &PriceDistribution,
    prior_std: f64,
    mc: &MonteCarloConfig,
    seed: u64,
) -> Result<PosteriorEstimate, ModelError> {
    if let Some(point) = likelihood.single_point() {
        // all evidence agrees; the prior cannot move the posterior off it
        let samples = mc.retain_samples.then(|| vec![point; mc.n_samples]);
        return Ok(PosteriorEstimate {
            model,
            mean: point,
            samples,
            diagnostics: Some(Diagnostics {
                acceptance_rate: 1.0,
                exact_mean: point,
                sampled_mean: point,
                mc_std_error: 0.0,
                mc_tolerance: 0.0,
            }),
        });
    }
    let post = numerical_posterior(set.b_pre, prior_std, likelihood, mc.n_samples, seed)?;
    let mean = match mc.posterior_method {
        PosteriorMethod::ExactBins => post.exact_mean,
        PosteriorMethod::RejectionSampling => post.sampled_mean,
    };
    Ok(PosteriorEstimate {
        model,
        mean,
        diagnostics: Some(Diagnostics {
            acceptance_rate: post.acceptance_rate,
            exact_mean: post.exact_mean,
            sampled_mean: post.sampled_mean,
            mc_std_error: post.mc_std_error,
            mc_tolerance: 5.0 * post.mc_std_error,
        }),
        samples: mc.retain_samples.then_some(post.samples),
    })
}

/// Prior `N(b_pre, std(histogram))`, likelihood the binned histogram.
pub fn numerical_social(set: &PredictionSet, mc: &MonteCarloConfig) -> Result<PosteriorEstimate, ModelError> {
    let likelihood = social_histogram_distribution(&set.social_histogram, mc.social_binning())?;
    let prior_std = crate::stats::std_dev(&set.social_histogram, 0);
    numerical_from_likelihood(
        ModelKind::NumericalSocial,
        set,
        &likelihood,
        prior_std,
        mc,
        mc.set_seed(set, tag::POSTERIOR_SOCIAL),
    )
}

/// Prior `N(b_pre, std(rates distribution))`, likelihood the rates histogram.
pub fn numerical_price(set: &PredictionSet, horizon_days: u32, mc: &MonteCarloConfig) -> Result<PosteriorEstimate, ModelError> {
    let likelihood = price_likelihood(set, horizon_days, mc)?;
    let prior_std = likelihood.std_dev();
    numerical_from_likelihood(
        ModelKind::NumericalPrice,
        set,
        &likelihood,
        prior_std,
        mc,
        mc.set_seed(set, tag::POSTERIOR_PRICE),
    )
}

/// Equal-weight average of the peers and the forecaster's own prior belief.
pub fn degroot(set: &PredictionSet) -> Result<PosteriorEstimate, ModelError> {
    degroot_weighted(set, 1.0)
}

/// DeGroot update where the forecaster's own belief carries `self_weight`
/// and each peer weight one.
pub fn degroot_weighted(set: &PredictionSet, self_weight: f64) -> Result<PosteriorEstimate, ModelError> {
    if set.social_histogram.is_empty() {
        return Err(ModelError::EmptyHistogram);
    }
    let peers: f64 = set.social_histogram.iter().sum();
    let total_weight = self_weight + set.social_histogram.len() as f64;
    Ok(PosteriorEstimate::closed_form(
        ModelKind::DeGroot,
        (self_weight * set.b_pre + peers) / total_weight,
    ))
}

/// Shared state for evaluating models over many sets.
#[derive(Debug, Default)]
pub struct ModelContext {
    pub mc: MonteCarloConfig,
    pub dip_nulls: DipNullCache,
}

impl ModelContext {
    pub fn new(mc: MonteCarloConfig) -> Self {
        ModelContext { mc, dip_nulls: DipNullCache::new() }
    }

    pub fn evaluate(&self, model: ModelKind, set: &PredictionSet, horizon_days: u32) -> Result<PosteriorEstimate, ModelError> {
        match model {
            ModelKind::GaussianSocial => gaussian_social(set),
            ModelKind::GaussianPrice => gaussian_price(set, horizon_days, &self.mc),
            ModelKind::GaussianSocialModes => gaussian_social_modes(set, &self.mc, &self.dip_nulls),
            ModelKind::NumericalSocial => numerical_social(set, &self.mc),
            ModelKind::NumericalPrice => numerical_price(set, horizon_days, &self.mc),
            ModelKind::DeGroot => degroot(set),
        }
    }
}
