//! Discrete posterior over likelihood bins under a Gaussian prior.
//!
//! Bin `i` gets posterior weight proportional to `density_i * N(point_i;
//! prior_mean, prior_std)`. The exact posterior mean is the weighted average
//! of the bin points; a rejection sampler draws from the same posterior by
//! proposing bins from the likelihood and accepting with the prior density
//! relative to its largest value over the occupied bins.

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use serde::Serialize;

use super::distribution::PriceDistribution;
use super::ModelError;
use crate::seeds;

/// Prior densities below this at every occupied bin mean the prior and the
/// likelihood do not overlap.
pub const MIN_PRIOR_DENSITY: f64 = 1e-300;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NumericalPosterior {
    /// Normalised posterior weight per likelihood bin.
    pub weights: Vec<f64>,
    pub exact_mean: f64,
    pub sampled_mean: f64,
    pub acceptance_rate: f64,
    /// Standard error of `sampled_mean`.
    pub mc_std_error: f64,
    pub samples: Vec<f64>,
}

fn normal_pdf(x: f64, mean: f64, std: f64) -> f64 {
    let z = (x - mean) / std;
    (-0.5 * z * z).exp() / (std * (2.0 * std::f64::consts::PI).sqrt())
}

pub fn numerical_posterior(
    prior_mean: f64,
    prior_std: f64,
    likelihood: &PriceDistribution,
    n_samples: usize,
    seed: u64,
) -> Result<NumericalPosterior, ModelError> {
    if !(prior_std > 0.0 && prior_std.is_finite()) {
        return Err(ModelError::InvalidPriorStd(prior_std));
    }
    if n_samples == 0 {
        return Err(ModelError::InvalidArgument("n_samples must be at least 1".into()));
    }
    let occupied: Vec<usize> = (0..likelihood.n_bins()).filter(|&i| likelihood.densities[i] > 0.0).collect();
    if let [only] = occupied[..] {
        let mut weights = vec![0.0; likelihood.n_bins()];
        weights[only] = 1.0;
        let p = likelihood.points[only];
        return Ok(NumericalPosterior {
            weights,
            exact_mean: p,
            sampled_mean: p,
            acceptance_rate: 1.0,
            mc_std_error: 0.0,
            samples: vec![p; n_samples],
        });
    }
    if occupied
        .iter()
        .all(|&i| normal_pdf(likelihood.points[i], prior_mean, prior_std) < MIN_PRIOR_DENSITY)
    {
        return Err(ModelError::ZeroPosteriorMass);
    }

    // log-weights, shifted by their maximum to stay clear of underflow
    let log_prior = |x: f64| {
        let z = (x - prior_mean) / prior_std;
        -0.5 * z * z
    };
    let log_w: Vec<f64> = (0..likelihood.n_bins())
        .map(|i| {
            let d = likelihood.densities[i];
            if d > 0.0 {
                d.ln() + log_prior(likelihood.points[i])
            } else {
                f64::NEG_INFINITY
            }
        })
        .collect();
    let max_lw = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let raw: Vec<f64> = log_w.iter().map(|lw| (lw - max_lw).exp()).collect();
    let total: f64 = raw.iter().sum();
    let weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
    let exact_mean: f64 = weights.iter().zip(&likelihood.points).map(|(w, x)| w * x).sum();
    let posterior_var: f64 = weights
        .iter()
        .zip(&likelihood.points)
        .map(|(w, x)| w * (x - exact_mean) * (x - exact_mean))
        .sum();

    let max_log_prior = occupied
        .iter()
        .map(|&i| log_prior(likelihood.points[i]))
        .fold(f64::NEG_INFINITY, f64::max);
    let accept: Vec<f64> = likelihood
        .points
        .iter()
        .map(|&x| (log_prior(x) - max_log_prior).exp())
        .collect();
    let proposal = WeightedIndex::new(&likelihood.densities)
        .map_err(|e| ModelError::InvalidArgument(format!("likelihood densities: {e}")))?;
    let mut rng = seeds::rng(seed);
    let mut samples = Vec::with_capacity(n_samples);
    let mut proposals = 0u64;
    while samples.len() < n_samples {
        let i = proposal.sample(&mut rng);
        proposals += 1;
        if rng.gen::<f64>() < accept[i] {
            samples.push(likelihood.points[i]);
        }
    }
    let sampled_mean = samples.iter().sum::<f64>() / n_samples as f64;
    Ok(NumericalPosterior {
        weights,
        exact_mean,
        sampled_mean,
        acceptance_rate: n_samples as f64 / proposals as f64,
        mc_std_error: (posterior_var / n_samples as f64).sqrt(),
        samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::beliefmodels::distribution::{Binning, DistributionSource};

    fn dist(points: &[f64], densities: &[f64]) -> PriceDistribution {
        let mut edges = vec![points[0] - 0.5];
        edges.extend(points.iter().map(|p| p + 0.5));
        PriceDistribution {
            bin_edges: edges,
            points: points.to_vec(),
            densities: densities.to_vec(),
            source: DistributionSource::Social,
        }
    }

    #[test]
    fn single_bin_ignores_prior() {
        let d = PriceDistribution::point_mass(2073.0, DistributionSource::Social);
        let p = numerical_posterior(1500.0, 10.0, &d, 200, 1).unwrap();
        assert_eq!(p.exact_mean, 2073.0);
        assert_eq!(p.sampled_mean, 2073.0);
        assert_eq!(p.acceptance_rate, 1.0);
    }

    #[test]
    fn symmetric_uniform_likelihood_centres_on_prior() {
        let pts: Vec<f64> = (0..11).map(|i| 95.0 + i as f64).collect();
        let d = dist(&pts, &[1.0 / 11.0; 11]);
        let p = numerical_posterior(100.0, 3.0, &d, 20_000, 5).unwrap();
        assert!((p.exact_mean - 100.0).abs() < 1e-12);
        assert!((p.sampled_mean - 100.0).abs() < 4.0 * p.mc_std_error);
    }

    #[test]
    fn five_bins_sampled_within_three_se() {
        let d = dist(&[90.0, 95.0, 100.0, 105.0, 110.0], &[0.1, 0.3, 0.2, 0.25, 0.15]);
        let p = numerical_posterior(97.0, 6.0, &d, 50_000, 77).unwrap();
        // closed-form discrete oracle
        let w: Vec<f64> = d
            .points
            .iter()
            .zip(&d.densities)
            .map(|(x, q)| q * (-0.5 * ((x - 97.0) / 6.0f64).powi(2)).exp())
            .collect();
        let oracle = w.iter().zip(&d.points).map(|(a, b)| a * b).sum::<f64>() / w.iter().sum::<f64>();
        assert!((p.exact_mean - oracle).abs() < 1e-9);
        assert!((p.sampled_mean - oracle).abs() < 3.0 * p.mc_std_error);
        assert!((p.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn disjoint_supports_fail() {
        let d = dist(&[5000.0, 5001.0], &[0.5, 0.5]);
        assert_eq!(numerical_posterior(100.0, 1.0, &d, 10, 0), Err(ModelError::ZeroPosteriorMass));
    }

    #[test]
    fn prior_limits() {
        let h: Vec<f64> = vec![90.0, 92.0, 92.0, 99.0, 104.0, 104.0, 104.0, 111.0];
        let d = PriceDistribution::from_samples(&h, Binning::UniqueValues, DistributionSource::Social).unwrap();
        let like_mean = d.mean();
        let mut last_gap = f64::INFINITY;
        for std in [10.0, 100.0, 1_000.0, 10_000.0] {
            let gap = (numerical_posterior(100.0, std, &d, 1, 0).unwrap().exact_mean - like_mean).abs();
            assert!(gap <= last_gap);
            last_gap = gap;
        }
        assert!(last_gap < 1e-3);
        // nearest occupied bin to the prior mean is 99
        let mut last_gap = f64::INFINITY;
        for std in [3.0, 1.0, 0.3, 0.1] {
            let gap = (numerical_posterior(100.0, std, &d, 1, 0).unwrap().exact_mean - 99.0).abs();
            assert!(gap <= last_gap);
            last_gap = gap;
        }
        assert!(last_gap < 1e-9);
    }

    #[test]
    fn bad_prior_std() {
        let d = dist(&[1.0, 2.0], &[0.5, 0.5]);
        assert!(matches!(numerical_posterior(1.0, 0.0, &d, 1, 0), Err(ModelError::InvalidPriorStd(_))));
    }
}
