use serde::{Deserialize, Serialize};

use super::ModelError;

/// Relative width given to a bin whose members are all identical.
pub const POINT_MASS_REL_WIDTH: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DistributionSource {
    Social,
    Rates,
}

/// How raw prices are grouped into bins.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Binning {
    /// One bin per distinct value while there are at most `max_bins` of them,
    /// otherwise `max_bins` equal-width bins.
    Auto { max_bins: usize },
    EqualWidth(usize),
    UniqueValues,
}

/// A binned probability distribution over prices.
///
/// `points[i]` is the representative price of bin `i`: the exact value for
/// distinct-value bins, and the mean of the members for equal-width bins
/// (the bin centre when empty). With that choice the distribution mean equals
/// the mean of the binned samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceDistribution {
    pub bin_edges: Vec<f64>,
    pub points: Vec<f64>,
    /// Probability mass per bin; sums to one.
    pub densities: Vec<f64>,
    pub source: DistributionSource,
}

impl PriceDistribution {
    pub fn point_mass(price: f64, source: DistributionSource) -> Self {
        let half = 0.5 * POINT_MASS_REL_WIDTH * price;
        PriceDistribution {
            bin_edges: vec![price - half, price + half],
            points: vec![price],
            densities: vec![1.0],
            source,
        }
    }

    pub fn from_samples(samples: &[f64], binning: Binning, source: DistributionSource) -> Result<Self, ModelError> {
        if samples.is_empty() {
            return Err(ModelError::EmptyHistogram);
        }
        match binning {
            Binning::UniqueValues => Ok(unique_value_bins(samples, source)),
            Binning::EqualWidth(n) => equal_width_bins(samples, n, source),
            Binning::Auto { max_bins } => {
                if count_unique(samples) <= max_bins {
                    Ok(unique_value_bins(samples, source))
                } else {
                    equal_width_bins(samples, max_bins, source)
                }
            }
        }
    }

    pub fn n_bins(&self) -> usize {
        self.densities.len()
    }

    pub fn mean(&self) -> f64 {
        self.points.iter().zip(&self.densities).map(|(x, p)| x * p).sum()
    }

    /// Standard deviation of the binned distribution.
    pub fn std_dev(&self) -> f64 {
        let m = self.mean();
        self.points
            .iter()
            .zip(&self.densities)
            .map(|(x, p)| p * (x - m) * (x - m))
            .sum::<f64>()
            .sqrt()
    }

    /// The representative price when all mass sits in one bin.
    pub fn single_point(&self) -> Option<f64> {
        let mut occupied = self.densities.iter().zip(&self.points).filter(|(d, _)| **d > 0.0);
        match (occupied.next(), occupied.next()) {
            (Some((_, &x)), None) => Some(x),
            _ => None,
        }
    }
}

fn sorted(samples: &[f64]) -> Vec<f64> {
    let mut v = samples.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

fn count_unique(samples: &[f64]) -> usize {
    let v = sorted(samples);
    1 + v.windows(2).filter(|w| w[0] != w[1]).count()
}

fn unique_value_bins(samples: &[f64], source: DistributionSource) -> PriceDistribution {
    let v = sorted(samples);
    let mut points: Vec<f64> = Vec::new();
    let mut counts: Vec<usize> = Vec::new();
    for x in v {
        if points.last() == Some(&x) {
            *counts.last_mut().unwrap() += 1;
        } else {
            points.push(x);
            counts.push(1);
        }
    }
    if points.len() == 1 {
        return PriceDistribution::point_mass(points[0], source);
    }
    let k = points.len();
    let mut edges = Vec::with_capacity(k + 1);
    let first_gap = points[1] - points[0];
    edges.push((points[0] - 0.5 * first_gap).max(0.5 * points[0]));
    edges.extend(points.windows(2).map(|w| 0.5 * (w[0] + w[1])));
    edges.push(points[k - 1] + 0.5 * (points[k - 1] - points[k - 2]));
    let total = samples.len() as f64;
    PriceDistribution {
        bin_edges: edges,
        points,
        densities: counts.into_iter().map(|c| c as f64 / total).collect(),
        source,
    }
}

fn equal_width_bins(samples: &[f64], n_bins: usize, source: DistributionSource) -> Result<PriceDistribution, ModelError> {
    if n_bins == 0 {
        return Err(ModelError::InvalidArgument("bin count must be at least 1".into()));
    }
    let lo = samples.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if lo == hi {
        return Ok(PriceDistribution::point_mass(lo, source));
    }
    let width = (hi - lo) / n_bins as f64;
    let edges: Vec<f64> = (0..=n_bins)
        .map(|i| if i == n_bins { hi } else { lo + width * i as f64 })
        .collect();
    let mut counts = vec![0usize; n_bins];
    let mut sums = vec![0.0; n_bins];
    for &x in samples {
        let i = (((x - lo) / width) as usize).min(n_bins - 1);
        counts[i] += 1;
        sums[i] += x;
    }
    let total = samples.len() as f64;
    let points = (0..n_bins)
        .map(|i| {
            if counts[i] > 0 {
                sums[i] / counts[i] as f64
            } else {
                0.5 * (edges[i] + edges[i + 1])
            }
        })
        .collect();
    Ok(PriceDistribution {
        bin_edges: edges,
        points,
        densities: counts.iter().map(|&c| c as f64 / total).collect(),
        source,
    })
}

/// Bins the peer predictions shown to a forecaster.
pub fn social_histogram_distribution(histogram: &[f64], binning: Binning) -> Result<PriceDistribution, ModelError> {
    PriceDistribution::from_samples(histogram, binning, DistributionSource::Social)
}
