//! Small descriptive-statistics helpers shared across modules.

use statrs::distribution::{ContinuousCDF, StudentsT};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("confidence level {0} outside (0, 1)")]
    InvalidLevel(f64),
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Standard deviation with `n - ddof` in the denominator.
pub fn std_dev(xs: &[f64], ddof: usize) -> f64 {
    if xs.len() <= ddof {
        return 0.0;
    }
    let m = mean(xs);
    let ss: f64 = xs.iter().map(|x| (x - m) * (x - m)).sum();
    (ss / (xs.len() - ddof) as f64).sqrt()
}

/// Student-t confidence interval for the mean: `mean ± t * s / sqrt(n)`, with
/// `t` taken at `n - 1` degrees of freedom and `s` the population standard
/// deviation of the samples.
pub fn t_confidence_interval(samples: &[f64], level: f64) -> Result<(f64, f64), StatsError> {
    let half = t_half_width(samples, level)?;
    let m = mean(samples);
    Ok((m - half, m + half))
}

pub fn t_half_width(samples: &[f64], level: f64) -> Result<f64, StatsError> {
    if samples.len() < 2 {
        return Err(StatsError::TooFewSamples {
            needed: 2,
            got: samples.len(),
        });
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(StatsError::InvalidLevel(level));
    }
    let n = samples.len() as f64;
    let se = std_dev(samples, 0) / n.sqrt();
    if se == 0.0 {
        return Ok(0.0);
    }
    Ok(t_quantile(1.0 - (1.0 - level) / 2.0, n - 1.0) * se)
}

pub fn t_quantile(p: f64, dof: f64) -> f64 {
    StudentsT::new(0.0, 1.0, dof)
        .expect("dof is positive")
        .inverse_cdf(p)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_samples_collapse() {
        let (lo, hi) = t_confidence_interval(&[3.5; 6], 0.95).unwrap();
        assert_eq!((lo, hi), (3.5, 3.5));
    }

    #[test]
    fn one_dof_table_value() {
        // t_{0.975, 1} = 12.7062 from standard tables
        let half = t_half_width(&[-1.0, 1.0], 0.95).unwrap();
        assert!((half - 12.7062 / 2f64.sqrt()).abs() < 1e-3, "{half}");
    }

    #[test]
    fn larger_dof_table_values() {
        assert!((t_quantile(0.975, 10.0) - 2.2281).abs() < 1e-4);
        assert!((t_quantile(0.975, 99.0) - 1.9842).abs() < 1e-4);
    }

    #[test]
    fn rejects_single_sample_and_bad_level() {
        assert!(matches!(
            t_confidence_interval(&[1.0], 0.95),
            Err(StatsError::TooFewSamples { .. })
        ));
        assert!(matches!(
            t_confidence_interval(&[1.0, 2.0], 1.0),
            Err(StatsError::InvalidLevel(_))
        ));
    }
}
