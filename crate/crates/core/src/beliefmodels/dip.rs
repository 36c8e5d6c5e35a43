//! Hartigan's dip test of unimodality.
//!
//! The statistic follows the greatest-convex-minorant / least-concave-majorant
//! construction of algorithm AS 217, skipping through the sorted data via the
//! change points of both envelopes. The smallest attainable value for a
//! sample of size `n` is `1 / (2n)`. P-values come from Monte Carlo
//! replicates of the statistic on uniform samples of the same size.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use rand::Rng;
use serde::Serialize;

use super::ModelError;
use crate::seeds;

pub const MIN_DIP_SAMPLES: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DipResult {
    pub dip_statistic: f64,
    pub p_value: f64,
    pub multimodal: bool,
}

/// Dip statistic of `samples` (any order).
pub fn dip_statistic(samples: &[f64]) -> f64 {
    let mut x = samples.to_vec();
    x.sort_by(f64::total_cmp);
    dip_sorted(&x)
}

/// Dip statistic of already sorted data.
pub fn dip_sorted(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n == 0 {
        return 0.0;
    }
    // 1-based copy so indices follow the published algorithm
    let mut x = Vec::with_capacity(n + 1);
    x.push(f64::NAN);
    x.extend_from_slice(sorted);
    let two_n = 2.0 * n as f64;
    let mut dip = 1.0;
    if n < 2 || x[n] == x[1] {
        return dip / two_n;
    }

    let slope_lt = |i: usize, a: usize, b: usize| {
        // (x[i] - x[a]) * (a - b) < (x[a] - x[b]) * (i - a), in signed index arithmetic
        (x[i] - x[a]) * (a as f64 - b as f64) < (x[a] - x[b]) * (i as f64 - a as f64)
    };
    let mut mn = vec![0usize; n + 1];
    mn[1] = 1;
    for i in 2..=n {
        mn[i] = i - 1;
        loop {
            let a = mn[i];
            let b = mn[a];
            if a == 1 || slope_lt(i, a, b) {
                break;
            }
            mn[i] = b;
        }
    }
    let mut mj = vec![0usize; n + 1];
    mj[n] = n;
    for i in (1..n).rev() {
        mj[i] = i + 1;
        loop {
            let a = mj[i];
            let b = mj[a];
            if a == n || slope_lt(i, a, b) {
                break;
            }
            mj[i] = b;
        }
    }

    let mut gcm = vec![0usize; n + 2];
    let mut lcm = vec![0usize; n + 2];
    let (mut low, mut high) = (1usize, n);
    loop {
        gcm[1] = high;
        let mut i = 1;
        while gcm[i] > low {
            gcm[i + 1] = mn[gcm[i]];
            i += 1;
        }
        let l_gcm = i;
        let mut gx = l_gcm;
        let mut gy = l_gcm - 1;

        lcm[1] = low;
        let mut i = 1;
        while lcm[i] < high {
            lcm[i + 1] = mj[lcm[i]];
            i += 1;
        }
        let l_lcm = i;
        let mut lx = l_lcm;
        let mut ly = 2usize;

        let d = if l_gcm != 2 || l_lcm != 2 {
            let mut best = 0.0f64;
            loop {
                let g = gcm[gy];
                let l = lcm[ly];
                let from_gcm = g > l;
                let dx = if from_gcm {
                    let g1 = gcm[gy + 1];
                    (l as f64 - g1 as f64 + 1.0) - (x[l] - x[g1]) * (g as f64 - g1 as f64) / (x[g] - x[g1])
                } else {
                    let l1 = lcm[ly - 1];
                    (x[g] - x[l1]) * (l as f64 - l1 as f64) / (x[l] - x[l1]) - (g as f64 - l1 as f64 - 1.0)
                };
                if from_gcm {
                    ly += 1;
                } else {
                    gy -= 1;
                }
                if dx >= best {
                    best = dx;
                    gx = gy + 1;
                    lx = if from_gcm { ly - 1 } else { ly };
                }
                gy = gy.max(1);
                ly = ly.min(l_lcm);
                if gcm[gy] == lcm[ly] {
                    break;
                }
            }
            best
        } else {
            1.0
        };
        if d < dip {
            break;
        }

        let mut dip_l = 0.0f64;
        for j in gx..l_gcm {
            let (jb, je) = (gcm[j + 1], gcm[j]);
            let mut best = 1.0f64;
            if je - jb > 1 && x[je] != x[jb] {
                let c = (je - jb) as f64 / (x[je] - x[jb]);
                for jj in jb..=je {
                    best = best.max((jj - jb + 1) as f64 - (x[jj] - x[jb]) * c);
                }
            }
            dip_l = dip_l.max(best);
        }
        let mut dip_u = 0.0f64;
        for j in lx..l_lcm {
            let (jb, je) = (lcm[j], lcm[j + 1]);
            let mut best = 1.0f64;
            if je - jb > 1 && x[je] != x[jb] {
                let c = (je - jb) as f64 / (x[je] - x[jb]);
                for jj in jb..=je {
                    best = best.max((x[jj] - x[jb]) * c - (jj as f64 - jb as f64 - 1.0));
                }
            }
            dip_u = dip_u.max(best);
        }
        dip = dip.max(dip_l.max(dip_u));

        let unchanged = low == gcm[gx] && high == lcm[lx];
        low = gcm[gx];
        high = lcm[lx];
        if unchanged {
            break;
        }
    }
    dip / two_n
}

/// Dip statistics of uniform samples of one size, sorted ascending.
#[derive(Debug, Clone)]
pub struct DipNull {
    pub sample_size: usize,
    replicates: Vec<f64>,
}

impl DipNull {
    pub fn simulate(sample_size: usize, n_replicates: usize, seed: u64) -> Self {
        let mut rng = seeds::rng(seed);
        let mut buf = vec![0.0; sample_size];
        let mut replicates: Vec<f64> = (0..n_replicates)
            .map(|_| {
                buf.iter_mut().for_each(|v| *v = rng.gen::<f64>());
                buf.sort_by(f64::total_cmp);
                dip_sorted(&buf)
            })
            .collect();
        replicates.sort_by(f64::total_cmp);
        DipNull { sample_size, replicates }
    }

    /// Fraction of null replicates at least as large as `dip`.
    pub fn p_value(&self, dip: f64) -> f64 {
        if self.replicates.is_empty() {
            return 1.0;
        }
        let below = self.replicates.partition_point(|&r| r < dip);
        (self.replicates.len() - below) as f64 / self.replicates.len() as f64
    }
}

/// Null distributions shared across calls, keyed by sample size, replicate
/// count and seed. Each entry depends only on its key, so concurrent callers
/// see identical tables no matter who builds them first.
#[derive(Debug, Default)]
pub struct DipNullCache {
    tables: Mutex<HashMap<(usize, usize, u64), Arc<DipNull>>>,
}

impl DipNullCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, sample_size: usize, n_replicates: usize, seed: u64) -> Arc<DipNull> {
        let key = (sample_size, n_replicates, seed);
        if let Some(t) = self.tables.lock().expect("cache lock").get(&key) {
            return Arc::clone(t);
        }
        let table = Arc::new(DipNull::simulate(sample_size, n_replicates, seeds::derive(seed, &[sample_size as u64])));
        Arc::clone(self.tables.lock().expect("cache lock").entry(key).or_insert(table))
    }
}

pub const DEFAULT_SIGNIFICANCE: f64 = 0.05;

pub fn dip_test_with_null(samples: &[f64], null: &DipNull) -> Result<DipResult, ModelError> {
    if samples.len() < MIN_DIP_SAMPLES {
        return Err(ModelError::TooFewSamples { got: samples.len(), needed: MIN_DIP_SAMPLES });
    }
    if null.sample_size != samples.len() {
        return Err(ModelError::InvalidArgument(format!(
            "null table is for n = {}, sample has n = {}",
            null.sample_size,
            samples.len()
        )));
    }
    let dip_statistic = dip_statistic(samples);
    let p_value = null.p_value(dip_statistic);
    Ok(DipResult { dip_statistic, p_value, multimodal: p_value < DEFAULT_SIGNIFICANCE })
}

/// Dip test with a freshly simulated uniform null of `n_null` replicates.
pub fn dip_test(samples: &[f64], n_null: usize, seed: u64) -> Result<DipResult, ModelError> {
    if samples.len() < MIN_DIP_SAMPLES {
        return Err(ModelError::TooFewSamples { got: samples.len(), needed: MIN_DIP_SAMPLES });
    }
    let null = DipNull::simulate(samples.len(), n_null, seeds::derive(seed, &[samples.len() as u64]));
    dip_test_with_null(samples, &null)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn four_equally_spaced_points() {
        // each atom carries mass 1/4; a continuous unimodal fit is at best
        // half a jump away at every atom, and the uniform on [x1, x4]
        // achieves it, so the dip is 1/8
        assert!((dip_statistic(&[1.0, 2.0, 3.0, 4.0]) - 0.125).abs() < 1e-12);
        assert!((dip_statistic(&[4.0, 1.0, 3.0, 2.0]) - 0.125).abs() < 1e-12);
    }

    #[test]
    fn degenerate_inputs() {
        assert_eq!(dip_statistic(&[3.0; 10]), 1.0 / 20.0);
        assert_eq!(dip_statistic(&[3.0]), 0.5);
    }

    #[test]
    fn dip_bounded() {
        let x: Vec<f64> = (0..50).map(|i| ((i * 37) % 50) as f64 + if i % 2 == 0 { 0.0 } else { 100.0 }).collect();
        let d = dip_statistic(&x);
        assert!(d >= 1.0 / 100.0 && d <= 0.25, "{d}");
    }

    #[test]
    fn too_few_samples() {
        assert_eq!(
            dip_test(&[1.0, 2.0, 3.0], 10, 0),
            Err(ModelError::TooFewSamples { got: 3, needed: 4 })
        );
    }

    #[test]
    fn p_value_counts_ties() {
        let null = DipNull { sample_size: 4, replicates: vec![0.1, 0.2, 0.2, 0.3] };
        assert_eq!(null.p_value(0.2), 0.75);
        assert_eq!(null.p_value(0.35), 0.0);
        assert_eq!(null.p_value(0.0), 1.0);
    }

    #[test]
    fn cache_matches_direct_simulation() {
        let cache = DipNullCache::new();
        let a = cache.get(12, 50, 9);
        let b = DipNull::simulate(12, 50, seeds::derive(9, &[12]));
        assert_eq!(a.replicates, b.replicates);
        assert!(Arc::ptr_eq(&a, &cache.get(12, 50, 9)));
    }
}
