//! Locally weighted linear regression with a tricube kernel.

use super::ParetoError;

pub const DEFAULT_SPAN: f64 = 0.75;

fn tricube(u: f64) -> f64 {
    if u >= 1.0 {
        0.0
    } else {
        let c = 1.0 - u * u * u;
        c * c * c
    }
}

/// Smooths `points` and returns the fitted values at each input x, sorted by
/// x. Each fit uses the `floor(span * n)` nearest neighbours, weighted by
/// distance relative to the farthest of them.
pub fn loess_smooth(points: &[(f64, f64)], span: f64) -> Result<Vec<(f64, f64)>, ParetoError> {
    if points.len() < 3 {
        return Err(ParetoError::TooFewPoints { got: points.len(), needed: 3 });
    }
    if !(span > 0.0 && span <= 1.0) {
        return Err(ParetoError::InvalidArgument(format!("span {span} outside (0, 1]")));
    }
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let n = pts.len();
    let k = ((span * n as f64 + 1e-10).floor() as usize).clamp(2, n);

    let mut out = Vec::with_capacity(n);
    let mut left = 0usize;
    for i in 0..n {
        let xi = pts[i].0;
        // slide the k-wide window while that brings it no farther from xi
        while left + k < n && xi - pts[left].0 > pts[left + k].0 - xi {
            left += 1;
        }
        let window = &pts[left..left + k];
        let radius = (xi - window[0].0).max(window[k - 1].0 - xi);
        let w: Vec<f64> = window
            .iter()
            .map(|p| if radius > 0.0 { tricube((p.0 - xi).abs() / radius) } else { 1.0 })
            .collect();
        let sw: f64 = w.iter().sum();
        if sw <= 0.0 {
            out.push((xi, pts[i].1));
            continue;
        }
        let mx = w.iter().zip(window).map(|(w, p)| w * p.0).sum::<f64>() / sw;
        let my = w.iter().zip(window).map(|(w, p)| w * p.1).sum::<f64>() / sw;
        let sxx: f64 = w.iter().zip(window).map(|(w, p)| w * (p.0 - mx) * (p.0 - mx)).sum();
        let sxy: f64 = w.iter().zip(window).map(|(w, p)| w * (p.0 - mx) * (p.1 - my)).sum();
        let fit = if sxx > 1e-12 * sw * radius * radius {
            my + sxy / sxx * (xi - mx)
        } else {
            my
        };
        out.push((xi, fit));
    }
    Ok(out)
}
