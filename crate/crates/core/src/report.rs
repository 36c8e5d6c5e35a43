//! Plot-ready CSV tables. Numbers are written with six significant digits.

use std::io::Write;

use crate::attribution::AlphaRecord;
use crate::beliefmodels::ResidualRow;
use crate::dataset::RoundSummary;
use crate::paretolab::CurvePoint;

/// `x` rounded to six significant digits, in plain decimal notation.
/// Non-finite values become empty cells.
pub fn sig6(x: f64) -> String {
    if !x.is_finite() {
        return String::new();
    }
    let rounded: f64 = format!("{x:.5e}").parse().expect("formatted float parses");
    if rounded == 0.0 {
        "0".into()
    } else {
        rounded.to_string()
    }
}

fn opt(x: Option<f64>) -> String {
    x.map(sig6).unwrap_or_default()
}

fn table<W: Write>(out: W, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_summary<W: Write>(out: W, rows: &[RoundSummary]) -> csv::Result<()> {
    table(
        out,
        &[
            "round_id",
            "asset",
            "ground_truth",
            "n_prediction_sets",
            "price_change_pct",
            "linear_extrapolation_error_pct",
            "crowd_mean_error_pct",
            "futures_mean_error_pct",
        ],
        rows.iter().map(|r| {
            vec![
                r.round_id.clone(),
                r.asset_symbol.clone(),
                sig6(r.ground_truth),
                r.n_prediction_sets.to_string(),
                sig6(r.price_change_pct),
                sig6(r.linear_extrapolation_error_pct),
                sig6(r.crowd_mean_error_pct),
                opt(r.futures_mean_error_pct),
            ]
        }),
    )
}

pub fn write_residuals<W: Write>(out: W, rows: &[ResidualRow]) -> csv::Result<()> {
    table(
        out,
        &["model", "round_id", "n_sets", "n_skipped", "mean_abs_residual_pct", "ci95_half_width_pct"],
        rows.iter().map(|r| {
            vec![
                r.model.name().to_string(),
                r.round_id.clone(),
                r.n_sets.to_string(),
                r.n_skipped.to_string(),
                sig6(r.mean_abs_residual_pct),
                opt(r.ci95_half_width_pct),
            ]
        }),
    )
}

pub fn write_alphas<W: Write>(out: W, records: &[AlphaRecord]) -> csv::Result<()> {
    table(
        out,
        &["prediction_set_id", "round_id", "epsilon_h", "epsilon_t", "alpha_raw", "alpha_scaled"],
        records.iter().map(|r| {
            vec![
                r.prediction_set_id.clone(),
                r.round_id.clone(),
                sig6(r.epsilon_h),
                sig6(r.epsilon_t),
                sig6(r.alpha_raw),
                sig6(r.alpha_scaled),
            ]
        }),
    )
}

/// Gaps keep their row with empty statistics.
pub fn write_pareto<W: Write>(out: W, curve: &[CurvePoint]) -> csv::Result<()> {
    table(
        out,
        &["alpha_s", "improvement", "ci95", "risk", "n_rounds_used", "n_rounds_excluded"],
        curve.iter().map(|c| match c {
            CurvePoint::Point(p) => vec![
                sig6(p.alpha_s),
                sig6(p.improvement_mean),
                sig6(p.ci95_half_width),
                sig6(p.risk),
                p.n_rounds_used.to_string(),
                p.n_rounds_excluded.to_string(),
            ],
            CurvePoint::Gap { alpha_s, n_rounds_used, n_rounds_excluded } => vec![
                sig6(*alpha_s),
                String::new(),
                String::new(),
                String::new(),
                n_rounds_used.to_string(),
                n_rounds_excluded.to_string(),
            ],
        }),
    )
}

pub fn write_improvement<W: Write>(out: W, curve: &[CurvePoint]) -> csv::Result<()> {
    table(
        out,
        &["alpha_s", "improvement_pct", "ci95"],
        curve.iter().map(|c| {
            let p = c.point();
            vec![sig6(c.alpha_s()), opt(p.map(|p| p.improvement_mean)), opt(p.map(|p| p.ci95_half_width))]
        }),
    )
}

pub fn write_smooth<W: Write>(out: W, points: &[(f64, f64)]) -> csv::Result<()> {
    table(out, &["risk", "improvement_smoothed"], points.iter().map(|&(x, y)| vec![sig6(x), sig6(y)]))
}
