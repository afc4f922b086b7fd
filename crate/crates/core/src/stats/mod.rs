//! Benchmark statistics: robust summaries, correlation and rank tests.

mod mann_whitney;
mod records;

use crate::error::{Error, Result};

pub use mann_whitney::{mann_whitney_u, mann_whitney_u_with, u_distribution, MannWhitney, PValueMethod, EXACT_MAX_TOTAL};
pub use records::{
    aggregate_category, category_scan_values, compare_groups, read_records, summary_table, write_long_summary,
    write_records, write_summary_table, AggregationPolicy, CategorySummary, GroupComparison, Metric, MetricRecord,
    SummaryColumn, RECORD_HEADER, SUMMARY_COLUMNS, WHOLE_VOLUME,
};

/// Quantile by linear interpolation between closest ranks (inclusive method)
/// on sorted data. `+∞` entries propagate without producing NaN.
fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    let frac = h - lo as f64;
    let (a, b) = (sorted[lo], sorted[hi]);
    if lo == hi || frac == 0.0 || a == b {
        a
    } else if b.is_infinite() {
        b
    } else {
        a + (b - a) * frac
    }
}

/// `(median, q1, q3)` with inclusive linear quantiles.
pub fn median_iqr(samples: &[f64]) -> Result<(f64, f64, f64)> {
    if samples.is_empty() {
        return Err(Error::param("median/IQR of an empty sample"));
    }
    if samples.iter().any(|x| x.is_nan()) {
        return Err(Error::param("median/IQR sample contains NaN"));
    }
    let mut s = samples.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).expect("NaN rejected above"));
    Ok((quantile_sorted(&s, 0.5), quantile_sorted(&s, 0.25), quantile_sorted(&s, 0.75)))
}

/// Product-moment correlation coefficient.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::param(format!("pearson: lengths {} and {} differ", x.len(), y.len())));
    }
    if x.len() < 2 {
        return Err(Error::param("pearson needs at least two points"));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::param("pearson inputs must be finite"));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::UndefinedCorrelation("one of the samples has zero variance".into()));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}
