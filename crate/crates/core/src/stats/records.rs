//! Metric records, per-category rollups and the summary tables.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{mann_whitney_u, median_iqr, MannWhitney};
use crate::error::{Error, Result};
use crate::volume::Category;

pub const RECORD_HEADER: [&str; 7] = ["scan_id", "method", "views", "structure", "category", "metric", "value"];

/// Structure and category name used for whole-volume (pixel-wise) metrics.
pub const WHOLE_VOLUME: &str = "whole";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Psnr,
    Ssim,
    Dsc,
    Nsd,
    #[serde(rename = "cldice")]
    ClDice,
}

impl Metric {
    pub const ALL: [Metric; 5] = [Metric::Psnr, Metric::Ssim, Metric::Dsc, Metric::Nsd, Metric::ClDice];

    pub fn as_str(&self) -> &'static str {
        match self {
            Metric::Psnr => "psnr",
            Metric::Ssim => "ssim",
            Metric::Dsc => "dsc",
            Metric::Nsd => "nsd",
            Metric::ClDice => "cldice",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Metric::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::param(format!("unknown metric '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricRecord {
    pub scan_id: String,
    pub method: String,
    pub views: usize,
    pub structure: String,
    /// A `Category` name, or `whole` for pixel-wise metrics.
    pub category: String,
    pub metric: Metric,
    pub value: f64,
}

impl MetricRecord {
    pub fn validate(&self) -> Result<()> {
        if self.value.is_nan() || self.value == f64::NEG_INFINITY {
            return Err(Error::param(format!("record value {} is not allowed", self.value)));
        }
        if self.value == f64::INFINITY && self.metric != Metric::Psnr {
            return Err(Error::param(format!("only PSNR may be infinite, got {}", self.metric)));
        }
        if self.category != WHOLE_VOLUME {
            Category::from_str(&self.category)?;
        }
        Ok(())
    }
}

/// Shortest round-trip decimal form; `inf` for the PSNR sentinel.
fn format_value(v: f64) -> String {
    if v == f64::INFINITY {
        "inf".into()
    } else {
        format!("{v}")
    }
}

pub fn write_records(records: &[MetricRecord], w: impl Write) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(RECORD_HEADER)?;
    for r in records {
        r.validate()?;
        out.write_record([
            r.scan_id.as_str(),
            r.method.as_str(),
            &r.views.to_string(),
            r.structure.as_str(),
            r.category.as_str(),
            r.metric.as_str(),
            &format_value(r.value),
        ])?;
    }
    out.flush().map_err(|e| Error::Csv(e.into()))?;
    Ok(())
}

pub fn read_records(r: impl Read) -> Result<Vec<MetricRecord>> {
    let mut rdr = csv::Reader::from_reader(r);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
    if header != RECORD_HEADER {
        return Err(Error::param(format!("unexpected record header {header:?}")));
    }
    let mut out = Vec::new();
    for row in rdr.records() {
        let row = row?;
        let field = |i: usize| row.get(i).unwrap_or_default();
        let rec = MetricRecord {
            scan_id: field(0).into(),
            method: field(1).into(),
            views: field(2)
                .parse()
                .map_err(|_| Error::param(format!("bad views value '{}'", field(2))))?,
            structure: field(3).into(),
            category: field(4).into(),
            metric: field(5).parse()?,
            value: field(6)
                .parse()
                .map_err(|_| Error::param(format!("bad metric value '{}'", field(6))))?,
        };
        rec.validate()?;
        out.push(rec);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AggregationPolicy {
    /// Average the structures of a category within each scan, then summarize across scans.
    #[default]
    Mean,
    /// Summarize every structure score directly.
    Pooled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategorySummary {
    pub method: String,
    pub views: usize,
    pub category: String,
    pub metric: Metric,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    pub n: usize,
}

type GroupKey = (String, usize, String, Metric);

/// Per (method, views, category, metric): the samples entering the summary,
/// in scan-id order. Under the mean policy there is one sample per scan.
fn grouped_samples(records: &[MetricRecord], policy: AggregationPolicy) -> BTreeMap<GroupKey, Vec<f64>> {
    let mut per_scan: BTreeMap<(GroupKey, String), Vec<f64>> = BTreeMap::new();
    for r in records {
        let key = (r.method.clone(), r.views, r.category.clone(), r.metric);
        per_scan.entry((key, r.scan_id.clone())).or_default().push(r.value);
    }
    let mut out: BTreeMap<GroupKey, Vec<f64>> = BTreeMap::new();
    for ((key, _scan), values) in per_scan {
        let entry = out.entry(key).or_default();
        match policy {
            AggregationPolicy::Mean => entry.push(values.iter().sum::<f64>() / values.len() as f64),
            AggregationPolicy::Pooled => entry.extend(values),
        }
    }
    out
}

/// Per-scan category values `(scan_id, value)` for one method/views/category/metric.
pub fn category_scan_values(
    records: &[MetricRecord],
    method: &str,
    views: usize,
    category: &str,
    metric: Metric,
) -> Vec<(String, f64)> {
    let mut per_scan: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for r in records {
        if r.method == method && r.views == views && r.category == category && r.metric == metric {
            per_scan.entry(&r.scan_id).or_default().push(r.value);
        }
    }
    per_scan
        .into_iter()
        .map(|(s, v)| (s.to_owned(), v.iter().sum::<f64>() / v.len() as f64))
        .collect()
}

/// Median and IQR per (method, views, category, metric), sorted by that key.
pub fn aggregate_category(records: &[MetricRecord], policy: AggregationPolicy) -> Result<Vec<CategorySummary>> {
    let mut out = Vec::new();
    for ((method, views, category, metric), samples) in grouped_samples(records, policy) {
        if samples.is_empty() {
            log::warn!("no samples for {method}@{views} {category} {metric}; omitted");
            continue;
        }
        let (median, q1, q3) = median_iqr(&samples)?;
        out.push(CategorySummary {
            method,
            views,
            category,
            metric,
            median,
            q1,
            q3,
            n: samples.len(),
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupComparison {
    pub category: String,
    pub metric: Metric,
    pub test: MannWhitney,
    pub significant: bool,
}

/// Mann-Whitney comparison of two (method, views) groups on every category
/// and metric they share, using per-scan category values. Returns nothing
/// (with a warning) when either group has fewer than two scans.
pub fn compare_groups(records: &[MetricRecord], a: (&str, usize), b: (&str, usize)) -> Result<Vec<GroupComparison>> {
    let samples = grouped_samples(records, AggregationPolicy::Mean);
    let mut out = Vec::new();
    for ((method, views, category, metric), sa) in &samples {
        if (method.as_str(), *views) != a {
            continue;
        }
        let Some(sb) = samples.get(&(b.0.to_owned(), b.1, category.clone(), *metric)) else {
            continue;
        };
        if sa.len() < 2 || sb.len() < 2 {
            log::warn!("fewer than two scans for {category} {metric}; significance omitted");
            continue;
        }
        let test = mann_whitney_u(sa, sb)?;
        out.push(GroupComparison {
            category: category.clone(),
            metric: *metric,
            significant: test.p < 0.05,
            test,
        });
    }
    Ok(out)
}

/// A column of the headline table: a metric restricted to a category.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SummaryColumn {
    pub header: &'static str,
    pub category: &'static str,
    pub metric: Metric,
}

pub const SUMMARY_COLUMNS: [SummaryColumn; 6] = [
    SummaryColumn { header: "SSIM", category: WHOLE_VOLUME, metric: Metric::Ssim },
    SummaryColumn { header: "PSNR", category: WHOLE_VOLUME, metric: Metric::Psnr },
    SummaryColumn { header: "NSD_large", category: "LargeOrgan", metric: Metric::Nsd },
    SummaryColumn { header: "NSD_small", category: "SmallOrgan", metric: Metric::Nsd },
    SummaryColumn { header: "clDice_intestine", category: "Intestine", metric: Metric::ClDice },
    SummaryColumn { header: "clDice_vessel", category: "Vessel", metric: Metric::ClDice },
];

fn format_cell(s: &CategorySummary) -> String {
    let f = |v: f64| if v == f64::INFINITY { "inf".to_owned() } else { format!("{v:.4}") };
    format!("{} ({},{})", f(s.median), f(s.q1), f(s.q3))
}

/// Rows of the headline table: one per (method, views), cells `median (q1,q3)`.
pub fn summary_table(summaries: &[CategorySummary]) -> Vec<Vec<String>> {
    let mut rows: BTreeMap<(&str, usize), Vec<String>> = BTreeMap::new();
    for s in summaries {
        let row = rows
            .entry((s.method.as_str(), s.views))
            .or_insert_with(|| vec![String::new(); SUMMARY_COLUMNS.len()]);
        if let Some(col) = SUMMARY_COLUMNS
            .iter()
            .position(|c| c.category == s.category && c.metric == s.metric)
        {
            row[col] = format_cell(s);
        }
    }
    rows.into_iter()
        .map(|((method, views), cells)| {
            let mut r = vec![method.to_owned(), views.to_string()];
            r.extend(cells);
            r
        })
        .collect()
}

pub fn write_summary_table(summaries: &[CategorySummary], w: impl Write) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let mut header = vec!["method", "views"];
    header.extend(SUMMARY_COLUMNS.iter().map(|c| c.header));
    out.write_record(&header)?;
    for row in summary_table(summaries) {
        out.write_record(&row)?;
    }
    out.flush().map_err(|e| Error::Csv(e.into()))?;
    Ok(())
}

/// Every summary as one numeric row.
pub fn write_long_summary(summaries: &[CategorySummary], w: impl Write) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["method", "views", "category", "metric", "median", "q1", "q3", "n"])?;
    for s in summaries {
        out.write_record([
            s.method.clone(),
            s.views.to_string(),
            s.category.clone(),
            s.metric.to_string(),
            format_value(s.median),
            format_value(s.q1),
            format_value(s.q3),
            s.n.to_string(),
        ])?;
    }
    out.flush().map_err(|e| Error::Csv(e.into()))?;
    Ok(())
}
