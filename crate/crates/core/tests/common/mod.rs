//! Oracles shared by the integration tests.

use std::collections::BTreeMap;

/// Inclusive linear quantile, written independently of the library.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    let w = pos - lo as f64;
    if w == 0.0 || sorted[lo] == sorted[hi] {
        sorted[lo]
    } else {
        sorted[lo] * (1.0 - w) + sorted[hi] * w
    }
}

/// The headline table rebuilt from `records.csv` text with plain string handling.
pub fn summary_from_records(text: &str) -> String {
    let columns = [
        ("SSIM", "whole", "ssim"),
        ("PSNR", "whole", "psnr"),
        ("NSD_large", "LargeOrgan", "nsd"),
        ("NSD_small", "SmallOrgan", "nsd"),
        ("clDice_intestine", "Intestine", "cldice"),
        ("clDice_vessel", "Vessel", "cldice"),
    ];
    let mut per_scan: BTreeMap<(String, usize, String, String, String), Vec<f64>> = BTreeMap::new();
    for line in text.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        let value = if f[6] == "inf" { f64::INFINITY } else { f[6].parse().unwrap() };
        per_scan
            .entry((f[1].into(), f[2].parse().unwrap(), f[4].into(), f[5].into(), f[0].into()))
            .or_default()
            .push(value);
    }
    let mut groups: BTreeMap<(String, usize), BTreeMap<(String, String), Vec<f64>>> = BTreeMap::new();
    for ((method, views, cat, metric, _), v) in per_scan {
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        groups.entry((method, views)).or_default().entry((cat, metric)).or_default().push(mean);
    }
    let fmt = |v: f64| if v.is_infinite() { "inf".to_owned() } else { format!("{v:.4}") };
    let mut out = String::from("method,views");
    for c in columns {
        out.push(',');
        out.push_str(c.0);
    }
    out.push('\n');
    for ((method, views), cells) in groups {
        out.push_str(&format!("{method},{views}"));
        for (_, cat, metric) in columns {
            out.push(',');
            if let Some(v) = cells.get(&(cat.to_owned(), metric.to_owned())) {
                let mut s = v.clone();
                s.sort_by(|a, b| a.partial_cmp(b).unwrap());
                let cell = format!("{} ({},{})", fmt(quantile(&s, 0.5)), fmt(quantile(&s, 0.25)), fmt(quantile(&s, 0.75)));
                out.push_str(&format!("\"{cell}\""));
            }
        }
        out.push('\n');
    }
    out
}
