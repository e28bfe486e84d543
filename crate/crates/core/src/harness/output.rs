//! CSV and JSON emitters.

use std::fmt::Write;

use serde::Serialize;
use serde_json::json;

use super::figures::Check;
use super::Histogram;

pub const HISTOGRAM_HEADER: &str = "observable,bin_left,bin_right,count";
pub const CURVE_HEADER: &str = "x,pdf,cdf";

/// Histograms as `observable,bin_left,bin_right,count` rows.
pub fn histogram_csv<'a>(histograms: impl IntoIterator<Item = (&'a str, &'a Histogram)>) -> String {
    let mut out = String::from(HISTOGRAM_HEADER);
    out.push('\n');
    for (label, h) in histograms {
        for (i, count) in h.counts.iter().enumerate() {
            let _ = writeln!(out, "{label},{},{},{count}", h.edges[i], h.edges[i + 1]);
        }
    }
    out
}

pub fn curve_csv(curve: &[(f64, f64, f64)]) -> String {
    let mut out = String::from(CURVE_HEADER);
    out.push('\n');
    for (x, pdf, cdf) in curve {
        let _ = writeln!(out, "{x},{pdf},{cdf}");
    }
    out
}

/// `{config, ks_table, runtime_seconds, seed}`.
pub fn summary_json(config: &impl Serialize, ks_table: &[Check], runtime_seconds: f64, seed: u64) -> serde_json::Value {
    json!({
        "config": config,
        "ks_table": ks_table,
        "runtime_seconds": runtime_seconds,
        "seed": seed,
    })
}

/// File-name friendly form of a panel label.
pub fn slug(label: &str) -> String {
    label
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '.' { c } else { '_' })
        .collect()
}
