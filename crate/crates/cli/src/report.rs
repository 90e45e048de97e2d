//! Visibility histograms for sampled and refined populations.

use std::path::Path;

use lowvis_core::visibility::compensated_sum;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PopulationStats {
    pub count: usize,
    pub min: Option<f64>,
    pub mean: Option<f64>,
    pub max: Option<f64>,
}

impl PopulationStats {
    pub fn of(values: &[f64]) -> Self {
        if values.is_empty() {
            return Self {
                count: 0,
                min: None,
                mean: None,
                max: None,
            };
        }
        Self {
            count: values.len(),
            min: values.iter().copied().reduce(f64::min),
            mean: Some(compensated_sum(values.iter().copied()) / values.len() as f64),
            max: values.iter().copied().reduce(f64::max),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportSummary {
    pub sampled: PopulationStats,
    pub refined: PopulationStats,
    pub bins: Vec<HistogramBin>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub bin_low: f64,
    pub bin_high: f64,
    pub count_sampled: usize,
    pub count_refined: usize,
}

/// Equal-width bins over the combined range; the last bin is closed. A
/// degenerate range gives one zero-width bin.
pub fn histogram(sampled: &[f64], refined: &[f64], n_bins: usize) -> Vec<HistogramBin> {
    let all = sampled.iter().chain(refined).copied();
    let (Some(lo), Some(hi)) = (all.clone().reduce(f64::min), all.reduce(f64::max)) else {
        return Vec::new();
    };
    let n = if hi > lo { n_bins } else { 1 };
    let width = (hi - lo) / n as f64;
    let mut bins: Vec<HistogramBin> = (0..n)
        .map(|i| HistogramBin {
            bin_low: lo + width * i as f64,
            bin_high: if i + 1 == n { hi } else { lo + width * (i + 1) as f64 },
            count_sampled: 0,
            count_refined: 0,
        })
        .collect();
    let index = |v: f64| {
        if width > 0.0 {
            (((v - lo) / width) as usize).min(n - 1)
        } else {
            0
        }
    };
    for &v in sampled {
        bins[index(v)].count_sampled += 1;
    }
    for &v in refined {
        bins[index(v)].count_refined += 1;
    }
    bins
}

/// Writes `histogram.csv` and `summary.json` into `out`.
pub fn write_report(sampled: &[f64], refined: &[f64], n_bins: usize, out: &Path) -> CliResult<ReportSummary> {
    let summary = ReportSummary {
        sampled: PopulationStats::of(sampled),
        refined: PopulationStats::of(refined),
        bins: histogram(sampled, refined, n_bins),
    };
    let csv_path = out.join("histogram.csv");
    let mut w = csv::Writer::from_path(&csv_path).map_err(|e| CliError::io(&csv_path, e))?;
    w.write_record(["bin_low", "bin_high", "count_sampled", "count_refined"])?;
    for b in &summary.bins {
        w.write_record([
            b.bin_low.to_string(),
            b.bin_high.to_string(),
            b.count_sampled.to_string(),
            b.count_refined.to_string(),
        ])?;
    }
    w.flush().map_err(|e| CliError::io(&csv_path, e))?;

    let json_path = out.join("summary.json");
    let mut text = serde_json::to_string_pretty(&summary)
        .map_err(|e| CliError::Config(format!("serialize summary: {e}")))?;
    text.push('\n');
    std::fs::write(&json_path, text).map_err(|e| CliError::io(&json_path, e))?;
    Ok(summary)
}
