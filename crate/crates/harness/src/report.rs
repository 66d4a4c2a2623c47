//! Aggregation of per-seed records into mean ± std tables.

use serde::{Deserialize, Serialize};

use crate::config::Method;
use crate::runner::RunRecord;

/// Mean and sample standard deviation (`n − 1` denominator; 0 for one value).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
    pub n: usize,
}

impl Stat {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len();
        let mean = values.iter().sum::<f64>() / n as f64;
        let std = if n > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        Some(Self { mean, std, n })
    }

    /// Percentages with two decimals, e.g. `78.84±0.09`.
    pub fn percent(&self) -> String {
        format!("{:.2}±{:.2}", 100.0 * self.mean, 100.0 * self.std)
    }
}

fn percent(s: Option<Stat>) -> String {
    s.map_or_else(|| "n/a".to_string(), |s| s.percent())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub method: Method,
    pub lambda: f64,
    pub runs: usize,
    pub failed: usize,
    pub source_accuracy: Option<Stat>,
    pub source_delta_dp: Option<Stat>,
    pub target_accuracy: Option<Stat>,
    pub target_delta_dp: Option<Stat>,
    /// Over seeds where the metric is defined; `n` says how many.
    pub target_delta_eo: Option<Stat>,
}

/// One summary per `(method, lambda)` cell, in first-seen order.
pub fn summarize(records: &[RunRecord]) -> Vec<CellSummary> {
    let mut keys: Vec<(Method, f64)> = Vec::new();
    for r in records {
        if !keys.iter().any(|&(m, l)| m == r.method && l.to_bits() == r.lambda.to_bits()) {
            keys.push((r.method, r.lambda));
        }
    }
    keys.into_iter()
        .map(|(method, lambda)| {
            let cell: Vec<&RunRecord> = records
                .iter()
                .filter(|r| r.method == method && r.lambda.to_bits() == lambda.to_bits())
                .collect();
            let ok: Vec<&RunRecord> = cell.iter().copied().filter(|r| r.is_ok()).collect();
            let src = |f: fn(&crate::metrics::FairnessReport) -> f64| {
                Stat::of(&ok.iter().filter_map(|r| r.source()).map(f).collect::<Vec<_>>())
            };
            let tgt = |f: fn(&crate::metrics::FairnessReport) -> f64| {
                Stat::of(&ok.iter().filter_map(|r| r.target()).map(f).collect::<Vec<_>>())
            };
            CellSummary {
                method,
                lambda,
                runs: cell.len(),
                failed: cell.len() - ok.len(),
                source_accuracy: src(|m| m.accuracy),
                source_delta_dp: src(|m| m.delta_dp),
                target_accuracy: tgt(|m| m.accuracy),
                target_delta_dp: tgt(|m| m.delta_dp),
                target_delta_eo: Stat::of(&ok.iter().filter_map(|r| r.target()?.delta_eo).collect::<Vec<_>>()),
            }
        })
        .collect()
}

/// Header plus one row per cell, metrics as `mean±std` percentages.
pub fn summary_rows(cells: &[CellSummary]) -> Vec<Vec<String>> {
    let mut rows = vec![[
        "method",
        "lambda",
        "runs",
        "failed",
        "source_acc",
        "source_dp",
        "target_acc",
        "target_dp",
        "target_eo",
    ]
    .map(String::from)
    .to_vec()];
    for c in cells {
        rows.push(vec![
            c.method.to_string(),
            c.lambda.to_string(),
            c.runs.to_string(),
            c.failed.to_string(),
            percent(c.source_accuracy),
            percent(c.source_delta_dp),
            percent(c.target_accuracy),
            percent(c.target_delta_dp),
            percent(c.target_delta_eo),
        ]);
    }
    rows
}

/// Accuracy against parity gap on the target, one row per cell, as raw
/// fractions for plotting.
pub fn tradeoff_rows(cells: &[CellSummary]) -> Vec<Vec<String>> {
    let mut rows = vec![["method", "lambda", "target_accuracy_mean", "target_delta_dp_mean", "target_delta_eo_mean"]
        .map(String::from)
        .to_vec()];
    let mean = |s: Option<Stat>| s.map_or_else(String::new, |s| s.mean.to_string());
    for c in cells {
        rows.push(vec![
            c.method.to_string(),
            c.lambda.to_string(),
            mean(c.target_accuracy),
            mean(c.target_delta_dp),
            mean(c.target_delta_eo),
        ]);
    }
    rows
}

/// Fixed-width text table with a note on the ± convention.
pub fn render_table(cells: &[CellSummary]) -> String {
    let rows = summary_rows(cells);
    let widths: Vec<usize> = (0..rows[0].len())
        .map(|j| rows.iter().map(|r| r[j].chars().count()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for (i, row) in rows.iter().enumerate() {
        let line: Vec<String> = row
            .iter()
            .zip(&widths)
            .map(|(cell, w)| format!("{cell:<w$}"))
            .collect();
        out.push_str(line.join("  ").trim_end());
        out.push('\n');
        if i == 0 {
            let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
            out.push_str(&rule.join("  "));
            out.push('\n');
        }
    }
    out.push_str("metrics in percent, mean±std over seeds (sample std, n-1)\n");
    out
}
