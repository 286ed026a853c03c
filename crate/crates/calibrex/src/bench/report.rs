//! Report assembly: grouping per-cell percentile errors by (setting,
//! estimator, size), median aggregation across score distributions, and the
//! CSV/provenance outputs.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::bench::config::BenchConfig;
use crate::bench::runner::CellOutcome;
use crate::core::CalibrationSetting;
use crate::error::Result;
use crate::stats::median;

/// One aggregated report row.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReportRow {
    pub setting: CalibrationSetting,
    pub estimator_id: String,
    pub hyperparams: String,
    pub eval_size: usize,
    pub median_p95_error: f64,
    pub n_distributions: usize,
}

/// Provenance block tying a report to its configuration and environment.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Provenance {
    pub config_hash: String,
    pub seed: u64,
    pub artifact_version: String,
    pub n_cells: usize,
    /// Labels of cells that failed outright (excluded from medians).
    pub failed_cells: Vec<String>,
    /// Labels of rows that failed inside otherwise healthy cells.
    pub failed_rows: Vec<String>,
    /// Rows where the ground truth was 0 and absolute errors were recorded;
    /// these are excluded from the relative-error medians.
    pub absolute_fallback_rows: Vec<String>,
}

/// Aggregated benchmark result: one row per (setting, estimator, size).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub rows: Vec<ReportRow>,
    pub provenance: Provenance,
}

/// Per-group percentile-error values across score distributions, before
/// median aggregation. Group order matches the report's row order.
#[derive(Debug, Clone)]
pub struct GroupedErrors {
    pub setting: CalibrationSetting,
    pub estimator_idx: usize,
    pub eval_size: usize,
    pub values: Vec<f64>,
}

/// Collects the relative-error vectors per (setting, estimator, size) from
/// cell outcomes, skipping failed cells, failed rows, and absolute-error
/// fallbacks.
pub fn group_errors(config: &BenchConfig, cells: &[CellOutcome]) -> Vec<GroupedErrors> {
    let mut groups: BTreeMap<(usize, usize, usize), Vec<f64>> = BTreeMap::new();
    let setting_index: BTreeMap<String, usize> = config
        .settings
        .iter()
        .enumerate()
        .map(|(i, s)| (s.to_string(), i))
        .collect();
    let size_index: BTreeMap<usize, usize> = config
        .eval_sizes
        .iter()
        .enumerate()
        .map(|(i, &s)| (s, i))
        .collect();
    for cell in cells {
        if cell.failure.is_some() {
            continue;
        }
        for row in &cell.rows {
            let (Some(value), None, false) = (row.p95_error, &row.failure, row.absolute_fallback)
            else {
                continue;
            };
            let key = (
                setting_index[&row.setting.to_string()],
                row.estimator_idx,
                size_index[&row.eval_size],
            );
            groups.entry(key).or_default().push(value);
        }
    }
    groups
        .into_iter()
        .map(|((setting_idx, estimator_idx, size_idx), values)| GroupedErrors {
            setting: config.settings[setting_idx],
            estimator_idx,
            eval_size: config.eval_sizes[size_idx],
            values,
        })
        .collect()
}

/// Aggregates cell outcomes into the final report: the median percentile
/// error per group across all contributing score distributions.
pub fn assemble_report(config: &BenchConfig, cells: &[CellOutcome]) -> BenchmarkReport {
    let rows = group_errors(config, cells)
        .into_iter()
        .filter(|g| !g.values.is_empty())
        .map(|g| ReportRow {
            setting: g.setting,
            estimator_id: config.estimators[g.estimator_idx].estimator_id().to_string(),
            hyperparams: config.estimators[g.estimator_idx].descriptor(),
            eval_size: g.eval_size,
            median_p95_error: median(&g.values),
            n_distributions: g.values.len(),
        })
        .collect();

    let failed_cells = cells
        .iter()
        .filter(|c| c.failure.is_some())
        .map(|c| c.coords.label())
        .collect();
    let mut failed_rows = Vec::new();
    let mut absolute_fallback_rows = Vec::new();
    for cell in cells.iter().filter(|c| c.failure.is_none()) {
        for row in &cell.rows {
            let label = format!(
                "{}:{}:{}:{}",
                cell.coords.label(),
                row.setting,
                config.estimators[row.estimator_idx].estimator_id(),
                row.eval_size
            );
            if row.failure.is_some() {
                failed_rows.push(label);
            } else if row.absolute_fallback {
                absolute_fallback_rows.push(label);
            }
        }
    }

    BenchmarkReport {
        rows,
        provenance: Provenance {
            config_hash: config.config_hash(),
            seed: config.seed,
            artifact_version: env!("CARGO_PKG_VERSION").to_string(),
            n_cells: cells.len(),
            failed_cells,
            failed_rows,
            absolute_fallback_rows,
        },
    }
}

impl BenchmarkReport {
    /// Writes the report CSV with header
    /// `setting,estimator,hyperparams,eval_size,median_p95_error,n_distributions`.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> Result<()> {
        writeln!(
            out,
            "setting,estimator,hyperparams,eval_size,median_p95_error,n_distributions"
        )?;
        for row in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                row.setting,
                row.estimator_id,
                row.hyperparams,
                row.eval_size,
                row.median_p95_error,
                row.n_distributions
            )?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("write to vec");
        String::from_utf8(buf).expect("csv is utf-8")
    }

    /// Looks up a row by setting, estimator id, and evaluation size.
    pub fn find(
        &self,
        setting: CalibrationSetting,
        estimator_id: &str,
        eval_size: usize,
    ) -> Option<&ReportRow> {
        self.rows.iter().find(|r| {
            r.setting == setting && r.estimator_id == estimator_id && r.eval_size == eval_size
        })
    }
}
