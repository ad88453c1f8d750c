//! Report and CSV emission with fixed 17-significant-digit floats.

use std::fs::File;
use std::path::Path;

use anyhow::{Context, Result};
use fracelast::homogenization::HomogReport;
use fracelast::weighted_time::WeightedSignal;
use serde::Serialize;

/// `d.dddddddddddddddde±x`: 17 significant digits, identical on every run.
pub fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub value: f64,
    pub tolerance: f64,
    pub detail: String,
}

impl Check {
    /// Passes iff `value <= tolerance` (and `value` is not NaN).
    pub fn at_most(name: &str, value: f64, tolerance: f64, detail: String) -> Self {
        Self {
            name: name.to_string(),
            pass: value <= tolerance,
            value,
            tolerance,
            detail,
        }
    }

    /// Passes iff `value >= tolerance`.
    pub fn at_least(name: &str, value: f64, tolerance: f64, detail: String) -> Self {
        Self {
            name: name.to_string(),
            pass: value >= tolerance,
            value,
            tolerance,
            detail,
        }
    }

    pub fn summary_line(&self) -> String {
        let tag = if self.pass { "PASS" } else { "FAIL" };
        format!(
            "[{tag}] {}: {:.6e} (tolerance {:.3e}){}",
            self.name,
            self.value,
            self.tolerance,
            if self.detail.is_empty() {
                String::new()
            } else {
                format!(" {}", self.detail)
            }
        )
    }
}

/// Frequency-solver figures without the per-frequency table.
#[derive(Debug, Clone, Serialize)]
pub struct SolverSummary {
    pub path: String,
    pub frequencies: usize,
    pub min_coercivity: f64,
    pub max_condition_bound: f64,
    pub worst_frequency: f64,
    pub relative_residual: f64,
}

impl From<&fracelast::SolverReport> for SolverSummary {
    fn from(r: &fracelast::SolverReport) -> Self {
        Self {
            path: format!("{:?}", r.path).to_lowercase(),
            frequencies: r.frequencies,
            min_coercivity: r.min_coercivity,
            max_condition_bound: r.max_condition_bound,
            worst_frequency: r.worst_frequency,
            relative_residual: r.relative_residual,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport<'a, C: Serialize> {
    pub mode: &'static str,
    pub config: &'a C,
    pub nu: f64,
    pub nu0: f64,
    pub dt: f64,
    pub checks: Vec<Check>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub solver: Option<SolverSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub homogenization: Option<HomogReport>,
    /// Largest weak error at the last `k` over that at the first.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weak_decay: Option<f64>,
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let file = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    serde_json::to_writer_pretty(file, value)
        .with_context(|| format!("cannot write {}", path.display()))
}

/// Columns `t, value_1..value_d`.
pub fn write_signal_csv(path: &Path, signal: &WeightedSignal) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("cannot create {}", path.display()))?;
    let mut header = vec!["t".to_string()];
    header.extend((1..=signal.dim()).map(|i| format!("value_{i}")));
    w.write_record(&header)?;
    let grid = signal.grid();
    for j in 0..grid.n() {
        let mut row = Vec::with_capacity(signal.dim() + 1);
        row.push(fmt_float(grid.time(j)));
        row.extend(signal.values().row(j).iter().map(|&v| fmt_float(v)));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Columns `k, phi_index, weak_error, strong_error_v`.
pub fn write_convergence_csv(path: &Path, report: &HomogReport) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("cannot create {}", path.display()))?;
    w.write_record(["k", "phi_index", "weak_error", "strong_error_v"])?;
    for (k, phi, weak, strong) in report.convergence_rows() {
        w.write_record([k.to_string(), phi.to_string(), fmt_float(weak), fmt_float(strong)])?;
    }
    w.flush()?;
    Ok(())
}
