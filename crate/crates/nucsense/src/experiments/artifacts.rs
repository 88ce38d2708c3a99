//! Experiment artifact output: every run writes a config snapshot, a results
//! CSV, a fit-summary JSON, and a long-format CSV for plotting. Output is
//! byte-deterministic for a fixed (config, seed).

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::Result;

/// A rectangular results table with unit-bearing column names.
#[derive(Debug, Clone, Default)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            columns: columns.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(&self.columns.join(","));
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|v| format_float(*v)).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    /// Long format: one (x, series, value) row per cell, first column as x.
    pub fn to_long_csv(&self) -> String {
        let mut out = String::from("x,series,value\n");
        for row in &self.rows {
            for (c, name) in self.columns.iter().enumerate().skip(1) {
                out.push_str(&format!(
                    "{},{},{}\n",
                    format_float(row[0]),
                    name,
                    format_float(row[c])
                ));
            }
        }
        out
    }
}

/// Shortest-round-trip float formatting; deterministic across runs.
pub fn format_float(v: f64) -> String {
    if v == v.trunc() && v.abs() < 1e15 {
        format!("{v:.1}")
    } else {
        format!("{v}")
    }
}

/// The four files every experiment writes.
#[derive(Debug, Clone, Serialize)]
pub struct ArtifactPaths {
    pub config: PathBuf,
    pub results: PathBuf,
    pub fit_summary: PathBuf,
    pub results_long: PathBuf,
}

pub fn write_artifacts<C: Serialize, F: Serialize>(
    outdir: &Path,
    name: &str,
    config: &C,
    table: &Table,
    fit_summary: &F,
) -> Result<ArtifactPaths> {
    fs::create_dir_all(outdir)?;
    let paths = ArtifactPaths {
        config: outdir.join(format!("{name}_config.json")),
        results: outdir.join(format!("{name}_results.csv")),
        fit_summary: outdir.join(format!("{name}_fit.json")),
        results_long: outdir.join(format!("{name}_results_long.csv")),
    };
    fs::write(&paths.config, serde_json::to_string_pretty(config)?)?;
    fs::write(&paths.results, table.to_csv())?;
    fs::write(&paths.fit_summary, serde_json::to_string_pretty(fit_summary)?)?;
    fs::write(&paths.results_long, table.to_long_csv())?;
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_shape_and_determinism() {
        let mut t = Table::new(&["frequency_hz", "integrated_signal", "stderr_over_configs"]);
        t.push(vec![2000.0, 0.999, 0.001]);
        t.push(vec![3425.0, 0.83, 0.002]);
        let a = t.to_csv();
        let b = t.to_csv();
        assert_eq!(a, b);
        assert!(a.starts_with("frequency_hz,integrated_signal,stderr_over_configs\n"));
        assert_eq!(a.lines().count(), 3);
    }
}
