//! Machine-readable run artifacts: JSON summaries with per-criterion
//! pass/fail entries and CSV tables.

use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::kernels::Configuration;
use serde::Serialize;
use std::path::Path;

/// One asserted quantity of a run.
#[derive(Debug, Clone, Serialize)]
pub struct CriterionResult {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl CriterionResult {
    /// Passes when `value <= tolerance` (residual-style criteria).
    pub fn at_most(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        CriterionResult {
            name: name.into(),
            value,
            tolerance,
            pass: value.is_finite() && value <= tolerance,
        }
    }

    /// Passes when `value >= tolerance` (coverage-style criteria).
    pub fn at_least(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        CriterionResult {
            name: name.into(),
            value,
            tolerance,
            pass: value.is_finite() && value >= tolerance,
        }
    }

    /// Passes when `|value - target| <= band`; records the absolute deviation.
    pub fn within(name: impl Into<String>, value: f64, target: f64, band: f64) -> Self {
        CriterionResult {
            name: name.into(),
            value: (value - target).abs(),
            tolerance: band,
            pass: value.is_finite() && (value - target).abs() <= band,
        }
    }
}

/// Summary written as JSON next to each run's CSV artifacts.
#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub command: String,
    pub config: ExperimentConfig,
    pub seed: u64,
    pub criteria: Vec<CriterionResult>,
    pub wall_time_s: f64,
}

impl RunSummary {
    pub fn new(command: impl Into<String>, config: &ExperimentConfig) -> Self {
        RunSummary {
            command: command.into(),
            seed: config.sampler.seed,
            config: config.clone(),
            criteria: Vec::new(),
            wall_time_s: 0.0,
        }
    }

    pub fn push(&mut self, c: CriterionResult) {
        self.criteria.push(c);
    }

    pub fn all_pass(&self) -> bool {
        self.criteria.iter().all(|c| c.pass)
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        let text =
            serde_json::to_string_pretty(self).map_err(|e| Error::Io(std::io::Error::other(e)))?;
        std::fs::write(path, text + "\n")?;
        Ok(())
    }
}

/// Write a rectangular CSV table.
pub fn write_csv<I>(path: &Path, header: &[&str], rows: I) -> Result<()>
where
    I: IntoIterator<Item = Vec<String>>,
{
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Io(std::io::Error::other(e)))?;
    w.write_record(header)
        .map_err(|e| Error::Io(std::io::Error::other(e)))?;
    for row in rows {
        w.write_record(&row)
            .map_err(|e| Error::Io(std::io::Error::other(e)))?;
    }
    w.flush().map_err(Error::Io)?;
    Ok(())
}

/// One configuration per row, variable length.
pub fn write_configurations_csv(path: &Path, samples: &[Configuration]) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .flexible(true)
        .from_path(path)
        .map_err(|e| Error::Io(std::io::Error::other(e)))?;
    for c in samples {
        let row: Vec<String> = c.points().iter().map(|x| format!("{x:.17e}")).collect();
        w.write_record(&row)
            .map_err(|e| Error::Io(std::io::Error::other(e)))?;
    }
    w.flush().map_err(Error::Io)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn criterion_directions() {
        assert!(CriterionResult::at_most("r", 1e-10, 1e-9).pass);
        assert!(!CriterionResult::at_most("r", 1e-8, 1e-9).pass);
        assert!(CriterionResult::at_least("f", 0.97, 0.95).pass);
        assert!(CriterionResult::within("w", 2.05, 2.0, 0.1).pass);
        assert!(!CriterionResult::at_most("nan", f64::NAN, 1.0).pass);
    }

    #[test]
    fn configurations_roundtrip_bytes() {
        let dir = std::env::temp_dir().join("detproc-report-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("samples.csv");
        let samples = vec![
            Configuration::new(vec![0.25, -1.0], (-2.0, 2.0)).unwrap(),
            Configuration::empty((-2.0, 2.0)),
            Configuration::new(vec![1.5], (-2.0, 2.0)).unwrap(),
        ];
        write_configurations_csv(&path, &samples).unwrap();
        let a = std::fs::read(&path).unwrap();
        write_configurations_csv(&path, &samples).unwrap();
        let b = std::fs::read(&path).unwrap();
        assert_eq!(a, b);
    }
}
