//! CSV, report and manifest writers.

use std::fs;
use std::path::{Path, PathBuf};

use rmt_eth_lab::experiments::{
    CltRow, CovarianceRow, DbmRow, DensityRow, EquipartitionRow, ErrorScalingRecord, EthRow, QuantileRow, Verdict,
};
use serde::Serialize;
use serde_json::Value;

use crate::Failure;

/// Floats carry 17 significant digits; `{:e}` is locale-independent.
pub fn float(x: f64) -> String {
    format!("{x:.16e}")
}

/// A row type with a fixed CSV header.
pub trait CsvRow {
    const HEADER: &'static [&'static str];
    fn record(&self) -> Vec<String>;
}

impl CsvRow for DensityRow {
    const HEADER: &'static [&'static str] = &["e", "rho", "cumulative"];
    fn record(&self) -> Vec<String> {
        vec![float(self.e), float(self.rho), float(self.cumulative)]
    }
}

impl CsvRow for QuantileRow {
    const HEADER: &'static [&'static str] = &["i", "gamma"];
    fn record(&self) -> Vec<String> {
        vec![self.i.to_string(), float(self.gamma)]
    }
}

impl CsvRow for EthRow {
    const HEADER: &'static [&'static str] = &["sample", "N", "max_stat"];
    fn record(&self) -> Vec<String> {
        vec![self.sample.to_string(), self.n.to_string(), float(self.max_stat)]
    }
}

impl CsvRow for CltRow {
    const HEADER: &'static [&'static str] = &["sample", "index", "N", "x_standardized", "x_raw", "var_theory"];
    fn record(&self) -> Vec<String> {
        vec![
            self.sample.to_string(),
            self.index.to_string(),
            self.n.to_string(),
            float(self.x_standardized),
            float(self.x_raw),
            float(self.var_theory),
        ]
    }
}

impl CsvRow for EquipartitionRow {
    const HEADER: &'static [&'static str] = &["sample", "index", "l", "x_l", "lambda_i"];
    fn record(&self) -> Vec<String> {
        vec![
            self.sample.to_string(),
            self.index.to_string(),
            self.l.to_string(),
            float(self.x_l),
            float(self.lambda_i),
        ]
    }
}

impl CsvRow for CovarianceRow {
    const HEADER: &'static [&'static str] = &["l", "m", "empirical", "predicted"];
    fn record(&self) -> Vec<String> {
        vec![self.l.to_string(), self.m.to_string(), float(self.empirical), float(self.predicted)]
    }
}

impl CsvRow for ErrorScalingRecord {
    const HEADER: &'static [&'static str] = &["k", "kind", "N", "eta", "observed", "predicted", "ratio"];
    fn record(&self) -> Vec<String> {
        vec![
            self.k.to_string(),
            self.kind.to_string(),
            self.n.to_string(),
            float(self.eta),
            float(self.observed),
            float(self.predicted),
            float(self.ratio),
        ]
    }
}

impl CsvRow for DbmRow {
    const HEADER: &'static [&'static str] = &["run", "t", "stat"];
    fn record(&self) -> Vec<String> {
        vec![self.run.to_string(), float(self.t), float(self.stat)]
    }
}

/// Collects written files so the manifest can list them.
pub struct OutputDir {
    pub root: PathBuf,
    pub written: Vec<PathBuf>,
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self, Failure> {
        fs::create_dir_all(root)
            .map_err(|e| Failure::Usage(format!("cannot create output directory {}: {e}", root.display())))?;
        Ok(Self { root: root.to_path_buf(), written: Vec::new() })
    }

    pub fn csv<R: CsvRow>(&mut self, name: &str, rows: &[R]) -> Result<(), Failure> {
        let path = self.root.join(name);
        let mut w = csv::Writer::from_path(&path).map_err(|e| io_failure(&path, e))?;
        w.write_record(R::HEADER).map_err(|e| io_failure(&path, e))?;
        for r in rows {
            w.write_record(r.record()).map_err(|e| io_failure(&path, e))?;
        }
        w.flush().map_err(|e| io_failure(&path, e))?;
        self.written.push(path);
        Ok(())
    }

    /// Pretty JSON of `value` with the listed row arrays removed.
    pub fn report<T: Serialize>(&mut self, name: &str, value: &T, drop: &[&str]) -> Result<(), Failure> {
        let mut v = serde_json::to_value(value).map_err(|e| Failure::Numerical(e.to_string()))?;
        if let Value::Object(map) = &mut v {
            for key in drop {
                map.remove(*key);
            }
        }
        self.json(name, &v)
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), Failure> {
        let path = self.root.join(name);
        let text = serde_json::to_string_pretty(value).map_err(|e| Failure::Numerical(e.to_string()))?;
        fs::write(&path, text + "\n").map_err(|e| io_failure(&path, e))?;
        self.written.push(path);
        Ok(())
    }
}

fn io_failure(path: &Path, e: impl std::fmt::Display) -> Failure {
    Failure::Usage(format!("cannot write {}: {e}", path.display()))
}

/// Verdicts of one experiment.
#[derive(Serialize)]
pub struct ExperimentVerdicts {
    pub experiment: &'static str,
    pub verdicts: Vec<Verdict>,
}

#[derive(Serialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub tool_version: &'static str,
    pub started_at: String,
    pub finished_at: String,
    pub threads: usize,
    pub experiments: Vec<&'static str>,
    pub outputs: Vec<String>,
    pub verdicts: Vec<ExperimentVerdicts>,
    pub config: Value,
}
