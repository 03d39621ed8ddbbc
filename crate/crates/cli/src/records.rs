//! Result records (JSON lines), curve CSVs and the run manifest.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sinhgordon::stats::{merge_results, EstimatorResult};

use crate::config::RunConfig;
use crate::error::CliError;

/// One estimate. `extra` holds estimate-specific diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub experiment: String,
    pub label: String,
    pub fingerprint: String,
    pub estimate: f64,
    pub std_error: f64,
    pub n_samples: u64,
    pub seed: u64,
    pub wall_ms: u64,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub extra: BTreeMap<String, Value>,
}

impl Record {
    pub fn from_result(experiment: &str, label: impl Into<String>, r: &EstimatorResult) -> Self {
        Record {
            experiment: experiment.to_string(),
            label: label.into(),
            fingerprint: r.fingerprint.clone(),
            estimate: r.mean,
            std_error: r.std_error,
            n_samples: r.n_samples,
            seed: r.seed,
            wall_ms: r.wall_ms,
            extra: BTreeMap::new(),
        }
    }

    pub fn with(mut self, key: &str, v: impl Into<Value>) -> Self {
        self.extra.insert(key.to_string(), v.into());
        self
    }

    pub fn to_result(&self) -> EstimatorResult {
        EstimatorResult {
            mean: self.estimate,
            std_error: self.std_error,
            n_samples: self.n_samples,
            seed: self.seed,
            fingerprint: self.fingerprint.clone(),
            wall_ms: self.wall_ms,
        }
    }
}

/// A curve written as CSV with a header row.
#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Curve {
    pub fn new(name: &str, header: &[&str]) -> Self {
        Curve { name: name.to_string(), header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf, CliError> {
        let path = dir.join(format!("{}.csv", self.name));
        let mut w = csv::Writer::from_path(&path).map_err(|e| CliError::Runtime(e.to_string()))?;
        w.write_record(&self.header).map_err(|e| CliError::Runtime(e.to_string()))?;
        for r in &self.rows {
            w.write_record(r.iter().map(|v| v.to_string())).map_err(|e| CliError::Runtime(e.to_string()))?;
        }
        w.flush()?;
        Ok(path)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub experiment: String,
    pub seed: u64,
    pub workers: usize,
    pub fast: bool,
    pub config: RunConfig,
    pub wall_ms: u64,
    pub records: usize,
    pub files: Vec<String>,
    pub passed: bool,
    /// How replicas share random numbers, when they do.
    pub coupling: Vec<String>,
}

pub fn write_records(path: &Path, records: &[Record]) -> Result<(), CliError> {
    let mut f = fs::File::create(path)?;
    for r in records {
        let line = serde_json::to_string(r).map_err(|e| CliError::Runtime(e.to_string()))?;
        writeln!(f, "{line}")?;
    }
    Ok(())
}

pub fn read_records(path: &Path) -> Result<Vec<Record>, CliError> {
    let f = fs::File::open(path)?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let r: Record = serde_json::from_str(&line)
            .map_err(|e| CliError::Runtime(format!("{}:{}: {e}", path.display(), i + 1)))?;
        out.push(r);
    }
    Ok(out)
}

/// Merge records sharing (experiment, label), in order of first appearance.
pub fn merge_records(records: &[Record]) -> Result<Vec<Record>, CliError> {
    let mut keys: Vec<(String, String)> = Vec::new();
    for r in records {
        let k = (r.experiment.clone(), r.label.clone());
        if !keys.contains(&k) {
            keys.push(k);
        }
    }
    keys.iter()
        .map(|(e, l)| {
            let group: Vec<&Record> = records.iter().filter(|r| &r.experiment == e && &r.label == l).collect();
            let results: Vec<EstimatorResult> = group.iter().map(|r| r.to_result()).collect();
            let m = merge_results(&results)?;
            Ok(Record::from_result(e, l.clone(), &m))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(label: &str, mean: f64, se: f64, n: u64, fp: &str) -> Record {
        Record {
            experiment: "gmc-mass".into(),
            label: label.into(),
            fingerprint: fp.into(),
            estimate: mean,
            std_error: se,
            n_samples: n,
            seed: 1,
            wall_ms: 0,
            extra: BTreeMap::new(),
        }
    }

    #[test]
    fn json_roundtrip() {
        let r = rec("a", 1.5, 0.1, 10, "x").with("target", 2.0).with("pass", true);
        let s = serde_json::to_string(&r).unwrap();
        assert_eq!(serde_json::from_str::<Record>(&s).unwrap(), r);
    }

    #[test]
    fn merge_groups_by_label() {
        let rs = vec![rec("a", 1.0, 0.1, 10, "x"), rec("b", 5.0, 0.2, 10, "x"), rec("a", 1.0, 0.1, 10, "x")];
        let m = merge_records(&rs).unwrap();
        assert_eq!(m.len(), 2);
        assert_eq!(m[0].n_samples, 20);
        assert!((m[0].std_error - 0.1 / 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn merge_rejects_mixed_fingerprints() {
        let rs = vec![rec("a", 1.0, 0.1, 10, "x"), rec("a", 1.0, 0.1, 10, "y")];
        assert!(merge_records(&rs).is_err());
    }

    #[test]
    fn curve_csv_has_header() {
        let dir = std::env::temp_dir().join(format!("shg-curve-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        let mut c = Curve::new("demo", &["x", "y"]);
        c.push(vec![1.0, 2.5]);
        let p = c.write(&dir).unwrap();
        assert_eq!(fs::read_to_string(p).unwrap(), "x,y\n1,2.5\n");
        fs::remove_dir_all(dir).ok();
    }
}
