//! Reading and writing run artifacts.
//!
//! CSV floats are written with `Display`, which round-trips exactly, so a stage that
//! reloads an artifact sees the same bits the producing stage held in memory.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

pub struct ArtifactDir {
    root: PathBuf,
}

impl ArtifactDir {
    pub fn create(root: &Path) -> Result<Self> {
        std::fs::create_dir_all(root).map_err(|e| io_err(root, e))?;
        Ok(ArtifactDir { root: root.to_path_buf() })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn write_csv<I>(&self, name: &str, header: &[&str], rows: I) -> Result<()>
    where
        I: IntoIterator<Item = Vec<String>>,
    {
        let path = self.path(name);
        let mut w = csv::Writer::from_path(&path).map_err(|e| io_err(&path, e))?;
        w.write_record(header).map_err(|e| io_err(&path, e))?;
        for row in rows {
            w.write_record(&row).map_err(|e| io_err(&path, e))?;
        }
        w.flush().map_err(|e| io_err(&path, e))
    }

    /// Two-column numeric table.
    pub fn write_pairs(&self, name: &str, header: [&str; 2], xs: &[f64], ys: &[f64]) -> Result<()> {
        self.write_csv(name, &header, xs.iter().zip(ys).map(|(x, y)| vec![x.to_string(), y.to_string()]))
    }

    pub fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<()> {
        let path = self.path(name);
        let file = File::create(&path).map_err(|e| io_err(&path, e))?;
        let mut w = BufWriter::new(file);
        serde_json::to_writer_pretty(&mut w, value).map_err(|e| io_err(&path, e))?;
        w.write_all(b"\n").map_err(|e| io_err(&path, e))?;
        w.flush().map_err(|e| io_err(&path, e))
    }

    pub fn write_text(&self, name: &str, text: &str) -> Result<()> {
        let path = self.path(name);
        std::fs::write(&path, text).map_err(|e| io_err(&path, e))
    }

    fn open(&self, stage: &str, name: &str) -> Result<File> {
        let path = self.path(name);
        File::open(&path).map_err(|e| CliError::Dependency {
            stage: stage.into(),
            file: name.into(),
            msg: format!("cannot open {} ({e}); run the producing stage first", path.display()),
        })
    }

    fn malformed(stage: &str, name: &str, msg: impl std::fmt::Display) -> CliError {
        CliError::Dependency { stage: stage.into(), file: name.into(), msg: format!("malformed artifact: {msg}") }
    }

    /// Numeric columns of a CSV artifact whose header must equal `header`.
    pub fn read_columns(&self, stage: &str, name: &str, header: &[&str]) -> Result<Vec<Vec<f64>>> {
        let file = self.open(stage, name)?;
        let mut r = csv::Reader::from_reader(file);
        let found = r.headers().map_err(|e| Self::malformed(stage, name, e))?.clone();
        if found.iter().ne(header.iter().copied()) {
            return Err(Self::malformed(stage, name, format!("header {:?}, expected {header:?}", found)));
        }
        let mut cols = vec![Vec::new(); header.len()];
        for (line, rec) in r.records().enumerate() {
            let rec = rec.map_err(|e| Self::malformed(stage, name, e))?;
            for (col, field) in cols.iter_mut().zip(rec.iter()) {
                let v = field
                    .parse::<f64>()
                    .map_err(|_| Self::malformed(stage, name, format!("row {}: '{field}' is not a number", line + 2)))?;
                col.push(v);
            }
        }
        Ok(cols)
    }

    pub fn read_json<T: DeserializeOwned>(&self, stage: &str, name: &str) -> Result<T> {
        let file = self.open(stage, name)?;
        serde_json::from_reader(file).map_err(|e| Self::malformed(stage, name, e))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct DiagnosticsFile {
    pub chi: f64,
    pub eigen_residual: f64,
    pub invariance_residual: f64,
    pub iterations: usize,
    pub spectral_gap_est: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ExpansionFile {
    pub rho0_hat: f64,
    pub rho_v_hat: f64,
    pub rho1: f64,
}

/// The fields of a compatibility report that later stages read back.
#[derive(Debug, Clone, Deserialize, PartialEq)]
pub struct CompatEntry {
    pub c: f64,
    pub c1: f64,
    pub liminf_estimate: f64,
    pub verdict: String,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let a = ArtifactDir::create(dir.path()).unwrap();
        let xs = [0.0, 1.0 / 3.0, 1e-300, 0.1 + 0.2];
        let ys = [std::f64::consts::PI, -2.5e17, 7.0, f64::MIN_POSITIVE];
        a.write_pairs("t.csv", ["x", "value"], &xs, &ys).unwrap();
        let cols = a.read_columns("test", "t.csv", &["x", "value"]).unwrap();
        assert_eq!(cols[0], xs);
        assert_eq!(cols[1], ys);
    }

    #[test]
    fn missing_and_malformed_artifacts_name_the_file() {
        let dir = tempfile::tempdir().unwrap();
        let a = ArtifactDir::create(dir.path()).unwrap();
        let err = a.read_columns("gibbs", "h.csv", &["x", "value"]).unwrap_err().to_string();
        assert!(err.contains("h.csv") && err.contains("gibbs"), "{err}");
        a.write_text("bad.csv", "x,value\n0,zero\n").unwrap();
        let err = a.read_columns("thermo", "bad.csv", &["x", "value"]).unwrap_err().to_string();
        assert!(err.contains("row 2"), "{err}");
        let err = a.read_columns("thermo", "bad.csv", &["x", "y"]).unwrap_err().to_string();
        assert!(err.contains("header"), "{err}");
    }

    #[test]
    fn json_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let a = ArtifactDir::create(dir.path()).unwrap();
        let e = ExpansionFile { rho0_hat: 0.25, rho_v_hat: 0.0625, rho1: 0.125 };
        a.write_json("expansion.json", &e).unwrap();
        assert_eq!(a.read_json::<ExpansionFile>("gibbs", "expansion.json").unwrap(), e);
    }
}
