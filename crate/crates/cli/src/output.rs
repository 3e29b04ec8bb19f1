use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};
use vsim_core::ensemble::EnsembleCurve;
use vsim_core::{Result, SimError};

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Cell {
    Num(f64),
    Text(String),
}

impl std::fmt::Display for Cell {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Cell::Num(v) if *v == 0.0 || (1e-4..1e15).contains(&v.abs()) => write!(f, "{v}"),
            Cell::Num(v) => write!(f, "{v:e}"),
            Cell::Text(s) => f.write_str(s),
        }
    }
}

/// A named table written as CSV (and optionally JSON).
#[derive(Debug, Clone, Serialize)]
pub struct Table {
    #[serde(skip)]
    pub stem: String,
    pub scenario_hash: String,
    pub metadata: BTreeMap<String, String>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
    #[serde(skip)]
    pub log_axes: (bool, bool),
}

impl Table {
    pub fn new(stem: &str, scenario_hash: &str, columns: Vec<String>) -> Self {
        Self {
            stem: stem.into(),
            scenario_hash: scenario_hash.into(),
            metadata: BTreeMap::new(),
            columns,
            rows: Vec::new(),
            log_axes: (false, false),
        }
    }

    pub fn from_curves(stem: &str, scenario_hash: &str, curves: &[&EnsembleCurve]) -> Self {
        let first = curves[0];
        let mut columns = vec![first.abscissa.label()];
        let mut data: Vec<&[f64]> = vec![&first.abscissa.values];
        let mut t = Table::new(stem, scenario_hash, Vec::new());
        for c in curves {
            for s in &c.series {
                columns.push(s.label());
                data.push(&s.values);
            }
            for (k, v) in &c.metadata {
                if k != "scenario_hash" {
                    t.metadata.insert(k.clone(), v.clone());
                }
            }
        }
        t.columns = columns;
        t.rows = (0..first.abscissa.values.len()).map(|i| data.iter().map(|col| Cell::Num(col[i])).collect()).collect();
        t
    }

    pub fn meta(mut self, key: &str, value: impl ToString) -> Self {
        self.metadata.insert(key.into(), value.to_string());
        self
    }

    pub fn csv(&self) -> String {
        let mut s = format!("# scenario_hash={}\n", self.scenario_hash);
        for (k, v) in &self.metadata {
            s.push_str(&format!("# {k}={v}\n"));
        }
        s.push_str(&self.columns.join(","));
        s.push('\n');
        for r in &self.rows {
            let line: Vec<String> = r.iter().map(Cell::to_string).collect();
            s.push_str(&line.join(","));
            s.push('\n');
        }
        s
    }

    pub fn json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("table serializes");
        s.push('\n');
        s
    }

    pub fn gnuplot(&self) -> String {
        let n = self.columns.len();
        let mut s = String::from("set datafile separator ','\nset key autotitle columnhead\n");
        if self.log_axes.0 {
            s.push_str("set logscale x\n");
        }
        if self.log_axes.1 {
            s.push_str("set logscale y\n");
        }
        s.push_str(&format!("set xlabel '{}'\n", self.columns[0]));
        let numeric = |i: usize| self.rows.first().map_or(true, |r| matches!(r[i], Cell::Num(_)));
        let ys: Vec<usize> = (1..n).filter(|&i| numeric(i)).collect();
        let plots: Vec<String> = ys.iter().map(|i| format!("'{}.csv' using 1:{} with lines", self.stem, i + 1)).collect();
        s.push_str(&format!("plot {}\npause -1\n", plots.join(", \\\n     ")));
        s
    }
}

/// Writes outputs into one directory and records their digests.
pub struct OutputDir {
    dir: PathBuf,
    files: Vec<(String, String)>,
}

#[derive(Serialize)]
struct FileEntry<'a> {
    file: &'a str,
    sha256: &'a str,
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'a str,
    version: &'a str,
    subcommand: &'a str,
    scenario_hash: &'a str,
    seed: u64,
    started_unix_s: u64,
    finished_unix_s: u64,
    outputs: Vec<FileEntry<'a>>,
}

pub fn io_error(path: &Path, source: std::io::Error) -> SimError {
    SimError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Seconds since the epoch, pinned by SOURCE_DATE_EPOCH when set.
pub fn timestamp() -> u64 {
    if let Some(v) = std::env::var("SOURCE_DATE_EPOCH").ok().and_then(|s| s.trim().parse().ok()) {
        return v;
    }
    std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

impl OutputDir {
    pub fn create(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, bytes).map_err(|e| io_error(&path, e))?;
        self.files.push((name.into(), hex::encode(Sha256::digest(bytes))));
        Ok(())
    }

    pub fn table(&mut self, t: &Table, json: bool, gnuplot: bool) -> Result<()> {
        self.write(&format!("{}.csv", t.stem), t.csv().as_bytes())?;
        if json {
            self.write(&format!("{}.json", t.stem), t.json().as_bytes())?;
        }
        if gnuplot {
            self.write(&format!("{}.gp", t.stem), t.gnuplot().as_bytes())?;
        }
        Ok(())
    }

    pub fn finish(self, subcommand: &str, scenario_hash: &str, seed: u64, started: u64) -> Result<()> {
        let manifest = Manifest {
            tool: "vsim-odmr",
            version: env!("CARGO_PKG_VERSION"),
            subcommand,
            scenario_hash,
            seed,
            started_unix_s: started,
            finished_unix_s: timestamp(),
            outputs: self.files.iter().map(|(f, h)| FileEntry { file: f, sha256: h }).collect(),
        };
        let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        text.push('\n');
        let path = self.dir.join("manifest.json");
        fs::write(&path, text).map_err(|e| io_error(&path, e))
    }
}
