//! Versioned CSV reports and verdict lines.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::config::{RunSpec, CSV_MARKER};
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail,
    /// Reported quantity with no pass/fail threshold.
    Info,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Info => "INFO",
        })
    }
}

/// Outcome of one comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct Verdict {
    pub comparison: String,
    pub status: Status,
    pub value: f64,
    pub tolerance: f64,
    pub detail: String,
}

impl Verdict {
    /// PASS when `value < tolerance` (NaN fails).
    pub fn below(comparison: &str, value: f64, tolerance: f64, detail: impl Into<String>) -> Self {
        let status = if value < tolerance { Status::Pass } else { Status::Fail };
        Self { comparison: comparison.into(), status, value, tolerance, detail: detail.into() }
    }

    pub fn check(comparison: &str, ok: bool, value: f64, tolerance: f64, detail: impl Into<String>) -> Self {
        let status = if ok { Status::Pass } else { Status::Fail };
        Self { comparison: comparison.into(), status, value, tolerance, detail: detail.into() }
    }

    pub fn info(comparison: &str, value: f64, detail: impl Into<String>) -> Self {
        Self { comparison: comparison.into(), status: Status::Info, value, tolerance: f64::NAN, detail: detail.into() }
    }

    pub fn line(&self, command: &str) -> String {
        let mut s = format!("VERDICT {command} {} {} value={:e}", self.comparison, self.status, self.value);
        if !self.tolerance.is_nan() {
            s.push_str(&format!(" tol={:e}", self.tolerance));
        }
        if !self.detail.is_empty() {
            s.push(' ');
            s.push_str(&self.detail);
        }
        s
    }
}

/// Tabular result of one subcommand plus its verdicts.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub spec: RunSpec,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
    pub verdicts: Vec<Verdict>,
    /// Extra tables written as `<stem>.<suffix>.csv`.
    pub attachments: Vec<Attachment>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Attachment {
    pub suffix: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

/// Shortest round-trip text of a float.
pub fn num(x: f64) -> String {
    x.to_string()
}

impl Report {
    pub fn new(spec: &RunSpec, columns: &[&str]) -> Self {
        Self {
            spec: spec.clone(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
            verdicts: Vec::new(),
            attachments: Vec::new(),
        }
    }

    pub fn row(&mut self, cells: Vec<String>) {
        debug_assert_eq!(cells.len(), self.columns.len());
        self.rows.push(cells);
    }

    pub fn verdict(&mut self, v: Verdict) {
        self.verdicts.push(v);
    }

    pub fn passed(&self) -> bool {
        self.verdicts.iter().all(|v| v.status != Status::Fail)
    }

    fn header(&self) -> String {
        let mut h = format!("{CSV_MARKER}\n#@ ipsdual {}\n", env!("CARGO_PKG_VERSION"));
        if let Some(seed) = self.spec.values.get("seed") {
            h.push_str(&format!("#@ seed {seed}\n"));
        }
        for l in self.spec.to_config().lines() {
            h.push_str(&format!("# {l}\n"));
        }
        h
    }

    fn write_table(path: &Path, header: &str, columns: &[String], rows: &[Vec<String>]) -> Result<(), CliError> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir)?;
        }
        let mut f = fs::File::create(path)?;
        f.write_all(header.as_bytes())?;
        let mut w = csv::Writer::from_writer(f);
        w.write_record(columns)?;
        for r in rows {
            w.write_record(r)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Writes the table to `path` and the verdicts next to it as
    /// `<stem>.verdicts.csv`; returns both paths.
    pub fn write(&self, path: &Path) -> Result<(PathBuf, PathBuf), CliError> {
        let header = self.header();
        Self::write_table(path, &header, &self.columns, &self.rows)?;
        let vpath = verdict_path(path);
        let cols: Vec<String> = ["comparison", "status", "value", "tolerance", "detail"].iter().map(|s| s.to_string()).collect();
        let rows: Vec<Vec<String>> = self
            .verdicts
            .iter()
            .map(|v| vec![v.comparison.clone(), v.status.to_string(), num(v.value), num(v.tolerance), v.detail.clone()])
            .collect();
        Self::write_table(&vpath, &header, &cols, &rows)?;
        for a in &self.attachments {
            Self::write_table(&sibling(path, &a.suffix), &header, &a.columns, &a.rows)?;
        }
        Ok((path.to_path_buf(), vpath))
    }
}

pub fn verdict_path(path: &Path) -> PathBuf {
    sibling(path, "verdicts")
}

/// `<dir>/<stem>.<suffix>.csv` next to `path`.
pub fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}.{suffix}.csv"))
}

/// Reads the data rows of a report, skipping its comment header.
pub fn read_rows(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>), CliError> {
    let text = fs::read_to_string(path)?;
    let body: String = text.lines().skip_while(|l| l.starts_with('#')).map(|l| format!("{l}\n")).collect();
    let mut r = csv::Reader::from_reader(body.as_bytes());
    let cols = r.headers()?.iter().map(String::from).collect();
    let rows = r.records().map(|rec| rec.map(|x| x.iter().map(String::from).collect())).collect::<Result<_, _>>()?;
    Ok((cols, rows))
}
