//! Run reports and the files they describe.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;

use crate::config::{Command, RunConfig};
use crate::CliError;

/// Numbers are written with 17 significant digits, which round-trips `f64`.
pub fn format_number(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{v:.16e}")
    }
}

#[derive(Clone, Copy, Debug)]
pub enum Cell {
    Int(usize),
    Num(f64),
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v)
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Int(v as usize)
    }
}

#[derive(Clone, Debug)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            columns: columns.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.columns).expect("writing to memory");
        for row in &self.rows {
            w.write_record(row.iter().map(|cell| match *cell {
                Cell::Int(v) => v.to_string(),
                Cell::Num(v) => format_number(v),
            }))
            .expect("writing to memory");
        }
        String::from_utf8(w.into_inner().expect("flushing to memory")).expect("CSV output is UTF-8")
    }
}

/// A file produced by a run, held in memory until it is written.
#[derive(Clone, Debug)]
pub struct OutputFile {
    pub name: String,
    pub contents: String,
    pub entry: ManifestEntry,
}

impl OutputFile {
    pub fn csv(name: &str, t: &Table) -> Self {
        Self {
            name: name.into(),
            contents: t.to_csv(),
            entry: ManifestEntry {
                path: name.into(),
                format: "csv".into(),
                rows: t.rows.len(),
                columns: t.columns.clone(),
            },
        }
    }

    pub fn json<T: Serialize>(name: &str, value: &T) -> Self {
        let mut contents = serde_json::to_string_pretty(value).expect("output values serialize");
        contents.push('\n');
        Self {
            name: name.into(),
            contents,
            entry: ManifestEntry {
                path: name.into(),
                format: "json".into(),
                rows: 0,
                columns: Vec::new(),
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, serde::Deserialize)]
pub struct ManifestEntry {
    /// Relative to the output directory.
    pub path: String,
    pub format: String,
    /// Data rows (CSV only).
    pub rows: usize,
    pub columns: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, serde::Deserialize)]
pub struct InvariantCheck {
    pub name: String,
    pub passed: bool,
    /// Measured quantity, compared against `tol` when both are present.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(skip_serializing_if = "String::is_empty")]
    pub detail: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunReport {
    pub command: Command,
    pub config: RunConfig,
    pub scalars: BTreeMap<String, f64>,
    pub flags: BTreeMap<String, bool>,
    pub series: BTreeMap<String, Vec<f64>>,
    pub sets: BTreeMap<String, Vec<usize>>,
    pub manifest: Vec<ManifestEntry>,
    pub invariants: Vec<InvariantCheck>,
    /// Solver error that stopped the run early.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub passed: bool,
    pub wall_clock_seconds: f64,
}

impl RunReport {
    pub fn new(command: Command, config: RunConfig) -> Self {
        Self {
            command,
            config,
            scalars: BTreeMap::new(),
            flags: BTreeMap::new(),
            series: BTreeMap::new(),
            sets: BTreeMap::new(),
            manifest: Vec::new(),
            invariants: Vec::new(),
            error: None,
            passed: false,
            wall_clock_seconds: 0.0,
        }
    }

    pub fn scalar(&mut self, name: &str, v: f64) {
        self.scalars.insert(name.into(), v);
    }

    pub fn flag(&mut self, name: &str, v: bool) {
        self.flags.insert(name.into(), v);
    }

    pub fn series(&mut self, name: &str, v: Vec<f64>) {
        self.series.insert(name.into(), v);
    }

    pub fn set(&mut self, name: &str, v: Vec<usize>) {
        self.sets.insert(name.into(), v);
    }

    /// Records `value <= tol`.
    pub fn bound(&mut self, name: &str, value: f64, tol: f64) {
        self.invariants.push(InvariantCheck {
            name: name.into(),
            passed: value <= tol,
            value: Some(value),
            tol: Some(tol),
            detail: String::new(),
        });
    }

    pub fn holds(&mut self, name: &str, passed: bool, detail: impl Into<String>) {
        self.invariants.push(InvariantCheck {
            name: name.into(),
            passed,
            value: None,
            tol: None,
            detail: detail.into(),
        });
    }

    pub fn finish(&mut self) {
        self.passed = self.error.is_none() && self.invariants.iter().all(|c| c.passed);
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("reports serialize");
        s.push('\n');
        s
    }
}

/// Writes every file and `report.json` into `dir`, listing the files in the manifest.
pub fn write_outputs(dir: &Path, files: &[OutputFile], report: &mut RunReport) -> Result<(), CliError> {
    let write = |path: &Path, contents: &str| {
        std::fs::write(path, contents).map_err(|source| CliError::Write {
            path: path.display().to_string(),
            source,
        })
    };
    std::fs::create_dir_all(dir).map_err(|source| CliError::Write {
        path: dir.display().to_string(),
        source,
    })?;
    report.manifest.clear();
    for f in files {
        write(&dir.join(&f.name), &f.contents)?;
        report.manifest.push(f.entry.clone());
    }
    write(&dir.join("report.json"), &report.to_json())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_round_trip() {
        for v in [0.1, -1.0 / 3.0, 1e-300, 6.02e23, 0.0, -0.0, f64::MIN_POSITIVE] {
            let s = format_number(v);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), v.to_bits(), "{s}");
        }
        assert_eq!(format_number(f64::INFINITY), "inf");
        assert_eq!(format_number(0.5), "5.0000000000000000e-1");
    }

    #[test]
    fn csv_layout() {
        let mut t = Table::new(&["x", "u"]);
        t.push(vec![0.into(), 1.5.into()]);
        t.push(vec![1.into(), true.into()]);
        assert_eq!(t.to_csv(), "x,u\n0,1.5000000000000000e0\n1,1\n");
    }
}
