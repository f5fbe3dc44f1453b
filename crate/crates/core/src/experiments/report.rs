//! Sweep reports and their CSV form.
//!
//! Columns, in order:
//!
//! | column                 | meaning                                                    |
//! |------------------------|------------------------------------------------------------|
//! | `dataset`              | dataset name                                               |
//! | `kind`                 | `aggregate`, `model`, `rung` or `error`                    |
//! | `arm`                  | `original`, `proposed`, or a weight distribution name      |
//! | `L`                    | hidden units                                               |
//! | `seed`                 | weight seed (selected model) or the experiment seed        |
//! | `ladder_step`          | precision-ladder step of the integer output weights        |
//! | `val_accuracy`         | fraction in [0, 1]                                         |
//! | `test_accuracy`        | fraction in [0, 1]; the mean for `weights` aggregates      |
//! | `test_accuracy_sd`     | sample standard deviation (`weights` aggregates)           |
//! | `beta_energy`          | Frobenius norm of the float output weights                 |
//! | `bit_width`            | sign bit plus magnitude bits of the integer output weights |
//! | `agreement_with_float` | fraction of test predictions equal to the float model's    |
//! | `delta`                | original minus proposed test accuracy (proposed rows)      |
//! | `note`                 | free text; error message on `error` rows                   |
//!
//! Empty cells mean "not applicable".

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowKind {
    Aggregate,
    Model,
    Rung,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub dataset: String,
    pub kind: RowKind,
    pub arm: String,
    #[serde(rename = "L")]
    pub l: usize,
    pub seed: u64,
    pub ladder_step: Option<u32>,
    pub val_accuracy: Option<f64>,
    pub test_accuracy: Option<f64>,
    pub test_accuracy_sd: Option<f64>,
    pub beta_energy: Option<f64>,
    pub bit_width: Option<u32>,
    pub agreement_with_float: Option<f64>,
    pub delta: Option<f64>,
    pub note: String,
}

impl ReportRow {
    pub fn new(dataset: &str, kind: RowKind, arm: &str, l: usize, seed: u64) -> Self {
        Self {
            dataset: dataset.to_string(),
            kind,
            arm: arm.to_string(),
            l,
            seed,
            ladder_step: None,
            val_accuracy: None,
            test_accuracy: None,
            test_accuracy_sd: None,
            beta_energy: None,
            bit_width: None,
            agreement_with_float: None,
            delta: None,
            note: String::new(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SweepReport {
    /// Lines printed above the summary table.
    pub notes: Vec<String>,
    /// Main CSV rows.
    pub rows: Vec<ReportRow>,
    /// Per-candidate rows, written next to the main CSV.
    pub details: Vec<ReportRow>,
}

impl SweepReport {
    pub fn aggregates(&self) -> impl Iterator<Item = &ReportRow> {
        self.rows.iter().filter(|r| r.kind == RowKind::Aggregate)
    }

    pub fn errors(&self) -> impl Iterator<Item = &ReportRow> {
        self.rows.iter().filter(|r| r.kind == RowKind::Error)
    }

    /// Writes `path` and, when there are detail rows, `<path stem>.models.csv`.
    pub fn write_csv(&self, path: &Path, force: bool) -> Result<()> {
        crate::format::write_bytes(path, &encode_rows(&self.rows, path)?, force)?;
        if !self.details.is_empty() {
            let detail = details_path(path);
            crate::format::write_bytes(&detail, &encode_rows(&self.details, &detail)?, force)?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let bytes = encode_rows(&self.rows, Path::new("<memory>"))?;
        Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
    }

    /// Human-readable summary of the aggregate and rung rows.
    pub fn summary_table(&self) -> String {
        let mut out = String::new();
        for n in &self.notes {
            let _ = writeln!(out, "# {n}");
        }
        let _ = writeln!(
            out,
            "{:<20} {:<12} {:>6} {:>5} {:>16} {:>8} {:>6} {:>9} {:>8}",
            "dataset", "arm", "L", "step", "test %", "val %", "bits", "agree %", "delta"
        );
        let pct = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{:.2}", 100.0 * v));
        for r in self.rows.iter() {
            if r.kind == RowKind::Error {
                let _ = writeln!(out, "{:<20} {:<12} {:>6} error: {}", r.dataset, r.arm, r.l, r.note);
                continue;
            }
            let test = match (r.test_accuracy, r.test_accuracy_sd) {
                (Some(m), Some(sd)) => format!("{:.2} ({:.2})", 100.0 * m, 100.0 * sd),
                (m, _) => pct(m),
            };
            let _ = writeln!(
                out,
                "{:<20} {:<12} {:>6} {:>5} {:>16} {:>8} {:>6} {:>9} {:>8}",
                r.dataset,
                r.arm,
                r.l,
                r.ladder_step.map_or("-".into(), |s| s.to_string()),
                test,
                pct(r.val_accuracy),
                r.bit_width.map_or("-".into(), |b| b.to_string()),
                pct(r.agreement_with_float),
                pct(r.delta),
            );
        }
        out
    }
}

pub fn details_path(path: &Path) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}.models.csv"))
}

fn encode_rows(rows: &[ReportRow], path: &Path) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    if rows.is_empty() {
        w.write_record([
            "dataset",
            "kind",
            "arm",
            "L",
            "seed",
            "ladder_step",
            "val_accuracy",
            "test_accuracy",
            "test_accuracy_sd",
            "beta_energy",
            "bit_width",
            "agreement_with_float",
            "delta",
            "note",
        ])
        .map_err(|e| Error::format(path, 0, e.to_string()))?;
    }
    for r in rows {
        w.serialize(r).map_err(|e| Error::format(path, 0, e.to_string()))?;
    }
    w.into_inner().map_err(|e| Error::format(path, 0, e.to_string()))
}

/// Reads rows written by [`SweepReport::write_csv`].
pub fn read_csv(path: &Path) -> Result<Vec<ReportRow>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::format(path, 0, e.to_string()))?;
    r.deserialize()
        .map(|row| row.map_err(|e| Error::format(path, e.position().map_or(0, |p| p.byte()), e.to_string())))
        .collect()
}

/// Mean and sample standard deviation (0 for a single value).
pub fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}
