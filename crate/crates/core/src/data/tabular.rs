//! CSV samples: a header row, one integer feature per column and an optional
//! label column selected by name.

use std::path::Path;

use super::{RawDataset, Source};
use crate::error::{Error, Result};

/// Parsed CSV contents before dataset validation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CsvSamples {
    pub features: usize,
    pub values: Vec<i32>,
    pub labels: Option<Vec<usize>>,
}

impl CsvSamples {
    pub fn len(&self) -> usize {
        self.values.len().checked_div(self.features).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Smallest and largest feature value, `(0, 0)` when empty.
    pub fn observed_range(&self) -> (i32, i32) {
        let lo = self.values.iter().copied().min().unwrap_or(0);
        let hi = self.values.iter().copied().max().unwrap_or(0);
        (lo, hi)
    }
}

/// Reads a CSV file. An empty file yields zero samples.
pub fn read_csv(path: &Path, label_column: Option<&str>) -> Result<CsvSamples> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let headers = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    let label_idx = match label_column {
        Some(name) if !headers.is_empty() => Some(headers.iter().position(|h| h == name).ok_or_else(|| {
            Error::format(path, 0, format!("no column named {name:?} in header"))
        })?),
        _ => None,
    };
    let features = headers.len() - usize::from(label_idx.is_some());
    let mut values = Vec::new();
    let mut labels = label_idx.map(|_| Vec::new());
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let offset = record.position().map_or(0, |p| p.byte());
        for (i, field) in record.iter().enumerate() {
            if Some(i) == label_idx {
                let label = field.parse::<usize>().map_err(|_| {
                    Error::format(path, offset, format!("label {field:?} is not a class index"))
                })?;
                labels.as_mut().unwrap().push(label);
            } else {
                values.push(field.parse::<i32>().map_err(|_| {
                    Error::format(path, offset, format!("value {field:?} is not an integer"))
                })?);
            }
        }
    }
    Ok(CsvSamples {
        features,
        values,
        labels,
    })
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let offset = e.position().map_or(0, |p| p.byte());
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::format(path, offset, format!("{other:?}")),
    }
}

/// Labeled CSV dataset; the value range is the observed one.
pub fn load_csv(path: &Path, label_column: &str) -> Result<RawDataset> {
    let s = read_csv(path, Some(label_column))?;
    let labels = s.labels.clone().unwrap_or_default();
    let classes = labels.iter().map(|&l| l + 1).max().unwrap_or(1);
    let range = s.observed_range();
    RawDataset::new(s.values, s.features.max(1), labels, classes, range, Source::Csv)
}

/// Writes samples with a header `f0,f1,…` plus the label column, if any.
pub fn write_csv(path: &Path, ds: &RawDataset, label_column: Option<&str>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    let mut header: Vec<String> = (0..ds.features()).map(|i| format!("f{i}")).collect();
    if let Some(name) = label_column {
        header.push(name.to_string());
    }
    w.write_record(&header).map_err(|e| csv_error(path, e))?;
    for i in 0..ds.len() {
        let mut row: Vec<String> = ds.sample(i).iter().map(i32::to_string).collect();
        if label_column.is_some() {
            row.push(ds.labels()[i].to_string());
        }
        w.write_record(&row).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
