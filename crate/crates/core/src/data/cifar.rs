//! CIFAR-10 binary batches: 3073-byte records, one label byte followed by
//! 1024 red, 1024 green and 1024 blue bytes.

use std::fs;
use std::path::{Path, PathBuf};

use super::{RawDataset, Source};
use crate::error::{Error, Result};

pub const RECORD_BYTES: usize = 3073;
pub const PIXELS: usize = 3072;

pub const CLASS_NAMES: [&str; 10] = [
    "airplane", "automobile", "bird", "cat", "deer", "dog", "frog", "horse", "ship", "truck",
];

/// Class index for a CIFAR-10 class name or numeric label.
pub fn class_index(name: &str) -> Result<u8> {
    if let Some(i) = CLASS_NAMES.iter().position(|&c| c == name) {
        return Ok(i as u8);
    }
    match name.parse::<u8>() {
        Ok(v) if v < 10 => Ok(v),
        _ => Err(Error::InvalidArgument(format!("unknown CIFAR-10 class {name:?}"))),
    }
}

pub fn parse_batch(bytes: &[u8], path: &Path) -> Result<(Vec<u8>, Vec<u8>)> {
    if !bytes.len().is_multiple_of(RECORD_BYTES) {
        return Err(Error::format(
            path,
            (bytes.len() - bytes.len() % RECORD_BYTES) as u64,
            format!("size {} is not a multiple of {RECORD_BYTES}", bytes.len()),
        ));
    }
    let count = bytes.len() / RECORD_BYTES;
    let mut labels = Vec::with_capacity(count);
    let mut pixels = Vec::with_capacity(count * PIXELS);
    for (i, rec) in bytes.chunks_exact(RECORD_BYTES).enumerate() {
        if rec[0] > 9 {
            return Err(Error::format(
                path,
                (i * RECORD_BYTES) as u64,
                format!("label {} out of range", rec[0]),
            ));
        }
        labels.push(rec[0]);
        pixels.extend_from_slice(&rec[1..]);
    }
    Ok((labels, pixels))
}

pub fn encode_batch(labels: &[u8], pixels: &[u8]) -> Result<Vec<u8>> {
    if pixels.len() != labels.len() * PIXELS {
        return Err(Error::dims("encode_batch", labels.len() * PIXELS, pixels.len()));
    }
    let mut out = Vec::with_capacity(labels.len() * RECORD_BYTES);
    for (l, p) in labels.iter().zip(pixels.chunks_exact(PIXELS)) {
        out.push(*l);
        out.extend_from_slice(p);
    }
    Ok(out)
}

pub fn write_batch(path: &Path, labels: &[u8], pixels: &[u8]) -> Result<()> {
    fs::write(path, encode_batch(labels, pixels)?).map_err(|e| Error::io(path, e))
}

/// Concatenates batches. With `class_filter = Some((a, b))` only classes `a`
/// and `b` are kept, relabeled 0 and 1.
pub fn load_cifar10(batch_paths: &[PathBuf], class_filter: Option<(u8, u8)>) -> Result<RawDataset> {
    if let Some((a, b)) = class_filter {
        if a == b || a > 9 || b > 9 {
            return Err(Error::InvalidArgument(format!("bad class filter ({a}, {b})")));
        }
    }
    let mut samples = Vec::new();
    let mut out_labels = Vec::new();
    for path in batch_paths {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        let (labels, pixels) = parse_batch(&bytes, path)?;
        for (l, p) in labels.iter().zip(pixels.chunks_exact(PIXELS)) {
            let label = match class_filter {
                None => *l as usize,
                Some((a, _)) if *l == a => 0,
                Some((_, b)) if *l == b => 1,
                Some(_) => continue,
            };
            out_labels.push(label);
            samples.extend(p.iter().map(|&v| i32::from(v)));
        }
    }
    let classes = if class_filter.is_some() { 2 } else { 10 };
    RawDataset::new(samples, PIXELS, out_labels, classes, (0, 255), Source::Cifar10)
}
