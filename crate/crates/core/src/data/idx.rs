//! IDX container (MNIST): big-endian, magic-tagged.
//!
//! Images: `00 00 08 03`, then u32 count, rows, cols, then `count·rows·cols`
//! unsigned bytes. Labels: `00 00 08 01`, u32 count, then `count` bytes.

use std::fs;
use std::path::Path;

use super::{RawDataset, Source};
use crate::error::{Error, Result};

pub const IMAGES_MAGIC: u32 = 0x0000_0803;
pub const LABELS_MAGIC: u32 = 0x0000_0801;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdxImages {
    pub count: usize,
    pub rows: usize,
    pub cols: usize,
    pub pixels: Vec<u8>,
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

fn be_u32(bytes: &[u8], offset: usize, path: &Path) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| Error::format(path, offset as u64, "truncated header"))
}

pub fn parse_images(bytes: &[u8], path: &Path) -> Result<IdxImages> {
    let magic = be_u32(bytes, 0, path)?;
    if magic != IMAGES_MAGIC {
        return Err(Error::format(
            path,
            0,
            format!("bad magic {magic:#010x}, expected {IMAGES_MAGIC:#010x}"),
        ));
    }
    let count = be_u32(bytes, 4, path)? as usize;
    let rows = be_u32(bytes, 8, path)? as usize;
    let cols = be_u32(bytes, 12, path)? as usize;
    let expected = count * rows * cols;
    let body = &bytes[16..];
    if body.len() < expected {
        return Err(Error::format(
            path,
            bytes.len() as u64,
            format!("truncated: {count} images of {rows}x{cols} need {} bytes", 16 + expected),
        ));
    }
    if body.len() > expected {
        return Err(Error::format(path, (16 + expected) as u64, "trailing bytes"));
    }
    Ok(IdxImages {
        count,
        rows,
        cols,
        pixels: body.to_vec(),
    })
}

pub fn parse_labels(bytes: &[u8], path: &Path) -> Result<Vec<u8>> {
    let magic = be_u32(bytes, 0, path)?;
    if magic != LABELS_MAGIC {
        return Err(Error::format(
            path,
            0,
            format!("bad magic {magic:#010x}, expected {LABELS_MAGIC:#010x}"),
        ));
    }
    let count = be_u32(bytes, 4, path)? as usize;
    let body = &bytes[8..];
    if body.len() < count {
        return Err(Error::format(
            path,
            bytes.len() as u64,
            format!("truncated: {count} labels need {} bytes", 8 + count),
        ));
    }
    if body.len() > count {
        return Err(Error::format(path, (8 + count) as u64, "trailing bytes"));
    }
    Ok(body.to_vec())
}

pub fn read_images(path: &Path) -> Result<IdxImages> {
    parse_images(&read(path)?, path)
}

pub fn read_labels(path: &Path) -> Result<Vec<u8>> {
    parse_labels(&read(path)?, path)
}

pub fn encode_images(images: &IdxImages) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + images.pixels.len());
    out.extend_from_slice(&IMAGES_MAGIC.to_be_bytes());
    for v in [images.count, images.rows, images.cols] {
        out.extend_from_slice(&(v as u32).to_be_bytes());
    }
    out.extend_from_slice(&images.pixels);
    out
}

pub fn encode_labels(labels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&LABELS_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    out
}

pub fn write_images(path: &Path, images: &IdxImages) -> Result<()> {
    fs::write(path, encode_images(images)).map_err(|e| Error::io(path, e))
}

pub fn write_labels(path: &Path, labels: &[u8]) -> Result<()> {
    fs::write(path, encode_labels(labels)).map_err(|e| Error::io(path, e))
}

/// Image/label file pair as a dataset; images are flattened row-major.
pub fn load_idx(images_path: &Path, labels_path: &Path) -> Result<RawDataset> {
    let images = read_images(images_path)?;
    let labels = read_labels(labels_path)?;
    if labels.len() != images.count {
        return Err(Error::format(
            labels_path,
            4,
            format!("{} labels for {} images", labels.len(), images.count),
        ));
    }
    let classes = labels.iter().map(|&l| l as usize + 1).max().unwrap_or(1);
    RawDataset::new(
        images.pixels.iter().map(|&p| i32::from(p)).collect(),
        images.rows * images.cols,
        labels.iter().map(|&l| l as usize).collect(),
        classes,
        (0, 255),
        Source::Mnist,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_image_fixture() {
        let pixels: Vec<u8> = (0..784).map(|i| (i * 7 % 256) as u8).collect();
        let mut bytes = vec![0, 0, 8, 3, 0, 0, 0, 1, 0, 0, 0, 28, 0, 0, 0, 28];
        bytes.extend_from_slice(&pixels);
        let img = parse_images(&bytes, Path::new("fixture")).unwrap();
        assert_eq!((img.count, img.rows, img.cols), (1, 28, 28));
        assert_eq!(img.pixels, pixels);
        assert_eq!(encode_images(&img), bytes);
    }

    #[test]
    fn bad_magic_reports_offset_zero() {
        let bytes = [0, 0, 8, 1, 0, 0, 0, 0];
        match parse_images(&bytes, Path::new("x")) {
            Err(Error::Format { offset: 0, .. }) => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn truncated_body() {
        let bytes = [0, 0, 8, 1, 0, 0, 0, 3, 1, 2];
        match parse_labels(&bytes, Path::new("x")) {
            Err(Error::Format { offset: 10, msg, .. }) => assert!(msg.contains("truncated")),
            other => panic!("{other:?}"),
        }
        assert!(parse_labels(&[0, 0, 8], Path::new("x")).is_err());
    }
}
