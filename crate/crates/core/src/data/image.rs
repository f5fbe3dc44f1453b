//! Grayscale images and texture patches.
//!
//! Raw image file layout (all little-endian):
//!
//! | offset | size | field                      |
//! |--------|------|----------------------------|
//! | 0      | 4    | magic `GRAY`               |
//! | 4      | 4    | rows (u32)                 |
//! | 8      | 4    | cols (u32)                 |
//! | 12     | r·c  | pixels, row-major, one u8  |

use std::fs;
use std::path::Path;

use super::{RawDataset, Source};
use crate::error::{Error, Result};
use crate::rng::ElmRng;

pub const GRAY_MAGIC: &[u8; 4] = b"GRAY";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    rows: usize,
    cols: usize,
    pixels: Vec<u8>,
}

impl GrayImage {
    pub fn new(rows: usize, cols: usize, pixels: Vec<u8>) -> Result<Self> {
        if pixels.len() != rows * cols {
            return Err(Error::dims("GrayImage::new", rows * cols, pixels.len()));
        }
        Ok(Self { rows, cols, pixels })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn get(&self, r: usize, c: usize) -> u8 {
        self.pixels[r * self.cols + c]
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(12 + self.pixels.len());
        out.extend_from_slice(GRAY_MAGIC);
        out.extend_from_slice(&(self.rows as u32).to_le_bytes());
        out.extend_from_slice(&(self.cols as u32).to_le_bytes());
        out.extend_from_slice(&self.pixels);
        out
    }

    pub fn decode(bytes: &[u8], path: &Path) -> Result<Self> {
        if bytes.len() < 12 {
            return Err(Error::format(path, bytes.len() as u64, "truncated header"));
        }
        if &bytes[..4] != GRAY_MAGIC {
            return Err(Error::format(path, 0, "bad magic, expected GRAY"));
        }
        let rows = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
        let cols = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
        let body = &bytes[12..];
        if body.len() != rows * cols {
            return Err(Error::format(
                path,
                bytes.len() as u64,
                format!("{rows}x{cols} image needs {} pixel bytes, found {}", rows * cols, body.len()),
            ));
        }
        GrayImage::new(rows, cols, body.to_vec())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::decode(&bytes, path)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.encode()).map_err(|e| Error::io(path, e))
    }
}

/// Left or right half of an image, split at `cols / 2`. Training patches come
/// from one half and test patches from the other, so they never share pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Deserialize, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Half {
    Left,
    Right,
}

impl Half {
    /// Column range `[start, end)` of this half.
    pub fn columns(self, cols: usize) -> (usize, usize) {
        match self {
            Half::Left => (0, cols / 2),
            Half::Right => (cols / 2, cols),
        }
    }
}

/// A square patch and its top-left corner.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Patch {
    pub row: usize,
    pub col: usize,
    pub pixels: Vec<u8>,
}

/// `count` patches of `size×size`, with top-left corners drawn uniformly
/// (with replacement) so that each patch lies entirely inside `half`.
pub fn extract_patches(image: &GrayImage, size: usize, count: usize, half: Half, seed: u64) -> Result<Vec<Patch>> {
    let (c0, c1) = half.columns(image.cols);
    if size == 0 || image.rows < size || c1 - c0 < size {
        return Err(Error::InvalidArgument(format!(
            "{size}x{size} patch does not fit in the {half:?} half ({} rows x {} cols) of a {}x{} image",
            image.rows,
            c1 - c0,
            image.rows,
            image.cols
        )));
    }
    let mut rng = ElmRng::new(seed);
    let row_choices = (image.rows - size + 1) as u64;
    let col_choices = (c1 - c0 - size + 1) as u64;
    Ok((0..count)
        .map(|_| {
            let row = rng.below(row_choices) as usize;
            let col = c0 + rng.below(col_choices) as usize;
            let mut pixels = Vec::with_capacity(size * size);
            for r in row..row + size {
                pixels.extend_from_slice(&image.pixels[r * image.cols + col..r * image.cols + col + size]);
            }
            Patch { row, col, pixels }
        })
        .collect())
}

/// Two-or-more-class patch dataset: class `k` is drawn from `images[k]`.
pub fn patch_dataset(images: &[GrayImage], size: usize, per_class: usize, half: Half, seed: u64) -> Result<RawDataset> {
    let mut samples = Vec::with_capacity(images.len() * per_class * size * size);
    let mut labels = Vec::with_capacity(images.len() * per_class);
    for (class, img) in images.iter().enumerate() {
        let patches = extract_patches(img, size, per_class, half, crate::rng::derive_seed(seed, class as u64))?;
        for p in patches {
            samples.extend(p.pixels.iter().map(|&v| i32::from(v)));
            labels.push(class);
        }
    }
    RawDataset::new(samples, size * size, labels, images.len(), (0, 255), Source::Patches)
}

/// Parameters of one synthetic grating texture.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GratingSpec {
    /// Stripe orientation in degrees.
    pub angle_deg: f64,
    /// Stripe period in pixels.
    pub period: f64,
    pub mean: f64,
    pub amplitude: f64,
    /// Amplitude (radians) of the slow phase warp that bends the stripes.
    pub warp: f64,
    /// Standard deviation of per-pixel Gaussian noise.
    pub noise: f64,
}

/// Stand-in texture pair for the two-texture patch task: warped sinusoidal
/// gratings at different orientations, periods and contrast, plus noise.
pub const TEXTURE_PAIR: [GratingSpec; 2] = [
    GratingSpec {
        angle_deg: 80.0,
        period: 9.0,
        mean: 118.0,
        amplitude: 38.0,
        warp: 2.0,
        noise: 34.0,
    },
    GratingSpec {
        angle_deg: 100.0,
        period: 7.0,
        mean: 128.0,
        amplitude: 52.0,
        warp: 2.5,
        noise: 30.0,
    },
];

/// Renders a `size×size` grating texture.
pub fn synthetic_texture(spec: &GratingSpec, size: usize, seed: u64) -> GrayImage {
    let mut rng = ElmRng::new(seed);
    let (s, c) = spec.angle_deg.to_radians().sin_cos();
    let tau = std::f64::consts::TAU;
    let warp_phase = rng.open01() * tau;
    let mut pixels = Vec::with_capacity(size * size);
    for r in 0..size {
        for col in 0..size {
            let (y, x) = (r as f64, col as f64);
            let along = x * c + y * s;
            let across = -x * s + y * c;
            let phase = tau * along / spec.period + spec.warp * (tau * across / 48.0 + warp_phase).sin();
            let v = spec.mean + spec.amplitude * phase.sin() + spec.noise * rng.normal();
            pixels.push(v.round().clamp(0.0, 255.0) as u8);
        }
    }
    GrayImage {
        rows: size,
        cols: size,
        pixels,
    }
}

/// The two stand-in textures for a given seed.
pub fn synthetic_texture_pair(size: usize, seed: u64) -> [GrayImage; 2] {
    [
        synthetic_texture(&TEXTURE_PAIR[0], size, crate::rng::derive_seed(seed, 0)),
        synthetic_texture(&TEXTURE_PAIR[1], size, crate::rng::derive_seed(seed, 1)),
    ]
}
