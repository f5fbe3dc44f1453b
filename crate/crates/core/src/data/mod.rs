//! Datasets: loaders, preprocessing and train/validation splitting.

pub mod cifar;
pub mod idx;
pub mod image;
pub mod tabular;

use std::fmt;

use crate::elm::LabeledTargets;
use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;
use crate::rng::ElmRng;

pub use cifar::load_cifar10;
pub use idx::load_idx;
pub use image::{extract_patches, GrayImage, Half};
pub use tabular::load_csv;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Mnist,
    Cifar10,
    Patches,
    Csv,
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Source::Mnist => "mnist",
            Source::Cifar10 => "cifar10",
            Source::Patches => "patches",
            Source::Csv => "csv",
        })
    }
}

/// N×n integer samples with class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct RawDataset {
    samples: Vec<i32>,
    n: usize,
    labels: Vec<usize>,
    classes: usize,
    range: (i32, i32),
    pub source: Source,
}

impl RawDataset {
    pub fn new(
        samples: Vec<i32>,
        n: usize,
        labels: Vec<usize>,
        classes: usize,
        range: (i32, i32),
        source: Source,
    ) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("samples must have at least one feature".into()));
        }
        if samples.len() != labels.len() * n {
            return Err(Error::dims(
                "RawDataset::new",
                format!("{} values for {} samples of {n}", labels.len() * n, labels.len()),
                samples.len(),
            ));
        }
        if let Some(i) = labels.iter().position(|&c| c >= classes) {
            return Err(Error::InvalidArgument(format!(
                "label {} of sample {i} is not below class count {classes}",
                labels[i]
            )));
        }
        if let Some(i) = samples.iter().position(|v| !(range.0..=range.1).contains(v)) {
            return Err(Error::OutOfRange {
                index: i,
                value: i64::from(samples[i]),
                lo: i64::from(range.0),
                hi: i64::from(range.1),
            });
        }
        Ok(Self {
            samples,
            n,
            labels,
            classes,
            range,
            source,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Features per sample.
    pub fn features(&self) -> usize {
        self.n
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn samples(&self) -> &[i32] {
        &self.samples
    }

    pub fn sample(&self, i: usize) -> &[i32] {
        &self.samples[i * self.n..(i + 1) * self.n]
    }

    /// Declared value range.
    pub fn range(&self) -> (i32, i32) {
        self.range
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.classes];
        for &c in &self.labels {
            counts[c] += 1;
        }
        counts
    }

    /// Errors unless every class in `0..classes` has a sample.
    pub fn check_all_classes_present(&self) -> Result<()> {
        match self.class_counts().iter().position(|&c| c == 0) {
            Some(class) => Err(Error::InvalidArgument(format!(
                "class {class} has no samples in a {}-sample dataset",
                self.len()
            ))),
            None => Ok(()),
        }
    }

    /// Samples at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> RawDataset {
        let mut samples = Vec::with_capacity(indices.len() * self.n);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            samples.extend_from_slice(self.sample(i));
            labels.push(self.labels[i]);
        }
        RawDataset {
            samples,
            n: self.n,
            labels,
            classes: self.classes,
            range: self.range,
            source: self.source,
        }
    }

    /// First `k` samples (all of them if `k ≥ len`).
    pub fn head(&self, k: usize) -> RawDataset {
        let k = k.min(self.len());
        let idx: Vec<usize> = (0..k).collect();
        self.subset(&idx)
    }

    pub fn targets(&self) -> LabeledTargets {
        LabeledTargets::new(self.labels.clone(), self.classes).expect("labels validated at construction")
    }
}

/// One preprocessing step, applied per sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Step {
    ZeroMean,
    #[serde(alias = "l2_normalize")]
    L2,
}

impl std::str::FromStr for Step {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "zero_mean" => Ok(Step::ZeroMean),
            "l2" | "l2_normalize" => Ok(Step::L2),
            other => Err(Error::InvalidArgument(format!(
                "unknown preprocessing step {other:?} (expected zero_mean or l2)"
            ))),
        }
    }
}

/// Which per-sample steps were applied. Mean removal, when present, always
/// precedes ℓ₂ normalization.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Preprocessing {
    pub zero_mean: bool,
    pub l2_normalize: bool,
}

impl Preprocessing {
    pub const L2: Preprocessing = Preprocessing {
        zero_mean: false,
        l2_normalize: true,
    };
    pub const ZERO_MEAN_L2: Preprocessing = Preprocessing {
        zero_mean: true,
        l2_normalize: true,
    };

    /// Accepts `[]`, `[zero_mean]`, `[l2]` or `[zero_mean, l2]`.
    pub fn from_steps(steps: &[Step]) -> Result<Self> {
        match steps {
            [] => Ok(Preprocessing::default()),
            [Step::ZeroMean] => Ok(Preprocessing {
                zero_mean: true,
                l2_normalize: false,
            }),
            [Step::L2] => Ok(Preprocessing::L2),
            [Step::ZeroMean, Step::L2] => Ok(Preprocessing::ZERO_MEAN_L2),
            other => Err(Error::InvalidArgument(format!(
                "unsupported preprocessing order {other:?}; l2 must come last and steps may not repeat"
            ))),
        }
    }

    pub fn steps(&self) -> Vec<Step> {
        let mut v = Vec::new();
        if self.zero_mean {
            v.push(Step::ZeroMean);
        }
        if self.l2_normalize {
            v.push(Step::L2);
        }
        v
    }

    /// Applies the steps to one sample.
    pub fn apply(&self, x: &[i32], row: usize) -> Result<Vec<f64>> {
        let mut v: Vec<f64> = x.iter().map(|&a| f64::from(a)).collect();
        self.apply_in_place(&mut v, row)?;
        Ok(v)
    }

    pub fn apply_in_place(&self, v: &mut [f64], row: usize) -> Result<()> {
        if self.zero_mean && !v.is_empty() {
            let mean = v.iter().sum::<f64>() / v.len() as f64;
            for a in v.iter_mut() {
                *a -= mean;
            }
        }
        if self.l2_normalize {
            let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
            if norm == 0.0 {
                return Err(Error::ZeroRow { row });
            }
            for a in v.iter_mut() {
                *a /= norm;
            }
        }
        Ok(())
    }
}

impl fmt::Display for Preprocessing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.zero_mean, self.l2_normalize) {
            (false, false) => f.write_str("none"),
            (true, false) => f.write_str("zero_mean"),
            (false, true) => f.write_str("l2"),
            (true, true) => f.write_str("zero_mean+l2"),
        }
    }
}

/// Real-valued samples after preprocessing.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedDataset {
    pub samples: DenseMatrix,
    labels: Vec<usize>,
    classes: usize,
    pub preprocessing: Preprocessing,
}

impl NormalizedDataset {
    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn targets(&self) -> LabeledTargets {
        LabeledTargets::new(self.labels.clone(), self.classes).expect("labels validated at construction")
    }
}

/// Applies `steps` (in order) to every sample.
pub fn preprocess(raw: &RawDataset, steps: Preprocessing) -> Result<NormalizedDataset> {
    let n = raw.features();
    let mut data: Vec<f64> = raw.samples.iter().map(|&v| f64::from(v)).collect();
    for (row, chunk) in data.chunks_exact_mut(n).enumerate() {
        steps.apply_in_place(chunk, row)?;
    }
    Ok(NormalizedDataset {
        samples: DenseMatrix::from_vec(raw.len(), n, data)?,
        labels: raw.labels.clone(),
        classes: raw.classes,
        preprocessing: steps,
    })
}

/// Stratified random split; `fraction` of each class goes to the first part.
///
/// Each class keeps at least one sample on both sides. Both parts preserve
/// the original sample order.
pub fn split_train_val(ds: &RawDataset, fraction: f64, seed: u64) -> Result<(RawDataset, RawDataset)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "split fraction must be in (0, 1), got {fraction}"
        )));
    }
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); ds.classes];
    for (i, &c) in ds.labels.iter().enumerate() {
        by_class[c].push(i);
    }
    let mut rng = ElmRng::new(seed);
    let mut train = Vec::new();
    let mut val = Vec::new();
    for (class, mut idx) in by_class.into_iter().enumerate() {
        if idx.is_empty() {
            continue;
        }
        if idx.len() < 2 {
            return Err(Error::ClassTooSmall {
                class,
                count: idx.len(),
            });
        }
        rng.shuffle(&mut idx);
        let k = ((fraction * idx.len() as f64).round() as usize).clamp(1, idx.len() - 1);
        train.extend_from_slice(&idx[..k]);
        val.extend_from_slice(&idx[k..]);
    }
    train.sort_unstable();
    val.sort_unstable();
    Ok((ds.subset(&train), ds.subset(&val)))
}
