//! Experiment configuration files (TOML).
//!
//! ```toml
//! mode = "size"              # size | weights | bits
//! seed = 1
//! gamma = 1.0
//! l_list = [250, 500, 1000]
//! models_per_l = 8           # default: 8 (size), 50 (weights), 10 (bits)
//! selection_threshold = 0.95
//! train_fraction = 0.8
//! output = "sweep.csv"
//! preprocess = ["zero_mean", "l2"]
//! train_limit = 10000
//!
//! [dataset]
//! kind = "idx"
//! ```
//!
//! Dataset kinds: `idx`, `cifar10`, `csv`, `textures`, `synthetic_textures`.
//! Unknown keys are rejected.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::Step;
use crate::elm::WeightDistribution;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Accuracy versus hidden size, continuous/float against ternary/integer.
    Size,
    /// Mean and spread of test accuracy per input-weight distribution.
    Weights,
    /// Accuracy along the output-weight precision ladder.
    Bits,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetSpec {
    Idx {
        #[serde(default = "idx_train_images")]
        train_images: PathBuf,
        #[serde(default = "idx_train_labels")]
        train_labels: PathBuf,
        #[serde(default = "idx_test_images")]
        test_images: PathBuf,
        #[serde(default = "idx_test_labels")]
        test_labels: PathBuf,
    },
    Cifar10 {
        train_batches: Vec<PathBuf>,
        test_batches: Vec<PathBuf>,
        /// Two class names or indices for a binary task.
        #[serde(default)]
        classes: Option<[String; 2]>,
    },
    Csv {
        train: PathBuf,
        test: PathBuf,
        #[serde(default = "default_label_column")]
        label_column: String,
    },
    /// Two grayscale images in the raw `GRAY` format; training patches come
    /// from the left halves, test patches from the right halves.
    Textures {
        images: [PathBuf; 2],
        #[serde(default = "default_patch_size")]
        patch_size: usize,
        #[serde(default = "default_patches")]
        train_per_class: usize,
        #[serde(default = "default_patches")]
        test_per_class: usize,
    },
    /// Generated grating textures, same patch protocol as `textures`.
    SyntheticTextures {
        #[serde(default = "default_texture_size")]
        image_size: usize,
        #[serde(default = "default_patch_size")]
        patch_size: usize,
        #[serde(default = "default_patches")]
        train_per_class: usize,
        #[serde(default = "default_patches")]
        test_per_class: usize,
    },
}

fn idx_train_images() -> PathBuf {
    "mnist/train-images-idx3-ubyte".into()
}
fn idx_train_labels() -> PathBuf {
    "mnist/train-labels-idx1-ubyte".into()
}
fn idx_test_images() -> PathBuf {
    "mnist/t10k-images-idx3-ubyte".into()
}
fn idx_test_labels() -> PathBuf {
    "mnist/t10k-labels-idx1-ubyte".into()
}
fn default_label_column() -> String {
    "label".into()
}
fn default_patch_size() -> usize {
    12
}
fn default_patches() -> usize {
    250
}
fn default_texture_size() -> usize {
    256
}

impl DatasetSpec {
    pub fn name(&self) -> &'static str {
        match self {
            DatasetSpec::Idx { .. } => "mnist",
            DatasetSpec::Cifar10 { .. } => "cifar10",
            DatasetSpec::Csv { .. } => "csv",
            DatasetSpec::Textures { .. } => "textures",
            DatasetSpec::SyntheticTextures { .. } => "synthetic_textures",
        }
    }

    /// Zero-mean plus ℓ₂ for digit images, ℓ₂ alone otherwise.
    pub fn default_preprocess(&self) -> Vec<Step> {
        match self {
            DatasetSpec::Idx { .. } => vec![Step::ZeroMean, Step::L2],
            _ => vec![Step::L2],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BitsSpec {
    /// Sweep an existing model file instead of training classifiers.
    #[serde(default)]
    pub model: Option<PathBuf>,
    /// Input-weight distribution of trained classifiers.
    #[serde(default = "default_bits_weights")]
    pub weights: WeightDistribution,
}

fn default_bits_weights() -> WeightDistribution {
    WeightDistribution::Ternary
}

impl Default for BitsSpec {
    fn default() -> Self {
        Self {
            model: None,
            weights: default_bits_weights(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub mode: Mode,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default)]
    pub l_list: Vec<usize>,
    #[serde(default)]
    pub models_per_l: Option<usize>,
    #[serde(default = "default_threshold")]
    pub selection_threshold: f64,
    #[serde(default = "default_train_fraction")]
    pub train_fraction: f64,
    /// Weight distributions compared in `weights` mode.
    #[serde(default = "default_arms")]
    pub arms: Vec<WeightDistribution>,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub jobs: Option<usize>,
    #[serde(default)]
    pub preprocess: Option<Vec<Step>>,
    #[serde(default)]
    pub train_limit: Option<usize>,
    #[serde(default)]
    pub test_limit: Option<usize>,
    pub dataset: DatasetSpec,
    #[serde(default)]
    pub bits: BitsSpec,
}

fn default_gamma() -> f64 {
    1.0
}
fn default_threshold() -> f64 {
    0.95
}
fn default_train_fraction() -> f64 {
    0.8
}
fn default_arms() -> Vec<WeightDistribution> {
    vec![WeightDistribution::UniformOpen01, WeightDistribution::Ternary]
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str, overrides: &[String]) -> Result<Self> {
        let mut table: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Config {
            key: None,
            msg: e.message().to_string(),
        })?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let cfg: ExperimentConfig = toml::Value::Table(table).try_into().map_err(config_error)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text, overrides)
    }

    pub fn models_per_l(&self) -> usize {
        self.models_per_l.unwrap_or(match self.mode {
            Mode::Size => 8,
            Mode::Weights => 50,
            Mode::Bits => 10,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, msg: String| {
            Err(Error::Config {
                key: Some(key.to_string()),
                msg,
            })
        };
        let needs_l = !(self.mode == Mode::Bits && self.bits.model.is_some());
        if needs_l && self.l_list.is_empty() {
            return bad("l_list", "must be nonempty".into());
        }
        if self.l_list.contains(&0) || self.l_list.windows(2).any(|w| w[0] >= w[1]) {
            return bad("l_list", format!("must be positive and strictly ascending, got {:?}", self.l_list));
        }
        if self.models_per_l == Some(0) {
            return bad("models_per_l", "must be at least 1".into());
        }
        if !(self.selection_threshold > 0.0 && self.selection_threshold <= 1.0) {
            return bad("selection_threshold", format!("must be in (0, 1], got {}", self.selection_threshold));
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return bad("gamma", format!("must be positive, got {}", self.gamma));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return bad("train_fraction", format!("must be in (0, 1), got {}", self.train_fraction));
        }
        if self.mode == Mode::Weights && self.arms.is_empty() {
            return bad("arms", "must name at least one weight distribution".into());
        }
        if self.jobs == Some(0) {
            return bad("jobs", "must be at least 1".into());
        }
        if let Some(steps) = &self.preprocess {
            if let Err(e) = crate::data::Preprocessing::from_steps(steps) {
                return bad("preprocess", e.to_string());
            }
        }
        Ok(())
    }

    pub fn preprocessing(&self) -> crate::data::Preprocessing {
        let steps = self.preprocess.clone().unwrap_or_else(|| self.dataset.default_preprocess());
        crate::data::Preprocessing::from_steps(&steps).expect("validated")
    }
}

/// `a.b.c=value`; the value is parsed as a TOML value, falling back to a
/// bare string.
fn apply_override(table: &mut toml::Table, assignment: &str) -> Result<()> {
    let (key, raw) = assignment.split_once('=').ok_or_else(|| Error::Config {
        key: None,
        msg: format!("override {assignment:?} is not key=value"),
    })?;
    let key = key.trim();
    let raw = raw.trim();
    let value = format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::Config {
            key: Some(key.to_string()),
            msg: "empty key segment".into(),
        });
    }
    let mut cur = table;
    for part in &parts[..parts.len() - 1] {
        let entry = cur
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry.as_table_mut().ok_or_else(|| Error::Config {
            key: Some(key.to_string()),
            msg: format!("{part} is not a table"),
        })?;
    }
    cur.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

fn config_error(e: toml::de::Error) -> Error {
    let msg = e.message().to_string();
    let key = msg
        .split_once("unknown field `")
        .and_then(|(_, rest)| rest.split_once('`'))
        .map(|(k, _)| k.to_string())
        .or_else(|| {
            msg.split_once("missing field `")
                .and_then(|(_, rest)| rest.split_once('`'))
                .map(|(k, _)| k.to_string())
        });
    Error::Config { key, msg }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "mode = \"size\"\nl_list = [10]\n[dataset]\nkind = \"synthetic_textures\"\n";

    #[test]
    fn defaults() {
        let c = ExperimentConfig::from_toml_str(MINIMAL, &[]).unwrap();
        assert_eq!(c.models_per_l(), 8);
        assert_eq!(c.selection_threshold, 0.95);
        assert_eq!(c.gamma, 1.0);
        assert_eq!(c.train_fraction, 0.8);
        assert_eq!(c.preprocessing(), crate::data::Preprocessing::L2);
    }

    #[test]
    fn unknown_key_named() {
        let err = ExperimentConfig::from_toml_str(&format!("bogus_key = 1\n{MINIMAL}"), &[]).unwrap_err();
        assert!(matches!(err, Error::Config { key: Some(ref k), .. } if k == "bogus_key"), "{err:?}");
        let err = ExperimentConfig::from_toml_str(MINIMAL, &["dataset.nope=3".into()]).unwrap_err();
        assert!(matches!(err, Error::Config { key: Some(ref k), .. } if k == "nope"), "{err:?}");
    }

    #[test]
    fn overrides_apply() {
        let c = ExperimentConfig::from_toml_str(
            MINIMAL,
            &["seed=42".into(), "l_list=[25, 40]".into(), "dataset.patch_size=8".into()],
        )
        .unwrap();
        assert_eq!(c.seed, 42);
        assert_eq!(c.l_list, vec![25, 40]);
        assert!(matches!(c.dataset, DatasetSpec::SyntheticTextures { patch_size: 8, .. }));
    }

    #[test]
    fn invariants_checked() {
        for o in ["l_list=[40, 10]", "l_list=[]", "models_per_l=0", "selection_threshold=0", "selection_threshold=1.5"] {
            assert!(ExperimentConfig::from_toml_str(MINIMAL, &[o.into()]).is_err(), "{o}");
        }
        assert!(ExperimentConfig::from_toml_str(MINIMAL, &["selection_threshold=1.0".into()]).is_ok());
    }

    #[test]
    fn mode_defaults_for_counts() {
        let w = ExperimentConfig::from_toml_str(MINIMAL, &["mode=\"weights\"".into()]).unwrap();
        assert_eq!(w.models_per_l(), 50);
        let b = ExperimentConfig::from_toml_str(MINIMAL, &["mode=bits".into()]).unwrap();
        assert_eq!(b.models_per_l(), 10);
    }
}
