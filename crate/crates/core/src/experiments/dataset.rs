use std::path::{Path, PathBuf};

use super::config::{DatasetSpec, ExperimentConfig};
use crate::data::cifar::class_index;
use crate::data::image::{patch_dataset, synthetic_texture_pair, GrayImage, Half};
use crate::data::{load_cifar10, load_csv, load_idx, Preprocessing, RawDataset};
use crate::error::Result;
use crate::rng::derive_seed;

/// Seed streams reserved for dataset construction.
const STREAM_TEXTURE_IMAGES: u64 = 0xD0;
const STREAM_TRAIN_PATCHES: u64 = 0xD1;
const STREAM_TEST_PATCHES: u64 = 0xD2;

/// Train and test sets of one experiment, still in raw integer form.
#[derive(Debug, Clone)]
pub struct ExperimentData {
    pub name: String,
    pub train: RawDataset,
    pub test: RawDataset,
    pub preprocessing: Preprocessing,
}

fn resolve(dir: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        dir.join(p)
    }
}

/// Loads the configured dataset. Relative paths are taken from `data_dir`.
/// `train_limit` and `test_limit` keep the first samples of each set.
pub fn load_dataset(cfg: &ExperimentConfig, data_dir: &Path) -> Result<ExperimentData> {
    let r = |p: &PathBuf| resolve(data_dir, p);
    let (train, test) = match &cfg.dataset {
        DatasetSpec::Idx {
            train_images,
            train_labels,
            test_images,
            test_labels,
        } => (
            load_idx(&r(train_images), &r(train_labels))?,
            load_idx(&r(test_images), &r(test_labels))?,
        ),
        DatasetSpec::Cifar10 {
            train_batches,
            test_batches,
            classes,
        } => {
            let filter = match classes {
                Some([a, b]) => Some((class_index(a)?, class_index(b)?)),
                None => None,
            };
            let tr: Vec<PathBuf> = train_batches.iter().map(r).collect();
            let te: Vec<PathBuf> = test_batches.iter().map(r).collect();
            (load_cifar10(&tr, filter)?, load_cifar10(&te, filter)?)
        }
        DatasetSpec::Csv {
            train,
            test,
            label_column,
        } => (load_csv(&r(train), label_column)?, load_csv(&r(test), label_column)?),
        DatasetSpec::Textures {
            images,
            patch_size,
            train_per_class,
            test_per_class,
        } => {
            let imgs = [GrayImage::read(&r(&images[0]))?, GrayImage::read(&r(&images[1]))?];
            texture_sets(&imgs, *patch_size, *train_per_class, *test_per_class, cfg.seed)?
        }
        DatasetSpec::SyntheticTextures {
            image_size,
            patch_size,
            train_per_class,
            test_per_class,
        } => {
            let imgs = synthetic_texture_pair(*image_size, derive_seed(cfg.seed, STREAM_TEXTURE_IMAGES));
            texture_sets(&imgs, *patch_size, *train_per_class, *test_per_class, cfg.seed)?
        }
    };
    let train = match cfg.train_limit {
        Some(k) => train.head(k),
        None => train,
    };
    let test = match cfg.test_limit {
        Some(k) => test.head(k),
        None => test,
    };
    Ok(ExperimentData {
        name: cfg.dataset.name().to_string(),
        train,
        test,
        preprocessing: cfg.preprocessing(),
    })
}

fn texture_sets(
    imgs: &[GrayImage],
    size: usize,
    train_per_class: usize,
    test_per_class: usize,
    seed: u64,
) -> Result<(RawDataset, RawDataset)> {
    Ok((
        patch_dataset(imgs, size, train_per_class, Half::Left, derive_seed(seed, STREAM_TRAIN_PATCHES))?,
        patch_dataset(imgs, size, test_per_class, Half::Right, derive_seed(seed, STREAM_TEST_PATCHES))?,
    ))
}
