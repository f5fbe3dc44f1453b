use std::path::Path;

use rayon::prelude::*;

use super::config::{ExperimentConfig, Mode};
use super::dataset::{load_dataset, ExperimentData};
use super::report::{mean_sd, ReportRow, RowKind, SweepReport};
use super::select::{select_model, Candidate};
use crate::data::{preprocess, split_train_val, NormalizedDataset, RawDataset};
use crate::elm::{argmax, gen_weights, hidden_features, predict_batch, train, FloatModel, ModelMeta, WeightDistribution, WeightKind};
use crate::error::{Error, Result};
use crate::format::{read_model, ModelFile};
use crate::int_infer::QuantizedModel;
use crate::quantize::{bit_width, ladder, quantize_beta, reduce_precision_step};
use crate::rng::{derive_seed, PRNG_ID};

const STREAM_SPLIT: u64 = 0x5EED_0001;

pub const ARM_ORIGINAL: &str = "original";
pub const ARM_PROPOSED: &str = "proposed";

/// Weight seed of candidate `k` at hidden size `l`. Arms share it, so the
/// k-th models of two arms form a pair.
pub fn candidate_seed(seed: u64, l: usize, k: usize) -> u64 {
    derive_seed(seed, ((l as u64) << 32) | k as u64)
}

/// Runs the configured experiment on a worker pool of `cfg.jobs` threads
/// (default: available cores). Relative dataset paths resolve against
/// `data_dir`.
pub fn run(cfg: &ExperimentConfig, data_dir: &Path) -> Result<SweepReport> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(j) = cfg.jobs {
        builder = builder.num_threads(j);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::InvalidArgument(format!("worker pool: {e}")))?;
    pool.install(|| {
        let data = load_dataset(cfg, data_dir)?;
        match cfg.mode {
            Mode::Size => run_size_sweep(cfg, &data),
            Mode::Weights => run_weight_comparison(cfg, &data),
            Mode::Bits => match &cfg.bits.model {
                Some(path) => {
                    let path = if path.is_absolute() {
                        path.clone()
                    } else {
                        data_dir.join(path)
                    };
                    let model = match read_model(&path)? {
                        ModelFile::Float(m) => m,
                        ModelFile::Quantized(_) => {
                            return Err(Error::InvalidArgument(format!(
                                "{} holds integer output weights; the bit sweep starts from float output weights",
                                path.display()
                            )))
                        }
                    };
                    let test = preprocess(&data.test, model.meta.preprocessing)?;
                    run_bit_sweep(&model, &test, &data.name)
                }
                None => run_trained_bit_sweeps(cfg, &data),
            },
        }
    })
}

pub fn accuracy(pred: &[usize], labels: &[usize]) -> f64 {
    if labels.is_empty() {
        return 0.0;
    }
    let hits = pred.iter().zip(labels).filter(|(p, l)| p == l).count();
    hits as f64 / labels.len() as f64
}

fn train_one(data: &NormalizedDataset, dist: WeightDistribution, l: usize, seed: u64, gamma: f64) -> Result<FloatModel> {
    let w = gen_weights(dist, data.samples.cols(), l, seed)?;
    let mut model = train(&data.samples, &data.targets(), w, gamma)?;
    model.meta = ModelMeta {
        seed,
        preprocessing: data.preprocessing,
        prng_id: PRNG_ID.to_string(),
    };
    Ok(model)
}

/// Integer model at the first precision-ladder rung whose values fit the
/// accumulator headroom for inputs in `range`.
pub fn integer_model(model: &FloatModel, range: (i32, i32)) -> Result<QuantizedModel> {
    let mut beta = quantize_beta(model.beta())?;
    loop {
        match QuantizedModel::with_beta(model, beta.clone(), range) {
            Err(Error::Headroom(_)) => beta = reduce_precision_step(&beta)?,
            other => return other,
        }
    }
}

fn check_sets(data: &ExperimentData) -> Result<()> {
    if data.train.is_empty() || data.test.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "dataset {} needs nonempty train and test sets ({} / {})",
            data.name,
            data.train.len(),
            data.test.len()
        )));
    }
    data.train.check_all_classes_present()
}

struct Split {
    train: NormalizedDataset,
    val_raw: RawDataset,
    val: NormalizedDataset,
    test_raw: RawDataset,
    test: NormalizedDataset,
    range: (i32, i32),
}

impl Split {
    fn new(cfg: &ExperimentConfig, data: &ExperimentData) -> Result<Self> {
        let (train_raw, val_raw) = split_train_val(&data.train, cfg.train_fraction, derive_seed(cfg.seed, STREAM_SPLIT))?;
        let p = data.preprocessing;
        let (a, b) = (data.train.range(), data.test.range());
        Ok(Self {
            train: preprocess(&train_raw, p)?,
            val: preprocess(&val_raw, p)?,
            test: preprocess(&data.test, p)?,
            val_raw,
            test_raw: data.test.clone(),
            range: (a.0.min(b.0), a.1.max(b.1)),
        })
    }
}

/// Selection inputs and test-set outcome of one candidate.
#[derive(Debug, Clone)]
struct Outcome {
    test_accuracy: f64,
    ladder_step: Option<u32>,
    bit_width: Option<u32>,
    agreement: Option<f64>,
}

fn evaluate(split: &Split, arm: &str, l: usize, seed: u64, gamma: f64) -> Result<Candidate<Outcome>> {
    let dist = if arm == ARM_ORIGINAL {
        WeightDistribution::UniformOpen01
    } else {
        WeightDistribution::Ternary
    };
    let model = train_one(&split.train, dist, l, seed, gamma)?;
    let energy = model.energy();
    let float_test = predict_batch(&model, &split.test.samples)?;
    let (val_accuracy, outcome) = if arm == ARM_ORIGINAL {
        let val = accuracy(&predict_batch(&model, &split.val.samples)?, split.val.labels());
        let out = Outcome {
            test_accuracy: accuracy(&float_test, split.test.labels()),
            ladder_step: None,
            bit_width: None,
            agreement: None,
        };
        (val, out)
    } else {
        // Raw integer samples straight into the integer path.
        let q = integer_model(&model, split.range)?;
        let int_test = q.classify_batch(split.test_raw.samples())?;
        let val = accuracy(&q.classify_batch(split.val_raw.samples())?, split.val_raw.labels());
        let out = Outcome {
            test_accuracy: accuracy(&int_test, split.test_raw.labels()),
            ladder_step: Some(q.beta().ladder_step()),
            bit_width: Some(q.bit_width()),
            agreement: Some(accuracy(&int_test, &float_test)),
        };
        (val, out)
    };
    Ok(Candidate {
        model: outcome,
        seed,
        val_accuracy,
        energy,
    })
}

fn candidate_row(dataset: &str, kind: RowKind, arm: &str, l: usize, c: &Candidate<Outcome>) -> ReportRow {
    let mut r = ReportRow::new(dataset, kind, arm, l, c.seed);
    r.val_accuracy = Some(c.val_accuracy);
    r.test_accuracy = Some(c.model.test_accuracy);
    r.beta_energy = Some(c.energy);
    r.ladder_step = c.model.ladder_step;
    r.bit_width = c.model.bit_width;
    r.agreement_with_float = c.model.agreement;
    r
}

/// Accuracy versus hidden size. For every `L` and both arms, trains
/// `models_per_l` candidates on the training part of a stratified split,
/// selects one by validation accuracy and energy, and reports its test
/// accuracy.
///
/// * `original`: continuous (0, 1) input weights, float output weights,
///   preprocessed test inputs.
/// * `proposed`: ternary input weights, integer output weights, raw integer
///   test inputs.
///
/// A failed (L, arm) group becomes an error row; the sweep continues.
pub fn run_size_sweep(cfg: &ExperimentConfig, data: &ExperimentData) -> Result<SweepReport> {
    check_sets(data)?;
    let split = Split::new(cfg, data)?;
    let k = cfg.models_per_l();
    let arms = [ARM_ORIGINAL, ARM_PROPOSED];
    let jobs: Vec<(&str, usize, usize)> = arms
        .iter()
        .flat_map(|&a| cfg.l_list.iter().flat_map(move |&l| (0..k).map(move |i| (a, l, i))))
        .collect();
    let results: Vec<Result<Candidate<Outcome>>> = jobs
        .par_iter()
        .map(|&(arm, l, i)| {
            let seed = candidate_seed(cfg.seed, l, i);
            evaluate(&split, arm, l, seed, cfg.gamma)
                .map_err(|e| e.context(format!("arm {arm}, L {l}, seed {seed}")))
        })
        .collect();

    let mut report = SweepReport::default();
    report.notes.push(format!(
        "{}: {} train / {} validation / {} test samples, preprocessing {}, {} candidates per L, selection threshold {}",
        data.name,
        split.train.len(),
        split.val.len(),
        split.test.len(),
        data.preprocessing,
        k,
        cfg.selection_threshold
    ));
    if data.preprocessing.zero_mean {
        report.notes.push(
            "training inputs were mean-shifted; the proposed arm removes the mean on the integer path by centering"
                .to_string(),
        );
    }
    let mut selected_test = std::collections::BTreeMap::new();
    let mut results = results.into_iter();
    for &arm in &arms {
        for &l in &cfg.l_list {
            let group: Vec<Result<Candidate<Outcome>>> = results.by_ref().take(k).collect();
            let mut ok = Vec::with_capacity(k);
            let mut failure = None;
            for g in group {
                match g {
                    Ok(c) => ok.push(c),
                    Err(e) => {
                        failure.get_or_insert(e);
                    }
                }
            }
            for c in &ok {
                report.details.push(candidate_row(&data.name, RowKind::Model, arm, l, c));
            }
            if let Some(e) = failure {
                let mut r = ReportRow::new(&data.name, RowKind::Error, arm, l, cfg.seed);
                r.note = e.to_string();
                report.rows.push(r);
                continue;
            }
            let picked = select_model(ok, cfg.selection_threshold)?;
            let mut r = candidate_row(&data.name, RowKind::Aggregate, arm, l, &picked);
            if arm == ARM_PROPOSED {
                if let Some(orig) = selected_test.get(&l) {
                    r.delta = Some(orig - picked.model.test_accuracy);
                }
            } else {
                selected_test.insert(l, picked.model.test_accuracy);
            }
            report.rows.push(r);
        }
    }
    Ok(report)
}

/// Test accuracy mean and spread per input-weight distribution. The k-th
/// model of every arm shares one seed; all models train on the whole
/// training set and are evaluated on the float path.
pub fn run_weight_comparison(cfg: &ExperimentConfig, data: &ExperimentData) -> Result<SweepReport> {
    check_sets(data)?;
    let train_n = preprocess(&data.train, data.preprocessing)?;
    let test_n = preprocess(&data.test, data.preprocessing)?;
    let k = cfg.models_per_l();
    let jobs: Vec<(WeightDistribution, usize, usize)> = cfg
        .arms
        .iter()
        .flat_map(|&a| cfg.l_list.iter().flat_map(move |&l| (0..k).map(move |i| (a, l, i))))
        .collect();
    let results: Vec<Result<(u64, f64, f64)>> = jobs
        .par_iter()
        .map(|&(dist, l, i)| {
            let seed = candidate_seed(cfg.seed, l, i);
            let run = || -> Result<(u64, f64, f64)> {
                let model = train_one(&train_n, dist, l, seed, cfg.gamma)?;
                let acc = accuracy(&predict_batch(&model, &test_n.samples)?, test_n.labels());
                Ok((seed, acc, model.energy()))
            };
            run().map_err(|e| e.context(format!("arm {}, L {l}, seed {seed}", dist.name())))
        })
        .collect();

    let mut report = SweepReport::default();
    report.notes.push(format!(
        "{}: {} train / {} test samples, preprocessing {}, {} weight pairs per arm (default 50; some protocols use 100)",
        data.name,
        train_n.len(),
        test_n.len(),
        data.preprocessing,
        k
    ));
    let mut results = results.into_iter();
    for &dist in &cfg.arms {
        for &l in &cfg.l_list {
            let group: Vec<_> = results.by_ref().take(k).collect();
            let mut accs = Vec::with_capacity(k);
            let mut failure = None;
            for g in group {
                match g {
                    Ok((seed, acc, energy)) => {
                        let mut r = ReportRow::new(&data.name, RowKind::Model, dist.name(), l, seed);
                        r.test_accuracy = Some(acc);
                        r.beta_energy = Some(energy);
                        report.details.push(r);
                        accs.push(acc);
                    }
                    Err(e) => {
                        failure.get_or_insert(e);
                    }
                }
            }
            if let Some(e) = failure {
                return Err(e);
            }
            let (mean, sd) = mean_sd(&accs);
            let mut r = ReportRow::new(&data.name, RowKind::Aggregate, dist.name(), l, cfg.seed);
            r.test_accuracy = Some(mean);
            r.test_accuracy_sd = Some(sd);
            r.note = format!("{k} models");
            report.rows.push(r);
        }
    }
    Ok(report)
}

/// Accuracy at every rung of the precision ladder of `model`'s output
/// weights, starting from the quantized weights. Rows come in descending
/// bit width. `agreement_with_float` compares each rung's predictions with
/// the unquantized model's.
pub fn run_bit_sweep(model: &FloatModel, test: &NormalizedDataset, dataset: &str) -> Result<SweepReport> {
    let h = hidden_features(model.weights(), &test.samples)?;
    let float_pred = rows_argmax(&h.matmul(model.beta())?);
    let float_acc = accuracy(&float_pred, test.labels());
    let mut report = SweepReport::default();
    report.notes.push(format!(
        "{dataset}: L {}, seed {}, {} test samples, unquantized accuracy {:.2}%",
        model.hidden(),
        model.meta.seed,
        test.len(),
        100.0 * float_acc
    ));
    let arm = match model.weights().kind() {
        WeightKind::Continuous => "continuous",
        WeightKind::Ternary => "ternary",
    };
    for b in ladder(quantize_beta(model.beta())?) {
        // Integer-valued scores; argmax matches the integer path.
        let pred = rows_argmax(&h.matmul(&b.to_dense())?);
        let mut r = ReportRow::new(dataset, RowKind::Rung, arm, model.hidden(), model.meta.seed);
        r.ladder_step = Some(b.ladder_step());
        r.bit_width = Some(bit_width(&b));
        r.test_accuracy = Some(accuracy(&pred, test.labels()));
        r.beta_energy = Some(model.energy());
        r.agreement_with_float = Some(accuracy(&pred, &float_pred));
        report.rows.push(r);
    }
    Ok(report)
}

fn rows_argmax(scores: &crate::linalg::DenseMatrix) -> Vec<usize> {
    (0..scores.rows()).map(|r| argmax(scores.row(r))).collect()
}

/// `models_per_l` classifiers per L trained on the whole training set,
/// each swept along its ladder.
fn run_trained_bit_sweeps(cfg: &ExperimentConfig, data: &ExperimentData) -> Result<SweepReport> {
    check_sets(data)?;
    let train_n = preprocess(&data.train, data.preprocessing)?;
    let test_n = preprocess(&data.test, data.preprocessing)?;
    let k = cfg.models_per_l();
    let jobs: Vec<(usize, usize)> = cfg
        .l_list
        .iter()
        .flat_map(|&l| (0..k).map(move |i| (l, i)))
        .collect();
    let parts: Vec<Result<SweepReport>> = jobs
        .par_iter()
        .map(|&(l, i)| {
            let seed = candidate_seed(cfg.seed, l, i);
            train_one(&train_n, cfg.bits.weights, l, seed, cfg.gamma)
                .and_then(|m| run_bit_sweep(&m, &test_n, &data.name))
                .map_err(|e| e.context(format!("L {l}, seed {seed}")))
        })
        .collect();
    let mut report = SweepReport::default();
    for p in parts {
        let p = p?;
        report.notes.extend(p.notes);
        report.rows.extend(p.rows);
    }
    Ok(report)
}
