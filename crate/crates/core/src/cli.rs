//! `intelm` command line.
//!
//! Exit codes: 0 success, 1 other failure, 2 missing input file, 3 input
//! length does not match the model, 4 invalid configuration key. Failures
//! print one `error code=… kind=… [path=…] [key=…] message="…"` line on
//! standard error.

use std::env;
use std::ffi::OsString;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::data::{self, load_cifar10, load_csv, load_idx, preprocess, Preprocessing, RawDataset, Step};
use crate::elm::{gen_weights, predict_batch, scores_batch, train_detailed, ModelMeta, WeightDistribution};
use crate::error::{Error, Result};
use crate::experiments::report::{read_csv as read_report, ReportRow, RowKind, SweepReport};
use crate::experiments::{select_model, Candidate, ExperimentConfig};
use crate::format::{read_model, write_model, ModelFile};
use crate::int_infer::QuantizedModel;
use crate::quantize::{quantize_beta, reduce_precision_step};
use crate::rng::PRNG_ID;

/// Environment variable naming the directory relative data paths resolve
/// against.
pub const DATA_DIR_ENV: &str = "ELM_DATA_DIR";

#[derive(Debug, Parser)]
#[command(name = "intelm", version, about = "Extreme learning machines with integer-only test-time classification")]
pub struct Cli {
    /// Log verbosity (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a model in closed form and write it to a model file.
    Train(TrainArgs),
    /// Turn a ternary-weight model into an integer-only model.
    Quantize(QuantizeArgs),
    /// Print one predicted label per input sample.
    Classify(ClassifyArgs),
    /// Run an experiment described by a config file and write its CSV report.
    Sweep(SweepArgs),
    /// Apply model selection to the per-model rows of a sweep report.
    Select(SelectArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InputFormat {
    /// IDX image file plus IDX label file.
    Idx,
    /// One or more CIFAR-10 binary batches.
    Cifar10,
    /// CSV with a header row.
    Csv,
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Input files. idx: images then labels; cifar10: batches; csv: one file.
    #[arg(long = "data", required = true, num_args = 1..)]
    pub data: Vec<PathBuf>,
    #[arg(long, value_enum, default_value = "idx")]
    pub format: InputFormat,
    /// CSV label column.
    #[arg(long, default_value = "label")]
    pub label_column: String,
    /// Keep two CIFAR-10 classes (names or indices), relabeled 0 and 1.
    #[arg(long, value_delimiter = ',', num_args = 2)]
    pub classes: Option<Vec<String>>,
    /// Use only the first N samples.
    #[arg(long)]
    pub limit: Option<usize>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Hidden units.
    #[arg(short = 'L', long = "hidden")]
    pub hidden: usize,
    #[arg(long, default_value_t = 1.0)]
    pub gamma: f64,
    /// continuous, ternary, symmetric or binary.
    #[arg(long, default_value = "ternary")]
    pub weights: WeightDistribution,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Comma-separated steps (zero_mean, l2); default zero_mean,l2 for idx,
    /// l2 otherwise. `none` disables preprocessing.
    #[arg(long)]
    pub preprocess: Option<String>,
    #[arg(short, long)]
    pub out: PathBuf,
    /// Overwrite an existing output file.
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Args)]
pub struct QuantizeArgs {
    #[arg(short, long)]
    pub model: PathBuf,
    #[arg(short, long)]
    pub out: PathBuf,
    /// Extra halving steps down the precision ladder.
    #[arg(long, default_value_t = 0)]
    pub steps: u32,
    /// Input value range the integer model must handle without overflow.
    #[arg(long, value_delimiter = ',', num_args = 2, default_values_t = [0, 255], allow_negative_numbers = true)]
    pub range: Vec<i32>,
    /// Step further down the ladder until the accumulator headroom check passes.
    #[arg(long)]
    pub fit: bool,
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Args)]
pub struct ClassifyArgs {
    #[arg(short, long)]
    pub model: PathBuf,
    /// Input files, as for `train`; for idx the label file is optional.
    #[arg(long = "data", required = true, num_args = 1..)]
    pub data: Vec<PathBuf>,
    #[arg(long, value_enum, default_value = "idx")]
    pub format: InputFormat,
    /// CSV label column; absent columns mean unlabeled input.
    #[arg(long)]
    pub label_column: Option<String>,
    #[arg(long, value_delimiter = ',', num_args = 2)]
    pub classes: Option<Vec<String>>,
    #[arg(long)]
    pub limit: Option<usize>,
    /// Append the raw score of every class to each line.
    #[arg(long)]
    pub scores: bool,
    /// Float model to compare against: it classifies the preprocessed
    /// inputs and the agreement fraction is printed on standard error.
    #[arg(long)]
    pub reference: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(short, long)]
    pub config: PathBuf,
    /// Config override, `key=value` (dotted keys reach into tables).
    #[arg(long = "set")]
    pub overrides: Vec<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads (default: available cores).
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Report path; overrides `output` in the config.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Args)]
pub struct SelectArgs {
    /// Per-model report (`*.models.csv`).
    #[arg(short, long)]
    pub report: PathBuf,
    #[arg(long, default_value_t = 0.95)]
    pub threshold: f64,
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    let _ = env_logger::Builder::new().filter_level(level).format_timestamp(None).try_init();
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{}", error_line(&e));
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e.root() {
        Error::Io { source, .. } if source.kind() == io::ErrorKind::NotFound => 2,
        Error::DimensionMismatch { .. } => 3,
        Error::Config { key: Some(_), .. } => 4,
        _ => 1,
    }
}

fn kind_name(e: &Error) -> &'static str {
    match e {
        Error::DimensionMismatch { .. } => "dimension_mismatch",
        Error::CholeskyBreakdown { .. } => "cholesky_breakdown",
        Error::NonFinite { .. } => "non_finite",
        Error::InvalidArgument(_) => "invalid_argument",
        Error::ZeroBeta => "zero_beta",
        Error::LadderExhausted { .. } => "ladder_exhausted",
        Error::ZeroInput { .. } => "zero_input",
        Error::OutOfRange { .. } => "out_of_range",
        Error::Headroom(_) => "headroom",
        Error::ZeroRow { .. } => "zero_row",
        Error::ClassTooSmall { .. } => "class_too_small",
        Error::EmptyCandidates => "empty_candidates",
        Error::Io { .. } => "io",
        Error::Format { .. } => "format",
        Error::Config { .. } => "config",
        Error::Context { source, .. } => kind_name(source),
    }
}

/// `error code=2 kind=io path=/x message="…"`.
pub fn error_line(e: &Error) -> String {
    let root = e.root();
    let mut line = format!("error code={} kind={}", exit_code(e), kind_name(root));
    match root {
        Error::Io { path, .. } | Error::Format { path, .. } => {
            line.push_str(&format!(" path={}", quote_if_needed(&path.display().to_string())));
        }
        Error::Config { key: Some(k), .. } => line.push_str(&format!(" key={}", quote_if_needed(k))),
        _ => {}
    }
    line.push_str(&format!(" message={}", quote(&e.to_string())));
    line
}

fn quote(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\"").replace('\n', "\\n"))
}

fn quote_if_needed(s: &str) -> String {
    if s.is_empty() || s.chars().any(|c| c.is_whitespace() || c == '"' || c == '=') {
        quote(s)
    } else {
        s.to_string()
    }
}

fn data_dir() -> Option<PathBuf> {
    env::var_os(DATA_DIR_ENV).map(PathBuf::from)
}

/// Relative paths that do not exist under the working directory are looked
/// up under `$ELM_DATA_DIR`.
pub fn resolve_input(p: &Path) -> PathBuf {
    if p.is_relative() && !p.exists() {
        if let Some(dir) = data_dir() {
            let candidate = dir.join(p);
            if candidate.exists() {
                return candidate;
            }
        }
    }
    p.to_path_buf()
}

fn execute(cmd: Command) -> Result<()> {
    match cmd {
        Command::Train(a) => cmd_train(a),
        Command::Quantize(a) => cmd_quantize(a),
        Command::Classify(a) => cmd_classify(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Select(a) => cmd_select(a),
    }
}

fn class_filter(classes: &Option<Vec<String>>) -> Result<Option<(u8, u8)>> {
    match classes.as_deref() {
        None => Ok(None),
        Some([a, b]) => Ok(Some((data::cifar::class_index(a)?, data::cifar::class_index(b)?))),
        Some(other) => Err(Error::InvalidArgument(format!("expected two classes, got {}", other.len()))),
    }
}

fn load_labeled(
    paths: &[PathBuf],
    format: InputFormat,
    label_column: &str,
    classes: &Option<Vec<String>>,
) -> Result<RawDataset> {
    let paths: Vec<PathBuf> = paths.iter().map(|p| resolve_input(p)).collect();
    match format {
        InputFormat::Idx => match paths.as_slice() {
            [images, labels] => load_idx(images, labels),
            _ => Err(Error::InvalidArgument("idx input needs an image file and a label file".into())),
        },
        InputFormat::Cifar10 => load_cifar10(&paths, class_filter(classes)?),
        InputFormat::Csv => match paths.as_slice() {
            [p] => load_csv(p, label_column),
            _ => Err(Error::InvalidArgument("csv input is a single file".into())),
        },
    }
}

fn parse_preprocess(text: &str) -> Result<Preprocessing> {
    if text == "none" || text.is_empty() {
        return Ok(Preprocessing::default());
    }
    let steps = text
        .split(',')
        .map(|s| s.trim().parse::<Step>())
        .collect::<Result<Vec<_>>>()?;
    Preprocessing::from_steps(&steps)
}

fn cmd_train(a: TrainArgs) -> Result<()> {
    if a.out.exists() && !a.force {
        return Err(Error::InvalidArgument(format!(
            "{} exists; pass --force to overwrite",
            a.out.display()
        )));
    }
    let raw = load_labeled(&a.data.data, a.data.format, &a.data.label_column, &a.data.classes)?;
    let raw = match a.data.limit {
        Some(k) => raw.head(k),
        None => raw,
    };
    raw.check_all_classes_present()?;
    let prep = match &a.preprocess {
        Some(t) => parse_preprocess(t)?,
        None if a.data.format == InputFormat::Idx => Preprocessing::ZERO_MEAN_L2,
        None => Preprocessing::L2,
    };
    let ds = preprocess(&raw, prep)?;
    let w = gen_weights(a.weights, raw.features(), a.hidden, a.seed)?;
    let (mut model, stats) = train_detailed(&ds.samples, &ds.targets(), w, a.gamma)?;
    model.meta = ModelMeta {
        seed: a.seed,
        preprocessing: prep,
        prng_id: PRNG_ID.to_string(),
    };
    write_model(&a.out, &ModelFile::Float(model), a.force)?;
    println!(
        "trained L={} gamma={} weights={} seed={} samples={} n={} m={} preprocess={} train_time={:.3}s residual={:.3e}",
        a.hidden,
        a.gamma,
        a.weights.name(),
        a.seed,
        raw.len(),
        raw.features(),
        raw.classes(),
        prep,
        stats.elapsed.as_secs_f64(),
        stats.residual
    );
    Ok(())
}

fn cmd_quantize(a: QuantizeArgs) -> Result<()> {
    let path = resolve_input(&a.model);
    let model = match read_model(&path)? {
        ModelFile::Float(m) => m,
        ModelFile::Quantized(_) => {
            return Err(Error::InvalidArgument(format!("{} is already quantized", path.display())))
        }
    };
    let range = (a.range[0], a.range[1]);
    let mut beta = quantize_beta(model.beta())?;
    for _ in 0..a.steps {
        beta = reduce_precision_step(&beta)?;
    }
    let q = loop {
        match QuantizedModel::with_beta(&model, beta.clone(), range) {
            Err(Error::Headroom(_)) if a.fit => beta = reduce_precision_step(&beta)?,
            other => break other?,
        }
    };
    write_model(&a.out, &ModelFile::Quantized(q.clone()), a.force)?;
    println!(
        "quantized L={} tau={:e} ladder_step={} bit_width={} range=[{},{}]",
        q.hidden(),
        q.beta().tau(),
        q.beta().ladder_step(),
        q.bit_width(),
        range.0,
        range.1
    );
    Ok(())
}

/// Unlabeled or labeled samples for classification.
fn load_inputs(a: &ClassifyArgs) -> Result<(Vec<i32>, usize, (i32, i32), Option<Vec<usize>>)> {
    let paths: Vec<PathBuf> = a.data.iter().map(|p| resolve_input(p)).collect();
    let (samples, n, range, labels) = match a.format {
        InputFormat::Idx => {
            let images = data::idx::read_images(&paths[0])?;
            let labels = match paths.get(1) {
                Some(p) => Some(data::idx::read_labels(p)?.into_iter().map(usize::from).collect()),
                None => None,
            };
            let samples = images.pixels.iter().map(|&p| i32::from(p)).collect();
            (samples, images.rows * images.cols, (0, 255), labels)
        }
        InputFormat::Cifar10 => {
            let ds = load_cifar10(&paths, class_filter(&a.classes)?)?;
            let labels = Some(ds.labels().to_vec());
            (ds.samples().to_vec(), ds.features(), ds.range(), labels)
        }
        InputFormat::Csv => {
            let [p] = paths.as_slice() else {
                return Err(Error::InvalidArgument("csv input is a single file".into()));
            };
            let s = data::tabular::read_csv(p, a.label_column.as_deref())?;
            let range = s.observed_range();
            (s.values, s.features, range, s.labels)
        }
    };
    let count = samples.len().checked_div(n).unwrap_or(0);
    let keep = a.limit.map_or(count, |k| k.min(count));
    let samples = samples[..keep * n].to_vec();
    let labels = labels.map(|l| l[..keep.min(l.len())].to_vec());
    Ok((samples, n, range, labels))
}

fn cmd_classify(a: ClassifyArgs) -> Result<()> {
    let model = read_model(&resolve_input(&a.model))?;
    let (samples, n, range, labels) = load_inputs(&a)?;
    let count = samples.len().checked_div(n).unwrap_or(0);
    if count > 0 && n != model.inputs() {
        return Err(Error::DimensionMismatch {
            op: "classify",
            expected: format!("inputs of length {}", model.inputs()),
            found: n.to_string(),
        });
    }
    let (pred, scores): (Vec<usize>, Vec<Vec<String>>) = match &model {
        ModelFile::Quantized(q) => {
            if count > 0 {
                let (lo, hi) = q.input_range();
                if range.0 < lo || range.1 > hi {
                    return Err(Error::InvalidArgument(format!(
                        "input values span [{}, {}], outside the model's range [{lo}, {hi}]",
                        range.0, range.1
                    )));
                }
            }
            let mut pred = Vec::with_capacity(count);
            let mut scores = Vec::new();
            for x in samples.chunks_exact(n.max(1)).take(count) {
                let s = q.scores(x)?;
                pred.push(crate::int_infer::kernel::argmax(&s));
                if a.scores {
                    scores.push(s.iter().map(i64::to_string).collect());
                }
            }
            (pred, scores)
        }
        ModelFile::Float(m) => {
            if count == 0 {
                (Vec::new(), Vec::new())
            } else {
                let raw = RawDataset::new(
                    samples.clone(),
                    n,
                    vec![0; count],
                    1,
                    range,
                    data::Source::Csv,
                )?;
                let x = preprocess(&raw, m.meta.preprocessing)?;
                let s = scores_batch(m, &x.samples)?;
                let pred = (0..count).map(|r| crate::elm::argmax(s.row(r))).collect();
                let scores = if a.scores {
                    (0..count).map(|r| s.row(r).iter().map(|v| format!("{v:e}")).collect()).collect()
                } else {
                    Vec::new()
                };
                (pred, scores)
            }
        }
    };
    let stdout = io::stdout();
    let mut out = BufWriter::new(stdout.lock());
    for (i, p) in pred.iter().enumerate() {
        let res = if a.scores {
            writeln!(out, "{p},{}", scores[i].join(","))
        } else {
            writeln!(out, "{p}")
        };
        res.map_err(|e| Error::io("<stdout>", e))?;
    }
    out.flush().map_err(|e| Error::io("<stdout>", e))?;
    if let Some(labels) = &labels {
        if !labels.is_empty() {
            let hits = pred.iter().zip(labels).filter(|(p, l)| p == l).count();
            eprintln!("accuracy {:.4} ({hits}/{})", hits as f64 / labels.len() as f64, labels.len());
        }
    }
    if let Some(reference) = &a.reference {
        let ModelFile::Float(r) = read_model(&resolve_input(reference))? else {
            return Err(Error::InvalidArgument("--reference must be a float model".into()));
        };
        if r.inputs() != model.inputs() {
            return Err(Error::DimensionMismatch {
                op: "classify --reference",
                expected: format!("reference with {} inputs", model.inputs()),
                found: r.inputs().to_string(),
            });
        }
        let ref_pred = if count == 0 {
            Vec::new()
        } else {
            let raw = RawDataset::new(samples, n, vec![0; count], 1, range, data::Source::Csv)?;
            predict_batch(&r, &preprocess(&raw, r.meta.preprocessing)?.samples)?
        };
        let same = pred.iter().zip(&ref_pred).filter(|(a, b)| a == b).count();
        let frac = if count == 0 { 1.0 } else { same as f64 / count as f64 };
        eprintln!("agreement {frac:.6} ({same}/{count})");
    }
    Ok(())
}

fn cmd_sweep(a: SweepArgs) -> Result<()> {
    let config_path = resolve_input(&a.config);
    let mut cfg = ExperimentConfig::load(&config_path, &a.overrides)?;
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(j) = a.jobs {
        cfg.jobs = Some(j);
    }
    cfg.validate()?;
    let output = a.output.clone().or_else(|| cfg.output.clone()).ok_or_else(|| Error::Config {
        key: None,
        msg: "no report path: set `output` in the config or pass --output".into(),
    })?;
    if output.exists() && !a.force {
        return Err(Error::InvalidArgument(format!(
            "{} exists; pass --force to overwrite",
            output.display()
        )));
    }
    let dir = data_dir().unwrap_or_else(|| PathBuf::from("."));
    let report = crate::experiments::run(&cfg, &dir)?;
    report.write_csv(&output, a.force)?;
    print!("{}", report.summary_table());
    Ok(())
}

fn cmd_select(a: SelectArgs) -> Result<()> {
    let rows = read_report(&resolve_input(&a.report))?;
    let mut groups: std::collections::BTreeMap<(String, String, usize), Vec<Candidate<ReportRow>>> = Default::default();
    for r in rows.into_iter().filter(|r| r.kind == RowKind::Model) {
        let (Some(val), Some(energy)) = (r.val_accuracy, r.beta_energy) else {
            continue;
        };
        groups
            .entry((r.dataset.clone(), r.arm.clone(), r.l))
            .or_default()
            .push(Candidate {
                seed: r.seed,
                val_accuracy: val,
                energy,
                model: r,
            });
    }
    if groups.is_empty() {
        return Err(Error::EmptyCandidates);
    }
    let mut report = SweepReport::default();
    for (_, cands) in groups {
        let mut row = select_model(cands, a.threshold)?.model;
        row.kind = RowKind::Aggregate;
        report.rows.push(row);
    }
    print!("{}", report.to_csv_string()?);
    Ok(())
}
