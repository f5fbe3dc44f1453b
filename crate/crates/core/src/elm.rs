//! Model types, random input weights, hidden features, closed-form training
//! and the floating-point prediction path.
//!
//! The hidden layer is always `h = max(0, Wᵀx)`: ReLU activation with zero
//! bias. Nothing here lets a caller add a bias, because the integer inference
//! path depends on `h(c·x) = c·h(x)` for `c > 0`.

use std::time::{Duration, Instant};

use crate::data::Preprocessing;
use crate::error::{Error, Result};
use crate::int_infer::instrument;
use crate::linalg::{solve_spd, DenseMatrix, SpdSystem};
use crate::rng::{ElmRng, PRNG_ID};

/// Rows of `X` pushed through the hidden layer per Gram update.
const TRAIN_BLOCK_ROWS: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightKind {
    Continuous,
    Ternary,
}

/// How input weights are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Deserialize, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightDistribution {
    /// i.i.d. uniform on (0, 1); the baseline.
    #[serde(alias = "continuous")]
    UniformOpen01,
    /// i.i.d. uniform on (−1, 1). Comparison option only.
    #[serde(alias = "symmetric")]
    SymmetricUniform,
    /// i.i.d. uniform over {−1, 0, 1}.
    Ternary,
    /// i.i.d. uniform over {−1, 1}. Comparison option only.
    Binary,
}

impl WeightDistribution {
    pub fn name(self) -> &'static str {
        match self {
            WeightDistribution::UniformOpen01 => "continuous",
            WeightDistribution::SymmetricUniform => "symmetric",
            WeightDistribution::Ternary => "ternary",
            WeightDistribution::Binary => "binary",
        }
    }

    pub fn kind(self) -> WeightKind {
        match self {
            WeightDistribution::UniformOpen01 | WeightDistribution::SymmetricUniform => {
                WeightKind::Continuous
            }
            WeightDistribution::Ternary | WeightDistribution::Binary => WeightKind::Ternary,
        }
    }
}

impl std::str::FromStr for WeightDistribution {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "continuous" | "uniform_open01" => Ok(WeightDistribution::UniformOpen01),
            "symmetric" | "symmetric_uniform" => Ok(WeightDistribution::SymmetricUniform),
            "ternary" => Ok(WeightDistribution::Ternary),
            "binary" => Ok(WeightDistribution::Binary),
            other => Err(Error::InvalidArgument(format!(
                "unknown weight distribution {other:?} (expected continuous, symmetric, ternary or binary)"
            ))),
        }
    }
}

/// n×L matrix with entries in {−1, 0, 1}, one signed byte per entry.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TernaryWeights {
    rows: usize,
    cols: usize,
    data: Vec<i8>,
}

impl TernaryWeights {
    pub fn from_vec(rows: usize, cols: usize, data: Vec<i8>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::dims(
                "TernaryWeights::from_vec",
                rows * cols,
                data.len(),
            ));
        }
        if let Some(i) = data.iter().position(|v| !(-1..=1).contains(v)) {
            return Err(Error::InvalidArgument(format!(
                "ternary weight {} at index {i} is not in {{-1, 0, 1}}",
                data[i]
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0; rows * cols],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[i8] {
        &self.data
    }

    pub fn get(&self, r: usize, c: usize) -> i8 {
        self.data[r * self.cols + c]
    }

    pub fn to_dense(&self) -> DenseMatrix {
        DenseMatrix::from_raw(
            self.rows,
            self.cols,
            self.data.iter().map(|&v| f64::from(v)).collect(),
        )
    }

    /// Occurrences of −1, 0 and 1, in that order.
    pub fn symbol_counts(&self) -> [usize; 3] {
        let mut counts = [0; 3];
        for &v in &self.data {
            counts[(v + 1) as usize] += 1;
        }
        counts
    }

    /// Sum of each column, `Wᵀ·1`.
    pub fn column_sums(&self) -> Vec<i64> {
        let mut sums = vec![0i64; self.cols];
        for row in self.data.chunks_exact(self.cols.max(1)) {
            for (s, &w) in sums.iter_mut().zip(row) {
                *s += i64::from(w);
            }
        }
        sums
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum WeightMatrix {
    Continuous(DenseMatrix),
    Ternary(TernaryWeights),
}

impl WeightMatrix {
    pub fn rows(&self) -> usize {
        match self {
            WeightMatrix::Continuous(m) => m.rows(),
            WeightMatrix::Ternary(t) => t.rows(),
        }
    }

    pub fn cols(&self) -> usize {
        match self {
            WeightMatrix::Continuous(m) => m.cols(),
            WeightMatrix::Ternary(t) => t.cols(),
        }
    }

    pub fn kind(&self) -> WeightKind {
        match self {
            WeightMatrix::Continuous(_) => WeightKind::Continuous,
            WeightMatrix::Ternary(_) => WeightKind::Ternary,
        }
    }

    pub fn to_dense(&self) -> DenseMatrix {
        match self {
            WeightMatrix::Continuous(m) => m.clone(),
            WeightMatrix::Ternary(t) => t.to_dense(),
        }
    }

    pub fn as_ternary(&self) -> Option<&TernaryWeights> {
        match self {
            WeightMatrix::Ternary(t) => Some(t),
            WeightMatrix::Continuous(_) => None,
        }
    }

    #[inline]
    fn get(&self, r: usize, c: usize) -> f64 {
        match self {
            WeightMatrix::Continuous(m) => m.get(r, c),
            WeightMatrix::Ternary(t) => f64::from(t.get(r, c)),
        }
    }
}

fn check_size(n: usize, l: usize) -> Result<()> {
    if n == 0 || l == 0 {
        return Err(Error::InvalidArgument(format!(
            "weight matrix must be at least 1x1, got {n}x{l}"
        )));
    }
    Ok(())
}

/// n×L weights, i.i.d. uniform on (0, 1).
pub fn gen_weights_continuous(n: usize, l: usize, seed: u64) -> Result<WeightMatrix> {
    gen_weights(WeightDistribution::UniformOpen01, n, l, seed)
}

/// n×L weights, i.i.d. uniform over {−1, 0, 1}.
pub fn gen_weights_ternary(n: usize, l: usize, seed: u64) -> Result<TernaryWeights> {
    match gen_weights(WeightDistribution::Ternary, n, l, seed)? {
        WeightMatrix::Ternary(t) => Ok(t),
        WeightMatrix::Continuous(_) => unreachable!(),
    }
}

/// Draws n×L input weights, row-major, from a generator seeded with `seed`.
pub fn gen_weights(dist: WeightDistribution, n: usize, l: usize, seed: u64) -> Result<WeightMatrix> {
    check_size(n, l)?;
    let mut rng = ElmRng::new(seed);
    let len = n * l;
    Ok(match dist {
        WeightDistribution::UniformOpen01 => WeightMatrix::Continuous(DenseMatrix::from_raw(
            n,
            l,
            (0..len).map(|_| rng.open01()).collect(),
        )),
        WeightDistribution::SymmetricUniform => WeightMatrix::Continuous(DenseMatrix::from_raw(
            n,
            l,
            (0..len).map(|_| 2.0 * rng.open01() - 1.0).collect(),
        )),
        WeightDistribution::Ternary => WeightMatrix::Ternary(TernaryWeights {
            rows: n,
            cols: l,
            data: (0..len).map(|_| rng.below(3) as i8 - 1).collect(),
        }),
        WeightDistribution::Binary => WeightMatrix::Ternary(TernaryWeights {
            rows: n,
            cols: l,
            data: (0..len).map(|_| if rng.below(2) == 0 { -1 } else { 1 }).collect(),
        }),
    })
}

/// Class labels with their {0, 1} one-hot encoding.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledTargets {
    labels: Vec<usize>,
    classes: usize,
}

impl LabeledTargets {
    pub fn new(labels: Vec<usize>, classes: usize) -> Result<Self> {
        if classes == 0 {
            return Err(Error::InvalidArgument("class count must be positive".into()));
        }
        if let Some(i) = labels.iter().position(|&c| c >= classes) {
            return Err(Error::InvalidArgument(format!(
                "label {} at index {i} is not below class count {classes}",
                labels[i]
            )));
        }
        Ok(Self { labels, classes })
    }

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

    /// One-hot rows `[start, end)`.
    pub fn onehot_block(&self, start: usize, end: usize) -> DenseMatrix {
        let m = self.classes;
        let mut data = vec![0.0; (end - start) * m];
        for (r, &c) in self.labels[start..end].iter().enumerate() {
            data[r * m + c] = 1.0;
        }
        DenseMatrix::from_raw(end - start, m, data)
    }

    pub fn onehot(&self) -> DenseMatrix {
        self.onehot_block(0, self.labels.len())
    }
}

/// Provenance carried with a model into its file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelMeta {
    pub seed: u64,
    pub preprocessing: Preprocessing,
    pub prng_id: String,
}

impl Default for ModelMeta {
    fn default() -> Self {
        Self {
            seed: 0,
            preprocessing: Preprocessing::default(),
            prng_id: PRNG_ID.to_string(),
        }
    }
}

/// Zero-bias ReLU network with real output weights.
#[derive(Debug, Clone, PartialEq)]
pub struct FloatModel {
    weights: WeightMatrix,
    beta: DenseMatrix,
    gamma: f64,
    pub meta: ModelMeta,
}

impl FloatModel {
    pub fn new(weights: WeightMatrix, beta: DenseMatrix, gamma: f64, meta: ModelMeta) -> Result<Self> {
        if beta.rows() != weights.cols() {
            return Err(Error::dims(
                "FloatModel::new",
                format!("beta with {} rows", weights.cols()),
                format!("{}x{}", beta.rows(), beta.cols()),
            ));
        }
        if beta.cols() == 0 {
            return Err(Error::InvalidArgument("beta must have at least one column".into()));
        }
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::InvalidArgument(format!("gamma must be positive, got {gamma}")));
        }
        Ok(Self {
            weights,
            beta,
            gamma,
            meta,
        })
    }

    pub fn weights(&self) -> &WeightMatrix {
        &self.weights
    }

    pub fn beta(&self) -> &DenseMatrix {
        &self.beta
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn inputs(&self) -> usize {
        self.weights.rows()
    }

    pub fn hidden(&self) -> usize {
        self.weights.cols()
    }

    pub fn classes(&self) -> usize {
        self.beta.cols()
    }

    /// Frobenius norm of β, the selection "energy".
    pub fn energy(&self) -> f64 {
        self.beta.frobenius_norm()
    }

    /// Same input weights, different output weights.
    pub fn with_beta(&self, beta: DenseMatrix) -> Result<Self> {
        FloatModel::new(self.weights.clone(), beta, self.gamma, self.meta.clone())
    }
}

/// `H = max(0, X·W)` for X (N×n) and W (n×L).
pub fn hidden_features(weights: &WeightMatrix, x: &DenseMatrix) -> Result<DenseMatrix> {
    hidden_dense(&weights.to_dense(), x)
}

fn hidden_dense(w: &DenseMatrix, x: &DenseMatrix) -> Result<DenseMatrix> {
    if x.cols() != w.rows() {
        return Err(Error::dims(
            "hidden_features",
            format!("X with {} columns", w.rows()),
            format!("{}x{}", x.rows(), x.cols()),
        ));
    }
    let mut h = x.matmul(w)?;
    for v in h.data_mut() {
        *v = v.max(0.0);
    }
    Ok(h)
}

#[derive(Debug, Clone, Copy)]
pub struct TrainStats {
    /// `‖(I/γ + HᵀH)β − HᵀT‖∞`.
    pub residual: f64,
    /// `‖HᵀT‖∞`, the scale the residual is judged against.
    pub rhs_norm: f64,
    pub elapsed: Duration,
}

/// Closed-form ridge training: `β = (I/γ + HᵀH)⁻¹ HᵀT`.
pub fn train(x: &DenseMatrix, targets: &LabeledTargets, weights: WeightMatrix, gamma: f64) -> Result<FloatModel> {
    train_detailed(x, targets, weights, gamma).map(|(m, _)| m)
}

/// [`train`], also reporting the normal-equation residual and wall time.
///
/// H is never materialized: rows of X go through the hidden layer in blocks
/// and are folded into the Gram accumulator.
pub fn train_detailed(
    x: &DenseMatrix,
    targets: &LabeledTargets,
    weights: WeightMatrix,
    gamma: f64,
) -> Result<(FloatModel, TrainStats)> {
    let start = Instant::now();
    if x.rows() != targets.len() {
        return Err(Error::dims(
            "train",
            format!("{} target labels", x.rows()),
            targets.len(),
        ));
    }
    if x.cols() != weights.rows() {
        return Err(Error::dims(
            "train",
            format!("X with {} columns", weights.rows()),
            format!("{}x{}", x.rows(), x.cols()),
        ));
    }
    let w = weights.to_dense();
    let mut system = SpdSystem::zeros(weights.cols(), targets.classes());
    let mut start_row = 0;
    while start_row < x.rows() {
        let end = (start_row + TRAIN_BLOCK_ROWS).min(x.rows());
        let h = hidden_dense(&w, &x.row_block(start_row, end))?;
        system.accumulate(&h, &targets.onehot_block(start_row, end))?;
        start_row = end;
    }
    system.add_ridge(gamma)?;
    let beta = solve_spd(&system)?;
    let stats = TrainStats {
        residual: system.residual_inf(&beta)?,
        rhs_norm: system.rhs.max_abs(),
        elapsed: start.elapsed(),
    };
    let model = FloatModel::new(weights, beta, gamma, ModelMeta::default())?;
    Ok((model, stats))
}

/// Index of the largest score; ties go to the lowest index.
pub fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

/// Output scores `o = βᵀ·max(0, Wᵀx)` for one input.
pub fn scores_float(model: &FloatModel, x: &[f64]) -> Result<Vec<f64>> {
    let n = model.inputs();
    if x.len() != n {
        return Err(Error::dims("predict_float", format!("input of length {n}"), x.len()));
    }
    let l = model.hidden();
    let m = model.classes();
    let mut h = vec![0.0; l];
    for (j, &xj) in x.iter().enumerate() {
        if xj == 0.0 {
            continue;
        }
        for (i, hi) in h.iter_mut().enumerate() {
            *hi += model.weights.get(j, i) * xj;
        }
    }
    let mut o = vec![0.0; m];
    for (i, hi) in h.iter().enumerate() {
        let hi = hi.max(0.0);
        if hi == 0.0 {
            continue;
        }
        for (c, oc) in o.iter_mut().enumerate() {
            *oc += model.beta.get(i, c) * hi;
        }
    }
    instrument::record_float_ops((2 * n * l + l + 2 * l * m) as u64);
    Ok(o)
}

/// Predicted class for one (already preprocessed) input.
pub fn predict_float(model: &FloatModel, x: &[f64]) -> Result<usize> {
    Ok(argmax(&scores_float(model, x)?))
}

/// Score matrix (N×m) for a batch of preprocessed inputs.
pub fn scores_batch(model: &FloatModel, x: &DenseMatrix) -> Result<DenseMatrix> {
    let w = model.weights.to_dense();
    let mut out = Vec::with_capacity(x.rows() * model.classes());
    let mut start = 0;
    while start < x.rows() {
        let end = (start + TRAIN_BLOCK_ROWS).min(x.rows());
        let h = hidden_dense(&w, &x.row_block(start, end))?;
        out.extend_from_slice(h.matmul(&model.beta)?.as_slice());
        start = end;
    }
    instrument::record_float_ops((x.rows() * (2 * model.inputs() * model.hidden() + 2 * model.hidden() * model.classes())) as u64);
    Ok(DenseMatrix::from_raw(x.rows(), model.classes(), out))
}

pub fn predict_batch(model: &FloatModel, x: &DenseMatrix) -> Result<Vec<usize>> {
    let scores = scores_batch(model, x)?;
    Ok((0..scores.rows()).map(|r| argmax(scores.row(r))).collect())
}
