//! Integer-only classification.
//!
//! A [`QuantizedModel`] pairs ternary input weights with integer output
//! weights. Classifying a raw integer signal takes a multiplication-free
//! projection, an integer ReLU, an integer output product and an argmax, with
//! 32-bit hidden and 64-bit output accumulators. Overflow is ruled out once,
//! at construction, from the declared input range.
//!
//! When the model was trained on mean-removed inputs, the raw signal `x` is
//! replaced by `n·x − Σx`, which is `n` times the mean-removed signal and so
//! classifies identically.

pub mod instrument;
pub mod kernel;

use crate::elm::{FloatModel, ModelMeta, TernaryWeights, WeightMatrix};
use crate::error::{Error, Result};
use crate::quantize::{bit_width, quantize_beta, IntegerBeta};
use instrument::{Counted, OpCounts};
use kernel::IntOps;

/// Raw integer signal with the range its values were declared to lie in.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntSample {
    values: Vec<i32>,
    range: (i32, i32),
}

impl IntSample {
    pub fn new(values: Vec<i32>, range: (i32, i32)) -> Result<Self> {
        let (lo, hi) = range;
        if lo > hi {
            return Err(Error::InvalidArgument(format!("empty range [{lo}, {hi}]")));
        }
        if let Some(index) = values.iter().position(|v| !(lo..=hi).contains(v)) {
            return Err(Error::OutOfRange {
                index,
                value: i64::from(values[index]),
                lo: i64::from(lo),
                hi: i64::from(hi),
            });
        }
        Ok(Self { values, range })
    }

    pub fn values(&self) -> &[i32] {
        &self.values
    }

    pub fn range(&self) -> (i32, i32) {
        self.range
    }
}

/// Worst-case accumulator magnitudes under the declared input range.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Headroom {
    /// Largest |intermediate| in the 32-bit hidden stage.
    pub hidden_stage: i128,
    /// Largest post-ReLU hidden value.
    pub hidden_max: i128,
    /// Largest |score| in the 64-bit output stage.
    pub output_max: i128,
}

/// Ternary input weights plus integer output weights.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedModel {
    weights: TernaryWeights,
    beta: IntegerBeta,
    beta_wide: Vec<i64>,
    col_sums: Vec<i32>,
    input_range: (i32, i32),
    gamma: f64,
    pub meta: ModelMeta,
}

impl QuantizedModel {
    /// Validates shapes and the no-overflow contract for inputs in
    /// `input_range`.
    pub fn new(
        weights: TernaryWeights,
        beta: IntegerBeta,
        input_range: (i32, i32),
        gamma: f64,
        meta: ModelMeta,
    ) -> Result<Self> {
        if beta.rows() != weights.cols() {
            return Err(Error::dims(
                "QuantizedModel::new",
                format!("integer beta with {} rows", weights.cols()),
                format!("{}x{}", beta.rows(), beta.cols()),
            ));
        }
        if beta.cols() == 0 || weights.rows() == 0 || weights.cols() == 0 {
            return Err(Error::InvalidArgument("model dimensions must be positive".into()));
        }
        if input_range.0 > input_range.1 {
            return Err(Error::InvalidArgument(format!(
                "empty input range [{}, {}]",
                input_range.0, input_range.1
            )));
        }
        let center = meta.preprocessing.zero_mean;
        let headroom = compute_headroom(
            weights.rows(),
            weights.cols(),
            input_range,
            center,
            i128::from(beta.max_abs()),
        );
        check_headroom(&headroom, beta.max_abs(), weights.rows(), center)?;
        let col_sums = weights
            .column_sums()
            .into_iter()
            .map(|c| c as i32)
            .collect();
        Ok(Self {
            beta_wide: beta.values().to_vec(),
            weights,
            beta,
            col_sums,
            input_range,
            gamma,
            meta,
        })
    }

    /// Integer model from a trained ternary-weight model, using the output
    /// weights as quantized (ladder step 0).
    pub fn from_float(model: &FloatModel, input_range: (i32, i32)) -> Result<Self> {
        let beta = quantize_beta(model.beta())?;
        Self::with_beta(model, beta, input_range)
    }

    /// Integer model from a trained ternary-weight model and a given
    /// integer version of its output weights.
    pub fn with_beta(model: &FloatModel, beta: IntegerBeta, input_range: (i32, i32)) -> Result<Self> {
        let weights = match model.weights() {
            WeightMatrix::Ternary(t) => t.clone(),
            WeightMatrix::Continuous(_) => {
                return Err(Error::InvalidArgument(
                    "integer inference needs ternary input weights".into(),
                ))
            }
        };
        Self::new(weights, beta, input_range, model.gamma(), model.meta.clone())
    }

    pub fn weights(&self) -> &TernaryWeights {
        &self.weights
    }

    pub fn beta(&self) -> &IntegerBeta {
        &self.beta
    }

    pub fn input_range(&self) -> (i32, i32) {
        self.input_range
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

    pub fn centers_input(&self) -> bool {
        self.meta.preprocessing.zero_mean
    }

    pub fn bit_width(&self) -> u32 {
        bit_width(&self.beta)
    }

    pub fn headroom(&self) -> Headroom {
        compute_headroom(
            self.inputs(),
            self.hidden(),
            self.input_range,
            self.centers_input(),
            i128::from(self.beta.max_abs()),
        )
    }

    /// The same weights as a floating-point model (β entries as `f64`).
    pub fn float_reference(&self) -> Result<FloatModel> {
        FloatModel::new(
            WeightMatrix::Ternary(self.weights.clone()),
            self.beta.to_dense(),
            self.gamma,
            self.meta.clone(),
        )
    }

    fn check_sample(&self, x: &[i32]) -> Result<()> {
        let n = self.inputs();
        if x.len() != n {
            return Err(Error::dims("classify_int", format!("input of length {n}"), x.len()));
        }
        let (lo, hi) = self.input_range;
        if let Some(index) = x.iter().position(|v| !(lo..=hi).contains(v)) {
            return Err(Error::OutOfRange {
                index,
                value: i64::from(x[index]),
                lo: i64::from(lo),
                hi: i64::from(hi),
            });
        }
        Ok(())
    }

    /// Output scores for a raw sample, generic over the integer types.
    fn scores_generic<H, O>(&self, x: &[H], col_sums: &[H], beta: &[O], n: H) -> Result<Vec<O>>
    where
        H: IntOps,
        O: IntOps + From<H>,
    {
        let mut h = vec![H::ZERO; self.hidden()];
        kernel::project(self.weights.as_slice(), self.hidden(), x, &mut h);
        if self.centers_input() {
            let total = kernel::sum(x);
            if x.iter().all(|&v| v == x[0]) {
                return Err(Error::ZeroInput { after_centering: true });
            }
            kernel::center(&mut h, n, total, col_sums);
        }
        kernel::relu(&mut h);
        let mut scores = vec![O::ZERO; self.classes()];
        kernel::output(&h, beta, self.classes(), &mut scores);
        Ok(scores)
    }

    /// Raw-sample scores. Validates length, range and nonzero input.
    pub fn scores(&self, x: &[i32]) -> Result<Vec<i64>> {
        self.check_sample(x)?;
        if x.iter().all(|&v| v == 0) {
            return Err(Error::ZeroInput { after_centering: false });
        }
        self.scores_generic::<i32, i64>(x, &self.col_sums, &self.beta_wide, self.inputs() as i32)
    }

    /// Predicted class for a raw sample.
    pub fn classify(&self, x: &[i32]) -> Result<usize> {
        Ok(kernel::argmax(&self.scores(x)?))
    }

    /// Classifies every row of a row-major batch.
    pub fn classify_batch(&self, samples: &[i32]) -> Result<Vec<usize>> {
        let n = self.inputs();
        if !samples.len().is_multiple_of(n) {
            return Err(Error::dims("classify_batch", format!("a multiple of {n} values"), samples.len()));
        }
        samples.chunks_exact(n).map(|x| self.classify(x)).collect()
    }

    /// [`QuantizedModel::classify`] on op-counting integers, returning the
    /// class and the operations this call performed.
    pub fn classify_counted(&self, x: &[i32]) -> Result<(usize, OpCounts)> {
        self.check_sample(x)?;
        if x.iter().all(|&v| v == 0) {
            return Err(Error::ZeroInput { after_centering: false });
        }
        let before = instrument::snapshot();
        let xc: Vec<Counted<i32>> = x.iter().map(|&v| Counted(v)).collect();
        let cs: Vec<Counted<i32>> = self.col_sums.iter().map(|&v| Counted(v)).collect();
        let bc: Vec<Counted<i64>> = self.beta_wide.iter().map(|&v| Counted(v)).collect();
        let scores = self.scores_generic(&xc, &cs, &bc, Counted(self.inputs() as i32))?;
        let after = instrument::snapshot();
        let class = kernel::argmax(&scores);
        Ok((
            class,
            OpCounts {
                int_add: after.int_add - before.int_add,
                int_sub: after.int_sub - before.int_sub,
                int_mul: after.int_mul - before.int_mul,
                float_ops: after.float_ops - before.float_ops,
            },
        ))
    }
}

fn compute_headroom(n: usize, l: usize, range: (i32, i32), center: bool, beta_max: i128) -> Headroom {
    let n = n as i128;
    let (lo, hi) = (i128::from(range.0), i128::from(range.1));
    let max_abs = lo.abs().max(hi.abs());
    let proj = n * max_abs;
    let (hidden_stage, hidden_max) = if center {
        // n·p and s·c are each bounded by n²·max|x|; their difference is
        // Σ_j w_ji (n·x_j − s) with |n·x_j − s| ≤ n·(hi − lo).
        (proj.max(n * proj).max(n * n * (hi - lo)), n * n * (hi - lo))
    } else {
        (proj, proj)
    };
    Headroom {
        hidden_stage,
        hidden_max,
        output_max: l as i128 * hidden_max * beta_max,
    }
}

fn check_headroom(h: &Headroom, beta_max: i64, n: usize, center: bool) -> Result<()> {
    let i32_max = i128::from(i32::MAX);
    if h.hidden_stage > i32_max {
        return Err(Error::Headroom(format!(
            "hidden accumulator may reach {} > 2^31-1 (n = {n}{})",
            h.hidden_stage,
            if center { ", mean removal on" } else { "" }
        )));
    }
    if h.output_max > i128::from(i64::MAX) {
        return Err(Error::Headroom(format!(
            "output accumulator may reach {} > 2^63-1",
            h.output_max
        )));
    }
    if i128::from(beta_max) > i32_max {
        return Err(Error::Headroom(format!(
            "integer output weight magnitude {beta_max} does not fit in 32 bits"
        )));
    }
    Ok(())
}

/// `Wᵀx` for a raw sample using additions and subtractions only.
pub fn ternary_project(w: &TernaryWeights, x: &IntSample) -> Result<Vec<i32>> {
    let n = w.rows();
    if x.values.len() != n {
        return Err(Error::dims("ternary_project", format!("input of length {n}"), x.values.len()));
    }
    let (lo, hi) = x.range;
    let bound = n as i128 * i128::from(lo).abs().max(i128::from(hi).abs());
    if bound > i128::from(i32::MAX) {
        return Err(Error::Headroom(format!(
            "projection of {n} inputs in [{lo}, {hi}] may exceed 2^31-1"
        )));
    }
    let mut out = vec![0i32; w.cols()];
    kernel::project(w.as_slice(), w.cols(), &x.values, &mut out);
    Ok(out)
}

/// Entrywise `max(0, v)`.
pub fn relu_int(v: &[i32]) -> Vec<i32> {
    let mut out = v.to_vec();
    kernel::relu(&mut out);
    out
}

/// Predicted class for a raw integer sample.
///
/// The sample's declared range must lie inside the model's input range.
pub fn classify_int(model: &QuantizedModel, x: &IntSample) -> Result<usize> {
    let (lo, hi) = model.input_range;
    if x.range.0 < lo || x.range.1 > hi {
        return Err(Error::InvalidArgument(format!(
            "sample range [{}, {}] exceeds model input range [{lo}, {hi}]",
            x.range.0, x.range.1
        )));
    }
    model.classify(&x.values)
}
