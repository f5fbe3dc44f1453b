//! Integer output weights and the precision-halving ladder.
//!
//! `β_int = round(β / τ)` with τ the smallest nonzero |β|, so the entry that
//! set the scale maps to ±1. Each ladder step halves every entry and rounds
//! again, until the largest magnitude is 1. Rounding is half away from zero
//! throughout, which keeps signs intact.

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;

/// L×m integer output weights plus the scale that relates them to β.
#[derive(Debug, Clone, PartialEq)]
pub struct IntegerBeta {
    rows: usize,
    cols: usize,
    values: Vec<i64>,
    tau: f64,
    ladder_step: u32,
}

impl IntegerBeta {
    pub fn new(rows: usize, cols: usize, values: Vec<i64>, tau: f64, ladder_step: u32) -> Result<Self> {
        if values.len() != rows * cols {
            return Err(Error::dims("IntegerBeta::new", rows * cols, values.len()));
        }
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::InvalidArgument(format!("tau must be positive, got {tau}")));
        }
        Ok(Self {
            rows,
            cols,
            values,
            tau,
            ladder_step,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn values(&self) -> &[i64] {
        &self.values
    }

    pub fn get(&self, r: usize, c: usize) -> i64 {
        self.values[r * self.cols + c]
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn ladder_step(&self) -> u32 {
        self.ladder_step
    }

    pub fn max_abs(&self) -> i64 {
        self.values.iter().map(|v| v.abs()).max().unwrap_or(0)
    }

    /// Entries as `f64` (exact for magnitudes below 2⁵³).
    pub fn to_dense(&self) -> DenseMatrix {
        DenseMatrix::from_raw(
            self.rows,
            self.cols,
            self.values.iter().map(|&v| v as f64).collect(),
        )
    }

    /// `τ · β_int`, the real-valued weights this matrix stands for.
    pub fn dequantize(&self) -> DenseMatrix {
        DenseMatrix::from_raw(
            self.rows,
            self.cols,
            self.values.iter().map(|&v| v as f64 * self.tau).collect(),
        )
    }
}

/// Magnitude bound on quantized values. Every `f64` at or above 2^53 is
/// already an integer, so rounding stays exact up to here; the bound keeps
/// halving and accumulation in `i64` well defined.
const MAX_VALUE: f64 = (1u64 << 62) as f64;

/// `round(β/τ)` with τ the minimum nonzero |β|.
pub fn quantize_beta(beta: &DenseMatrix) -> Result<IntegerBeta> {
    if let Some(index) = beta.as_slice().iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { what: "beta", index });
    }
    let tau = beta
        .as_slice()
        .iter()
        .map(|v| v.abs())
        .filter(|&v| v > 0.0)
        .fold(f64::INFINITY, f64::min);
    if !tau.is_finite() {
        return Err(Error::ZeroBeta);
    }
    let mut values = Vec::with_capacity(beta.as_slice().len());
    for &b in beta.as_slice() {
        let q = (b / tau).round();
        if q.abs() >= MAX_VALUE {
            return Err(Error::InvalidArgument(format!(
                "beta dynamic range too wide to quantize: max|beta|/tau = {:e}",
                (b / tau).abs()
            )));
        }
        values.push(q as i64);
    }
    IntegerBeta::new(beta.rows(), beta.cols(), values, tau, 0)
}

/// Halves every entry (rounding half away from zero) and doubles τ.
pub fn reduce_precision_step(b: &IntegerBeta) -> Result<IntegerBeta> {
    let max_abs = b.max_abs();
    if max_abs <= 1 {
        return Err(Error::LadderExhausted { max_abs });
    }
    let values = b.values.iter().map(|&v| halve_round(v)).collect();
    IntegerBeta::new(b.rows, b.cols, values, b.tau * 2.0, b.ladder_step + 1)
}

/// `round(v / 2)`, ties away from zero.
#[inline]
fn halve_round(v: i64) -> i64 {
    let mag = v.unsigned_abs().div_ceil(2);
    if v < 0 {
        -(mag as i64)
    } else {
        mag as i64
    }
}

/// Every rung from `start` down to max |entry| = 1, `start` included.
pub fn ladder(start: IntegerBeta) -> Vec<IntegerBeta> {
    let mut rungs = vec![start];
    while let Ok(next) = reduce_precision_step(rungs.last().unwrap()) {
        rungs.push(next);
    }
    rungs
}

/// Sign bit plus the bits needed for the largest magnitude; 1 for all-zero.
pub fn bit_width(b: &IntegerBeta) -> u32 {
    bit_width_of(b.max_abs())
}

pub fn bit_width_of(max_abs: i64) -> u32 {
    let mag = max_abs.unsigned_abs();
    if mag == 0 {
        1
    } else {
        1 + (64 - mag.leading_zeros())
    }
}
