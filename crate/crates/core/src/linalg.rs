//! Dense linear algebra for closed-form ridge training.
//!
//! Only what training needs: a row-major `f64` matrix, streaming formation of
//! `HᵀH` / `HᵀT` one row block at a time, and a Cholesky solve of the shifted
//! (hence positive definite) normal equations.

use crate::error::{Error, Result};

/// Row-major dense matrix of finite `f64` values.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    /// Builds a matrix from row-major data, rejecting wrong lengths and
    /// non-finite entries.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::dims(
                "DenseMatrix::from_vec",
                format!("{} values for {rows}x{cols}", rows * cols),
                data.len(),
            ));
        }
        if let Some(index) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                what: "matrix data",
                index,
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != cols) {
            return Err(Error::dims("DenseMatrix::from_rows", cols, bad.len()));
        }
        Self::from_vec(rows.len(), cols, rows.concat())
    }

    /// Unchecked constructor for values produced by arithmetic on finite data.
    pub(crate) fn from_raw(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), rows * cols);
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    /// Sets one entry. Non-finite values are rejected.
    pub fn set(&mut self, r: usize, c: usize, value: f64) -> Result<()> {
        if !value.is_finite() {
            return Err(Error::NonFinite {
                what: "matrix entry",
                index: r * self.cols + c,
            });
        }
        self.data[r * self.cols + c] = value;
        Ok(())
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// Contiguous block of rows `[start, end)`.
    pub fn row_block(&self, start: usize, end: usize) -> DenseMatrix {
        DenseMatrix::from_raw(
            end - start,
            self.cols,
            self.data[start * self.cols..end * self.cols].to_vec(),
        )
    }

    pub fn transpose(&self) -> DenseMatrix {
        let mut out = vec![0.0; self.data.len()];
        for r in 0..self.rows {
            for c in 0..self.cols {
                out[c * self.rows + r] = self.data[r * self.cols + c];
            }
        }
        DenseMatrix::from_raw(self.cols, self.rows, out)
    }

    pub fn scale(&self, factor: f64) -> Result<DenseMatrix> {
        DenseMatrix::from_vec(
            self.rows,
            self.cols,
            self.data.iter().map(|v| v * factor).collect(),
        )
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// `self · rhs`.
    pub fn matmul(&self, rhs: &DenseMatrix) -> Result<DenseMatrix> {
        if self.cols != rhs.rows {
            return Err(Error::dims(
                "matmul",
                format!("rhs with {} rows", self.cols),
                format!("{}x{}", rhs.rows, rhs.cols),
            ));
        }
        let mut out = DenseMatrix::zeros(self.rows, rhs.cols);
        gemm(self, false, rhs, 1.0, 0.0, &mut out);
        Ok(out)
    }

    /// `selfᵀ · rhs` without materializing the transpose.
    pub fn t_matmul(&self, rhs: &DenseMatrix) -> Result<DenseMatrix> {
        if self.rows != rhs.rows {
            return Err(Error::dims(
                "t_matmul",
                format!("rhs with {} rows", self.rows),
                format!("{}x{}", rhs.rows, rhs.cols),
            ));
        }
        let mut out = DenseMatrix::zeros(self.cols, rhs.cols);
        gemm(self, true, rhs, 1.0, 0.0, &mut out);
        Ok(out)
    }

    pub(crate) fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }
}

/// `out = alpha · op(a) · b + beta · out`, with `op` optionally transposing `a`.
/// Shapes are checked by callers.
fn gemm(a: &DenseMatrix, transpose_a: bool, b: &DenseMatrix, alpha: f64, beta: f64, out: &mut DenseMatrix) {
    let (m, k, rsa, csa) = if transpose_a {
        (a.cols, a.rows, 1isize, a.cols as isize)
    } else {
        (a.rows, a.cols, a.cols as isize, 1isize)
    };
    let n = b.cols;
    debug_assert_eq!(b.rows, k);
    debug_assert_eq!(out.shape(), (m, n));
    if m == 0 || n == 0 {
        return;
    }
    if k == 0 {
        for v in out.data.iter_mut() {
            *v *= beta;
        }
        return;
    }
    // SAFETY: all three buffers are live for the call, sized per the strides
    // above, and `out` does not alias `a` or `b`.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            alpha,
            a.data.as_ptr(),
            rsa,
            csa,
            b.data.as_ptr(),
            b.cols as isize,
            1,
            beta,
            out.data.as_mut_ptr(),
            out.cols as isize,
            1,
        );
    }
}

/// Normal-equation accumulator: `gram` (L×L) and `rhs` (L×m).
#[derive(Debug, Clone, PartialEq)]
pub struct SpdSystem {
    pub gram: DenseMatrix,
    pub rhs: DenseMatrix,
}

impl SpdSystem {
    /// Empty accumulator for `l` hidden units and `m` outputs.
    pub fn zeros(l: usize, m: usize) -> Self {
        Self {
            gram: DenseMatrix::zeros(l, l),
            rhs: DenseMatrix::zeros(l, m),
        }
    }

    pub fn hidden(&self) -> usize {
        self.gram.rows
    }

    pub fn outputs(&self) -> usize {
        self.rhs.cols
    }

    /// Adds `blockᵀ·block` to the Gram matrix and `blockᵀ·targets` to the
    /// right-hand side.
    pub fn accumulate(&mut self, block: &DenseMatrix, targets: &DenseMatrix) -> Result<()> {
        let l = self.hidden();
        if block.cols != l {
            return Err(Error::dims(
                "accumulate_gram",
                format!("row block with {l} columns"),
                format!("{}x{}", block.rows, block.cols),
            ));
        }
        if targets.rows != block.rows || targets.cols != self.outputs() {
            return Err(Error::dims(
                "accumulate_gram",
                format!("target block {}x{}", block.rows, self.outputs()),
                format!("{}x{}", targets.rows, targets.cols),
            ));
        }
        gemm(block, true, block, 1.0, 1.0, &mut self.gram);
        gemm(block, true, targets, 1.0, 1.0, &mut self.rhs);
        // GEMM may round the two triangles differently; mirror the upper one.
        for i in 0..l {
            for j in 0..i {
                self.gram.data[i * l + j] = self.gram.data[j * l + i];
            }
        }
        Ok(())
    }

    /// Entrywise sum of two accumulators built from disjoint row sets.
    pub fn merge(&mut self, other: &SpdSystem) -> Result<()> {
        if self.gram.shape() != other.gram.shape() || self.rhs.shape() != other.rhs.shape() {
            return Err(Error::dims(
                "SpdSystem::merge",
                format!("gram {:?}, rhs {:?}", self.gram.shape(), self.rhs.shape()),
                format!("gram {:?}, rhs {:?}", other.gram.shape(), other.rhs.shape()),
            ));
        }
        for (a, b) in self.gram.data.iter_mut().zip(&other.gram.data) {
            *a += b;
        }
        for (a, b) in self.rhs.data.iter_mut().zip(&other.rhs.data) {
            *a += b;
        }
        Ok(())
    }

    /// Adds `I/γ` to the Gram diagonal.
    pub fn add_ridge(&mut self, gamma: f64) -> Result<()> {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "regularization factor must be positive and finite, got {gamma}"
            )));
        }
        let l = self.hidden();
        for i in 0..l {
            self.gram.data[i * l + i] += 1.0 / gamma;
        }
        Ok(())
    }

    /// `‖gram·x − rhs‖∞`.
    pub fn residual_inf(&self, x: &DenseMatrix) -> Result<f64> {
        let mut r = self.gram.matmul(x)?;
        for (a, b) in r.data.iter_mut().zip(&self.rhs.data) {
            *a -= b;
        }
        Ok(r.max_abs())
    }
}

/// Value-style wrapper over [`SpdSystem::accumulate`].
pub fn accumulate_gram(
    row_block: &DenseMatrix,
    mut acc: SpdSystem,
    target_block: &DenseMatrix,
) -> Result<SpdSystem> {
    acc.accumulate(row_block, target_block)?;
    Ok(acc)
}

const SYMMETRY_TOL: f64 = 1e-12;
const BLOCK: usize = 96;

/// Solves `gram · β = rhs` for symmetric positive definite `gram`.
///
/// Factorizes with a blocked Cholesky, then applies up to two rounds of
/// iterative refinement.
pub fn solve_spd(system: &SpdSystem) -> Result<DenseMatrix> {
    let l = system.hidden();
    if system.gram.cols != l {
        return Err(Error::dims(
            "solve_spd",
            "square gram",
            format!("{}x{}", system.gram.rows, system.gram.cols),
        ));
    }
    if system.rhs.rows != l {
        return Err(Error::dims(
            "solve_spd",
            format!("rhs with {l} rows"),
            format!("{}x{}", system.rhs.rows, system.rhs.cols),
        ));
    }
    check_symmetric(&system.gram)?;

    let factor = cholesky(&system.gram)?;
    let mut beta = factor.solve(&system.rhs);

    for _ in 0..2 {
        let mut resid = system.gram.matmul(&beta)?;
        for (r, b) in resid.data.iter_mut().zip(&system.rhs.data) {
            *r = b - *r;
        }
        if resid.max_abs() == 0.0 {
            break;
        }
        let correction = factor.solve(&resid);
        for (b, d) in beta.data.iter_mut().zip(&correction.data) {
            *b += d;
        }
    }
    if let Some(index) = beta.data.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            what: "solution",
            index,
        });
    }
    Ok(beta)
}

fn check_symmetric(a: &DenseMatrix) -> Result<()> {
    let n = a.rows;
    let scale = a.max_abs().max(f64::MIN_POSITIVE);
    for i in 0..n {
        for j in 0..i {
            let (x, y) = (a.data[i * n + j], a.data[j * n + i]);
            if (x - y).abs() > SYMMETRY_TOL * scale {
                return Err(Error::InvalidArgument(format!(
                    "gram is not symmetric at ({i}, {j}): {x} vs {y}"
                )));
            }
        }
    }
    Ok(())
}

/// Lower-triangular Cholesky factor stored densely (upper part unused).
struct Cholesky {
    n: usize,
    lower: Vec<f64>,
}

fn cholesky(a: &DenseMatrix) -> Result<Cholesky> {
    let n = a.rows;
    let mut l = a.data.clone();

    let mut k0 = 0;
    while k0 < n {
        let kb = BLOCK.min(n - k0);
        let k1 = k0 + kb;

        // Diagonal block.
        for j in k0..k1 {
            let rj = j * n;
            let mut d = l[rj + j];
            for p in k0..j {
                d -= l[rj + p] * l[rj + p];
            }
            if !(d > 0.0) || !d.is_finite() {
                return Err(Error::CholeskyBreakdown { pivot: j, value: d });
            }
            let d = d.sqrt();
            l[rj + j] = d;
            for i in j + 1..k1 {
                let ri = i * n;
                let mut s = l[ri + j];
                for p in k0..j {
                    s -= l[ri + p] * l[rj + p];
                }
                l[ri + j] = s / d;
            }
        }

        // Panel below the diagonal block.
        for i in k1..n {
            let ri = i * n;
            for j in k0..k1 {
                let rj = j * n;
                let mut s = l[ri + j];
                for p in k0..j {
                    s -= l[ri + p] * l[rj + p];
                }
                l[ri + j] = s / l[rj + j];
            }
        }

        // Trailing update: A[k1.., k1..] -= P · Pᵀ where P = L[k1.., k0..k1].
        let rest = n - k1;
        if rest > 0 {
            let base = l.as_mut_ptr();
            // SAFETY: the panel (columns k0..k1) and the trailing block
            // (columns k1..n) of rows k1..n are disjoint regions of `l`.
            unsafe {
                let panel = base.add(k1 * n + k0) as *const f64;
                let trailing = base.add(k1 * n + k1);
                matrixmultiply::dgemm(
                    rest,
                    kb,
                    rest,
                    -1.0,
                    panel,
                    n as isize,
                    1,
                    panel,
                    1,
                    n as isize,
                    1.0,
                    trailing,
                    n as isize,
                    1,
                );
            }
        }
        k0 = k1;
    }
    Ok(Cholesky { n, lower: l })
}

impl Cholesky {
    fn solve(&self, rhs: &DenseMatrix) -> DenseMatrix {
        let n = self.n;
        let m = rhs.cols;
        let l = &self.lower;
        let mut y = rhs.data.clone();
        // L y = b
        for i in 0..n {
            let (done, rest) = y.split_at_mut(i * m);
            let yi = &mut rest[..m];
            for p in 0..i {
                let c = l[i * n + p];
                if c != 0.0 {
                    for (a, b) in yi.iter_mut().zip(&done[p * m..(p + 1) * m]) {
                        *a -= c * b;
                    }
                }
            }
            let d = l[i * n + i];
            for a in yi.iter_mut() {
                *a /= d;
            }
        }
        // Lᵀ x = y
        for i in (0..n).rev() {
            let (head, tail) = y.split_at_mut((i + 1) * m);
            let xi = &mut head[i * m..];
            for p in i + 1..n {
                let c = l[p * n + i];
                if c != 0.0 {
                    for (a, b) in xi.iter_mut().zip(&tail[(p - i - 1) * m..(p - i) * m]) {
                        *a -= c * b;
                    }
                }
            }
            let d = l[i * n + i];
            for a in xi.iter_mut() {
                *a /= d;
            }
        }
        DenseMatrix::from_raw(n, m, y)
    }
}
