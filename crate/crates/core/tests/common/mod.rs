//! Independent reference implementations for integration tests. Nothing here
//! calls into the library's numeric code.

#![allow(dead_code)]

use std::path::PathBuf;

/// Dense row-major matrix as nested vectors.
pub type Mat = Vec<Vec<f64>>;

pub fn naive_matmul(a: &Mat, b: &Mat) -> Mat {
    let (n, k, m) = (a.len(), b.len(), b[0].len());
    let mut out = vec![vec![0.0; m]; n];
    for i in 0..n {
        assert_eq!(a[i].len(), k);
        for j in 0..m {
            let mut s = 0.0;
            for p in 0..k {
                s += a[i][p] * b[p][j];
            }
            out[i][j] = s;
        }
    }
    out
}

pub fn transpose(a: &Mat) -> Mat {
    (0..a[0].len()).map(|j| a.iter().map(|r| r[j]).collect()).collect()
}

/// Solves `a · x = b` by Gaussian elimination with partial pivoting.
pub fn gauss_solve(a: &Mat, b: &Mat) -> Mat {
    let n = a.len();
    let m = b[0].len();
    let mut aug: Mat = a
        .iter()
        .zip(b)
        .map(|(ra, rb)| ra.iter().chain(rb.iter()).copied().collect())
        .collect();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| aug[i][col].abs().total_cmp(&aug[j][col].abs()))
            .unwrap();
        aug.swap(col, piv);
        let d = aug[col][col];
        assert!(d != 0.0, "singular oracle system");
        for r in 0..n {
            if r != col {
                let f = aug[r][col] / d;
                if f != 0.0 {
                    for c in col..n + m {
                        aug[r][c] -= f * aug[col][c];
                    }
                }
            }
        }
    }
    (0..n).map(|i| (0..m).map(|j| aug[i][n + j] / aug[i][i]).collect()).collect()
}

/// `β = (I/γ + HᵀH)⁻¹ HᵀT` with H formed explicitly.
pub fn ridge_oracle(x: &Mat, w: &Mat, labels: &[usize], classes: usize, gamma: f64) -> Mat {
    let h: Mat = naive_matmul(x, w)
        .into_iter()
        .map(|r| r.into_iter().map(|v| v.max(0.0)).collect())
        .collect();
    let t: Mat = labels
        .iter()
        .map(|&c| (0..classes).map(|k| if k == c { 1.0 } else { 0.0 }).collect())
        .collect();
    let ht = transpose(&h);
    let mut g = naive_matmul(&ht, &h);
    for (i, row) in g.iter_mut().enumerate() {
        row[i] += 1.0 / gamma;
    }
    gauss_solve(&g, &naive_matmul(&ht, &t))
}

pub fn argmax_f64(v: &[f64]) -> usize {
    let mut best = 0;
    for i in 1..v.len() {
        if v[i] > v[best] {
            best = i;
        }
    }
    best
}

pub fn argmax_i128(v: &[i128]) -> usize {
    let mut best = 0;
    for i in 1..v.len() {
        if v[i] > v[best] {
            best = i;
        }
    }
    best
}

/// Scores of a ternary/integer model in i128, following the definition:
/// optional mean removal (scaled by n), ReLU, then the output weights.
pub fn integer_scores_oracle(w: &[i8], n: usize, l: usize, beta: &[i64], m: usize, x: &[i32], center: bool) -> Vec<i128> {
    let s: i128 = x.iter().map(|&v| i128::from(v)).sum();
    let mut h = vec![0i128; l];
    for (i, hi) in h.iter_mut().enumerate() {
        let mut acc = 0i128;
        for j in 0..n {
            let xj = if center {
                n as i128 * i128::from(x[j]) - s
            } else {
                i128::from(x[j])
            };
            acc += i128::from(w[j * l + i]) * xj;
        }
        *hi = acc.max(0);
    }
    (0..m)
        .map(|c| (0..l).map(|i| h[i] * i128::from(beta[i * m + c])).sum())
        .collect()
}

/// Float-arithmetic scores of the same integer model on the same raw input.
pub fn float_scores_of_integer_model(w: &[i8], n: usize, l: usize, beta: &[i64], m: usize, x: &[i32], center: bool) -> Vec<f64> {
    let mean = x.iter().map(|&v| f64::from(v)).sum::<f64>() / n as f64;
    let mut h = vec![0.0; l];
    for (i, hi) in h.iter_mut().enumerate() {
        for j in 0..n {
            let xj = if center { f64::from(x[j]) - mean } else { f64::from(x[j]) };
            *hi += f64::from(w[j * l + i]) * xj;
        }
        *hi = hi.max(0.0);
    }
    (0..m)
        .map(|c| (0..l).map(|i| h[i] * beta[i * m + c] as f64).sum())
        .collect()
}

/// MNIST directory: `$ELM_DATA_DIR/mnist`, else `/root/data/mnist`.
pub fn mnist_dir() -> Option<PathBuf> {
    let base = std::env::var_os("ELM_DATA_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("/root/data"));
    let dir = base.join("mnist");
    dir.join("train-images-idx3-ubyte").exists().then_some(dir)
}
