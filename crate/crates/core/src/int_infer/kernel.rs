//! Integer inference kernels.
//!
//! Everything in this file is generic over [`IntOps`] so the same code runs on
//! machine integers and on the op-counting wrapper in `instrument`. This file
//! must stay free of any non-integer type; the acceptance suite scans it.

/// Arithmetic the integer path is allowed to use.
pub trait IntOps: Copy + PartialEq + PartialOrd {
    const ZERO: Self;
    fn add(self, rhs: Self) -> Self;
    fn sub(self, rhs: Self) -> Self;
    fn mul(self, rhs: Self) -> Self;
}

impl IntOps for i32 {
    const ZERO: Self = 0;
    #[inline(always)]
    fn add(self, rhs: Self) -> Self {
        self + rhs
    }
    #[inline(always)]
    fn sub(self, rhs: Self) -> Self {
        self - rhs
    }
    #[inline(always)]
    fn mul(self, rhs: Self) -> Self {
        self * rhs
    }
}

impl IntOps for i64 {
    const ZERO: Self = 0;
    #[inline(always)]
    fn add(self, rhs: Self) -> Self {
        self + rhs
    }
    #[inline(always)]
    fn sub(self, rhs: Self) -> Self {
        self - rhs
    }
    #[inline(always)]
    fn mul(self, rhs: Self) -> Self {
        self * rhs
    }
}

/// `out[i] = Σ_j w[j][i] · x[j]` for row-major ternary `w` with `cols`
/// columns, using only additions and subtractions.
///
/// Zero inputs are skipped, so sparse raw signals cost less.
#[inline]
pub fn project<T: IntOps>(w: &[i8], cols: usize, x: &[T], out: &mut [T]) {
    for v in out.iter_mut() {
        *v = T::ZERO;
    }
    for (row, &xj) in w.chunks_exact(cols).zip(x) {
        if xj == T::ZERO {
            continue;
        }
        for (acc, &wji) in out.iter_mut().zip(row) {
            *acc = match wji {
                1 => acc.add(xj),
                -1 => acc.sub(xj),
                _ => *acc,
            };
        }
    }
}

pub fn sum<T: IntOps>(x: &[T]) -> T {
    x.iter().fold(T::ZERO, |acc, &v| acc.add(v))
}

/// Rewrites a projection of raw `x` into the projection of `n·x − Σx`,
/// a positive multiple of the mean-removed signal: `p[i] ← n·p[i] − s·c[i]`
/// with `c` the column sums of the ternary weights.
pub fn center<T: IntOps>(proj: &mut [T], n: T, total: T, col_sums: &[T]) {
    for (p, &c) in proj.iter_mut().zip(col_sums) {
        *p = n.mul(*p).sub(total.mul(c));
    }
}

pub fn relu<T: IntOps>(v: &mut [T]) {
    for x in v.iter_mut() {
        if *x < T::ZERO {
            *x = T::ZERO;
        }
    }
}

/// `scores = βᵀ h` with β row-major (hidden × classes), accumulated in the
/// wider type `O`.
pub fn output<H, O>(h: &[H], beta: &[O], classes: usize, scores: &mut [O])
where
    H: IntOps,
    O: IntOps + From<H>,
{
    for s in scores.iter_mut() {
        *s = O::ZERO;
    }
    for (&hi, row) in h.iter().zip(beta.chunks_exact(classes)) {
        if hi == H::ZERO {
            continue;
        }
        let hw = O::from(hi);
        for (s, &b) in scores.iter_mut().zip(row) {
            *s = s.add(b.mul(hw));
        }
    }
}

/// Index of the largest score; ties go to the lowest index.
pub fn argmax<T: PartialOrd>(scores: &[T]) -> usize {
    let mut best = 0;
    for i in 1..scores.len() {
        if scores[i] > scores[best] {
            best = i;
        }
    }
    best
}
