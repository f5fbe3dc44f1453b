//! Operation counting for the inference paths.
//!
//! [`Counted`] wraps an integer and tallies every add, subtract and multiply
//! the kernels perform on it. The floating-point path reports its arithmetic
//! through [`record_float_ops`], so one snapshot shows both.

use std::cell::Cell;

use super::kernel::IntOps;

#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
pub struct OpCounts {
    pub int_add: u64,
    pub int_sub: u64,
    pub int_mul: u64,
    pub float_ops: u64,
}

thread_local! {
    static COUNTS: Cell<OpCounts> = Cell::new(OpCounts::default());
}

fn bump(f: impl FnOnce(&mut OpCounts)) {
    COUNTS.with(|c| {
        let mut v = c.get();
        f(&mut v);
        c.set(v);
    });
}

/// Clears this thread's counters.
pub fn reset() {
    COUNTS.with(|c| c.set(OpCounts::default()));
}

/// This thread's counters since the last [`reset`].
pub fn snapshot() -> OpCounts {
    COUNTS.with(Cell::get)
}

pub(crate) fn record_float_ops(n: u64) {
    bump(|c| c.float_ops += n);
}

/// Integer that counts the operations performed on it.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Counted<T>(pub T);

macro_rules! counted {
    ($t:ty) => {
        impl IntOps for Counted<$t> {
            const ZERO: Self = Counted(0);
            fn add(self, rhs: Self) -> Self {
                bump(|c| c.int_add += 1);
                Counted(self.0 + rhs.0)
            }
            fn sub(self, rhs: Self) -> Self {
                bump(|c| c.int_sub += 1);
                Counted(self.0 - rhs.0)
            }
            fn mul(self, rhs: Self) -> Self {
                bump(|c| c.int_mul += 1);
                Counted(self.0 * rhs.0)
            }
        }
    };
}

counted!(i32);
counted!(i64);

impl From<Counted<i32>> for Counted<i64> {
    fn from(v: Counted<i32>) -> Self {
        Counted(i64::from(v.0))
    }
}
