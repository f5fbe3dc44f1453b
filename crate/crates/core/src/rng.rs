//! Seedable, splittable random source.
//!
//! The generator is xoshiro256++ seeded from a `u64` through SplitMix64 (the
//! reference seeding of the xoshiro family). Everything drawn from it goes
//! through the three helpers below, whose exact algorithms are part of the
//! model-file contract:
//!
//! * [`ElmRng::open01`]: `((x >> 11) + 0.5) · 2⁻⁵³`, strictly inside (0, 1).
//! * [`ElmRng::below`]: unbiased rejection sampling; draws `x` until
//!   `x ≥ (2⁶⁴ mod bound)`, then returns `x mod bound`.
//! * [`ElmRng::stream`]: child seed `mix(seed ⊕ mix(stream + φ))`, where `mix`
//!   is the SplitMix64 finalizer and `φ = 0x9E3779B97F4A7C15`.

use rand_core::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

/// Algorithm identifier written into model files.
pub const PRNG_ID: &str = "xoshiro256++/splitmix64/v1";

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives an independent seed for sub-stream `stream` of `seed`.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    mix(seed ^ mix(stream.wrapping_add(GOLDEN)))
}

#[derive(Debug, Clone)]
pub struct ElmRng {
    inner: Xoshiro256PlusPlus,
}

impl ElmRng {
    pub fn new(seed: u64) -> Self {
        Self {
            inner: Xoshiro256PlusPlus::seed_from_u64(seed),
        }
    }

    pub fn stream(seed: u64, stream: u64) -> Self {
        Self::new(derive_seed(seed, stream))
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform on the open interval (0, 1).
    #[inline]
    pub fn open01(&mut self) -> f64 {
        ((self.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in `[0, bound)`. `bound` must be nonzero.
    #[inline]
    pub fn below(&mut self, bound: u64) -> u64 {
        assert!(bound > 0, "below(0)");
        let threshold = bound.wrapping_neg() % bound;
        loop {
            let x = self.next_u64();
            if x >= threshold {
                return x % bound;
            }
        }
    }

    /// Fisher–Yates shuffle driven by [`ElmRng::below`].
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i as u64 + 1) as usize;
            items.swap(i, j);
        }
    }

    /// Approximately standard normal draw (Box–Muller on two `open01` draws).
    pub fn normal(&mut self) -> f64 {
        let u1 = self.open01();
        let u2 = self.open01();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }
}
