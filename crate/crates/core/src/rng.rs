//! Seeded random streams.
//!
//! Every randomized operation in this crate draws from a [`SeededStream`]:
//! a ChaCha8 generator seeded through `SeedableRng::seed_from_u64`, whose
//! output sequence is fixed by the `rand_chacha` contract. Derived draws use
//! plain, documented transforms so that the streams can be re-implemented
//! elsewhere:
//!
//! * uniform `(0, 1]`: `1 - (next_u64 >> 11) * 2^-53`
//! * standard normal: Box–Muller on two uniforms `u1, u2`, yielding
//!   `sqrt(-2 ln u1) * cos(2π u2)` first and the matching `sin` value on the
//!   following call
//! * integer below `n`: rejection sampling on `next_u64` against the largest
//!   multiple of `n`
//!
//! Each consumer reads its own ChaCha stream id (see [`Purpose`]), so a
//! matrix and a sample drawn with the same seed are independent.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// ChaCha stream ids, one per kind of draw.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Purpose {
    Matrix = 0,
    NullSpace = 1,
    Init = 2,
}

#[derive(Debug, Clone)]
pub struct SeededStream {
    rng: ChaCha8Rng,
    spare_normal: Option<f64>,
}

impl SeededStream {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            spare_normal: None,
        }
    }

    /// Stream `purpose` of the generator seeded with `seed`.
    pub fn for_purpose(seed: u64, purpose: Purpose) -> Self {
        let mut s = Self::new(seed);
        s.rng.set_stream(purpose as u64);
        s
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Uniform draw in `(0, 1]`.
    pub fn uniform_open0(&mut self) -> f64 {
        const SCALE: f64 = 1.0 / (1u64 << 53) as f64;
        1.0 - (self.next_u64() >> 11) as f64 * SCALE
    }

    pub fn standard_normal(&mut self) -> f64 {
        if let Some(z) = self.spare_normal.take() {
            return z;
        }
        let u1 = self.uniform_open0();
        let u2 = self.uniform_open0();
        let radius = (-2.0 * u1.ln()).sqrt();
        let angle = 2.0 * std::f64::consts::PI * u2;
        self.spare_normal = Some(radius * angle.sin());
        radius * angle.cos()
    }

    /// Uniform integer in `0..n`. `n` must be positive.
    pub fn below(&mut self, n: u64) -> u64 {
        assert!(n > 0, "below(0)");
        let zone = u64::MAX - (u64::MAX % n);
        loop {
            let x = self.next_u64();
            if x < zone {
                return x % n;
            }
        }
    }
}
