//! Seeded random streams.
//!
//! Every random quantity in the crate is drawn from a SplitMix64 stream
//! seeded with a named 64-bit seed. The expansion is fixed so other
//! implementations can reproduce the same fields:
//!
//! * `next_u64` is the raw SplitMix64 output (increment `0x9E3779B97F4A7C15`,
//!   finalizer multipliers `0xBF58476D1CE4E5B9` and `0x94D049BB133111EB`);
//! * `uniform` maps it to `[0, 1)` as `(x >> 11) * 2^-53`;
//! * `range(lo, hi)` is `lo + (hi - lo) * uniform()`;
//! * `int_in(lo, hi)` is `lo + floor(uniform() * (hi - lo + 1))`;
//! * `normal` is Box-Muller on two consecutive uniforms (cosine branch).

use rand_core::RngCore;
use rand_xoshiro::SplitMix64;
use rand_core::SeedableRng;

pub struct SeedStream(SplitMix64);

impl SeedStream {
    pub fn new(seed: u64) -> Self {
        SeedStream(SplitMix64::seed_from_u64(seed))
    }

    /// Independent sub-stream, e.g. one per grid point.
    pub fn derive(seed: u64, index: u64) -> Self {
        let mut base = SplitMix64::seed_from_u64(seed ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15));
        SeedStream(SplitMix64::seed_from_u64(base.next_u64()))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }

    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    pub fn int_in(&mut self, lo: i64, hi: i64) -> i64 {
        let span = (hi - lo + 1) as f64;
        lo + (self.uniform() * span).floor() as i64
    }

    pub fn normal(&mut self) -> f64 {
        let u1 = self.uniform().max(f64::MIN_POSITIVE);
        let u2 = self.uniform();
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }
}
