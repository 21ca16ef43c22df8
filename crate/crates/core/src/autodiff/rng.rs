//! Deterministic pseudo-random numbers.
//!
//! The generator is xoshiro256** (Blackman and Vigna) with its 256-bit state
//! filled from four consecutive outputs of SplitMix64 applied to the 64-bit
//! seed. Both algorithms use only wrapping integer arithmetic, so a given
//! seed yields the same stream on every platform.
//!
//! ```text
//! splitmix64(s):  s += 0x9E3779B97F4A7C15
//!                 z = s
//!                 z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
//!                 z = (z ^ (z >> 27)) * 0x94D049BB133111EB
//!                 return z ^ (z >> 31)
//!
//! next():         out = rotl(s1 * 5, 7) * 9
//!                 t = s1 << 17
//!                 s2 ^= s0; s3 ^= s1; s1 ^= s2; s0 ^= s3
//!                 s2 ^= t;  s3 = rotl(s3, 45)
//!                 return out
//! ```
//!
//! Uniform reals take the top 53 bits: `(next() >> 11) * 2^-53`, giving
//! values in `[0, 1)`.

use rand_core::{impls, RngCore};
use rand_distr::{Beta, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

pub const ALGORITHM: &str = "xoshiro256**/splitmix64";

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// One SplitMix64 step on `state`, returning the mixed output.
pub fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(GOLDEN);
    mix64(*state)
}

/// The SplitMix64 finalizer as a stateless hash.
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// FNV-1a over the bytes of `label`.
pub fn fnv1a64(label: &str) -> u64 {
    label.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

/// Derives an independent seed for a named stage: `mix64(mix64(master ^ fnv1a64(label)) + index)`.
pub fn derive_seed(master: u64, label: &str, index: u64) -> u64 {
    mix64(mix64(master ^ fnv1a64(label)).wrapping_add(index))
}

/// Counter-based uniform in `[0, 1)` keyed by `(seed, a, b)`; used for dropout
/// masks that must not depend on how a batch is split.
pub fn keyed_uniform(seed: u64, a: u64, b: u64) -> f64 {
    let h = mix64(mix64(seed ^ mix64(a.wrapping_add(GOLDEN))).wrapping_add(b));
    (h >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngState {
    pub seed: u64,
    s: [u64; 4],
}

impl RngState {
    pub fn new(seed: u64) -> Self {
        let mut sm = seed;
        let s = [
            splitmix64(&mut sm),
            splitmix64(&mut sm),
            splitmix64(&mut sm),
            splitmix64(&mut sm),
        ];
        RngState { seed, s }
    }

    pub fn next_u64(&mut self) -> u64 {
        let s = &mut self.s;
        let out = s[1].wrapping_mul(5).rotate_left(7).wrapping_mul(9);
        let t = s[1] << 17;
        s[2] ^= s[0];
        s[3] ^= s[1];
        s[1] ^= s[2];
        s[0] ^= s[3];
        s[2] ^= t;
        s[3] = s[3].rotate_left(45);
        out
    }

    /// Uniform in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn uniform_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Uniform integer in `0..n` by rejection (no modulo bias).
    pub fn below(&mut self, n: usize) -> usize {
        assert!(n > 0, "below(0)");
        let n = n as u64;
        let zone = u64::MAX - (u64::MAX % n);
        loop {
            let x = self.next_u64();
            if x < zone {
                return (x % n) as usize;
            }
        }
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.uniform() < p
    }

    pub fn normal(&mut self, mean: f64, std: f64) -> f64 {
        let z: f64 = StandardNormal.sample(self);
        mean + std * z
    }

    /// Draw from `Beta(a, b)`. Panics on non-positive shapes.
    pub fn beta(&mut self, a: f64, b: f64) -> f64 {
        Beta::new(a, b).expect("beta shapes must be positive").sample(self)
    }

    /// Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }

    pub fn permutation(&mut self, n: usize) -> Vec<usize> {
        let mut p: Vec<usize> = (0..n).collect();
        self.shuffle(&mut p);
        p
    }

    /// Fresh generator seeded from this stream.
    pub fn fork(&mut self) -> RngState {
        RngState::new(self.next_u64())
    }
}

impl RngCore for RngState {
    fn next_u32(&mut self) -> u32 {
        (RngState::next_u64(self) >> 32) as u32
    }

    fn next_u64(&mut self) -> u64 {
        RngState::next_u64(self)
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        impls::fill_bytes_via_next(self, dst)
    }
}
