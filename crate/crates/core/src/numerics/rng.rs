//! Seeded random number generation with splittable child streams.

use rand::{Rng as _, SeedableRng};
use rand_chacha::ChaCha12Rng;

/// Deterministic generator: the same seed yields the same stream on a fixed
/// platform. Not shareable across threads; parallel work derives independent
/// children with [`Rng::child`] up front, one per work item.
#[derive(Debug, Clone)]
pub struct Rng {
    seed: u64,
    inner: ChaCha12Rng,
    spare_normal: Option<f64>,
}

/// SplitMix64 finalizer, used as the key-derivation step for child streams.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Rng {
            seed,
            inner: ChaCha12Rng::seed_from_u64(seed),
            spare_normal: None,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Child stream `index` of this generator's seed. Children are derived
    /// from the root seed only (not the current state), so the set of
    /// children is fixed the moment the parent is created:
    /// `child_seed = splitmix64(splitmix64(seed) ^ index)`.
    pub fn child(&self, index: u64) -> Rng {
        Rng::new(splitmix64(splitmix64(self.seed) ^ index))
    }

    /// Uniform draw in [0, 1).
    pub fn uniform(&mut self) -> f64 {
        self.inner.gen::<f64>()
    }

    /// Uniform integer in [0, bound).
    pub fn below(&mut self, bound: usize) -> usize {
        self.inner.gen_range(0..bound)
    }

    /// Standard normal draw via Box-Muller (second value cached).
    pub fn normal(&mut self) -> f64 {
        if let Some(z) = self.spare_normal.take() {
            return z;
        }
        // 1 - u ∈ (0, 1] keeps the log argument positive.
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = 2.0 * std::f64::consts::PI * u2;
        self.spare_normal = Some(r * theta.sin());
        r * theta.cos()
    }

    /// Fisher-Yates shuffle of indices 0..n.
    pub fn permutation(&mut self, n: usize) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            let j = self.below(i + 1);
            idx.swap(i, j);
        }
        idx
    }
}
