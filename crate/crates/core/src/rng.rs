//! Seeded randomness.
//!
//! Every stochastic routine draws from a [`SeededRng`], a ChaCha8 stream
//! keyed by a 64-bit seed. ChaCha output is defined bit-for-bit by its
//! algorithm, so identical seeds give identical sequences on every platform.
//!
//! Independent sub-streams (per worker, per round, per client) come from
//! [`stream_seed`]: the root seed XOR a mixed `(tag, index)` pair, passed
//! through the SplitMix64 finalizer so that neighbouring indices yield
//! unrelated keys.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Derives the seed of sub-stream `index` within the family `tag`.
pub fn stream_seed(root: u64, tag: u64, index: u64) -> u64 {
    splitmix64(root ^ splitmix64(tag.wrapping_add(0x9E37_79B9_7F4A_7C15)) ^ index)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stream tags used by the simulator; kept in one place so that two
/// subsystems never share a stream by accident.
pub mod tags {
    pub const INIT: u64 = 1;
    pub const PARTITION: u64 = 2;
    pub const ROUND: u64 = 3;
    pub const CLIENT: u64 = 4;
    pub const SHUFFLE: u64 = 5;
    pub const PROBE: u64 = 6;
    pub const DATA: u64 = 7;
    pub const WORKER: u64 = 8;
}

#[derive(Clone, Debug)]
pub struct SeededRng {
    seed: u64,
    inner: ChaCha8Rng,
    spare_normal: Option<f64>,
}

/// Snapshot of where a stream is: its seed and the number of 32-bit words
/// consumed so far.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RngState {
    pub seed: u64,
    pub word_pos: u128,
}

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            inner: ChaCha8Rng::seed_from_u64(seed),
            spare_normal: None,
        }
    }

    /// Stream for sub-task `index` of family `tag` under `root`.
    pub fn derive(root: u64, tag: u64, index: u64) -> Self {
        Self::new(stream_seed(root, tag, index))
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn state(&self) -> RngState {
        RngState {
            seed: self.seed,
            word_pos: self.inner.get_word_pos(),
        }
    }

    /// Uniform in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.inner.random::<f64>()
    }

    pub fn uniform_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Uniform integer in `lo..hi`. Panics on an empty range.
    pub fn below(&mut self, lo: usize, hi: usize) -> usize {
        self.inner.random_range(lo..hi)
    }

    /// One standard-normal draw by the Box-Muller transform. Draws come in
    /// pairs; the second is cached for the next call.
    pub fn standard_normal(&mut self) -> f64 {
        if let Some(z) = self.spare_normal.take() {
            return z;
        }
        // 1 - U keeps the log argument in (0, 1].
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = 2.0 * std::f64::consts::PI * u2;
        self.spare_normal = Some(r * theta.sin());
        r * theta.cos()
    }

    pub fn gaussian(&mut self, mean: f64, std: f64) -> f64 {
        mean + std * self.standard_normal()
    }

    pub fn gaussian_vec(&mut self, n: usize, mean: f64, std: f64) -> Vec<f64> {
        (0..n).map(|_| self.gaussian(mean, std)).collect()
    }

    /// Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(0, i + 1);
            items.swap(i, j);
        }
    }

    /// `k` distinct indices from `0..n`, uniformly, in ascending order.
    pub fn choose_distinct(&mut self, n: usize, k: usize) -> Vec<usize> {
        let mut all: Vec<usize> = (0..n).collect();
        // partial Fisher-Yates
        for i in 0..k.min(n) {
            let j = self.below(i, n);
            all.swap(i, j);
        }
        all.truncate(k.min(n));
        all.sort_unstable();
        all
    }
}

impl RngCore for SeededRng {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

/// `n` Gaussian draws as a [`Vector`](crate::linalg::Vector).
pub fn sample_gaussian(
    rng: &mut SeededRng,
    n: usize,
    mean: f64,
    std: f64,
) -> crate::linalg::Vector {
    assert!(std >= 0.0, "standard deviation must be non-negative");
    crate::linalg::Vector::new(rng.gaussian_vec(n, mean, std))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_std_is_constant() {
        let mut rng = SeededRng::new(1);
        let v = sample_gaussian(&mut rng, 16, 2.5, 0.0);
        assert!(v.as_slice().iter().all(|&x| x == 2.5));
    }

    #[test]
    fn sample_mean_converges() {
        let mut rng = SeededRng::new(2);
        let v = sample_gaussian(&mut rng, 10_000, 0.0, 1.0);
        assert!(v.mean().abs() < 0.05);
        let var = v.as_slice().iter().map(|x| x * x).sum::<f64>() / 10_000.0;
        assert!((var - 1.0).abs() < 0.05);
    }

    #[test]
    fn same_seed_same_stream() {
        let a = sample_gaussian(&mut SeededRng::new(42), 100, 0.0, 1.0);
        let b = sample_gaussian(&mut SeededRng::new(42), 100, 0.0, 1.0);
        assert_eq!(a, b);
        let c = sample_gaussian(&mut SeededRng::new(43), 100, 0.0, 1.0);
        assert_ne!(a, c);
    }

    #[test]
    fn derived_streams_differ() {
        let seeds: Vec<u64> = (0..64).map(|i| stream_seed(5, tags::CLIENT, i)).collect();
        let mut sorted = seeds.clone();
        sorted.sort_unstable();
        sorted.dedup();
        assert_eq!(sorted.len(), seeds.len());
        assert_ne!(
            stream_seed(5, tags::CLIENT, 1),
            stream_seed(5, tags::ROUND, 1)
        );
    }

    #[test]
    fn state_tracks_position() {
        let mut rng = SeededRng::new(9);
        let s0 = rng.state();
        rng.uniform();
        assert!(rng.state().word_pos > s0.word_pos);
        assert_eq!(rng.state().seed, 9);
    }

    #[test]
    fn choose_distinct_is_a_subset() {
        let mut rng = SeededRng::new(4);
        let picked = rng.choose_distinct(10, 4);
        assert_eq!(picked.len(), 4);
        assert!(picked.windows(2).all(|w| w[0] < w[1]));
        assert!(picked.iter().all(|&i| i < 10));
    }
}
