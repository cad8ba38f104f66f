//! Random streams.
//!
//! Every run draws from a `Xoshiro256PlusPlus` stream seeded with
//! `splitmix64(seed) ^ run_id` (expanded to 256 bits by SplitMix64 inside
//! `seed_from_u64`). Run `k` of an ensemble therefore sees the same numbers
//! regardless of how runs are scheduled across workers, and nearby seeds
//! select unrelated sets of streams.

use rand::{RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

pub type SimRng = Xoshiro256PlusPlus;

pub fn stream(seed: u64, run_id: u64) -> SimRng {
    SimRng::seed_from_u64(splitmix64(seed) ^ run_id)
}

/// One SplitMix64 output for state `x`.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Buffered fair coin flips, 64 per generator call.
///
/// `binomial_half(n)` counts heads among `n` flips, which is an exact
/// Binomial(n, 1/2) draw.
#[derive(Debug, Clone, Default)]
pub struct CoinFlips {
    buf: u64,
    left: u32,
}

impl CoinFlips {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn flip<R: RngCore>(&mut self, rng: &mut R) -> bool {
        if self.left == 0 {
            self.buf = rng.next_u64();
            self.left = 64;
        }
        let bit = self.buf & 1 == 1;
        self.buf >>= 1;
        self.left -= 1;
        bit
    }

    /// Same distribution as [`Self::binomial_half`], without a data-dependent
    /// loop when the buffered bits suffice.
    #[inline(always)]
    pub fn binomial_half_fast<R: RngCore>(&mut self, rng: &mut R, n: u32) -> u32 {
        if n <= self.left && n < 64 {
            let heads = (self.buf & ((1u64 << n) - 1)).count_ones();
            self.buf >>= n;
            self.left -= n;
            heads
        } else {
            self.binomial_half(rng, n)
        }
    }

    #[inline]
    pub fn binomial_half<R: RngCore>(&mut self, rng: &mut R, mut n: u32) -> u32 {
        let mut heads = 0;
        while n > 0 {
            if self.left == 0 {
                self.buf = rng.next_u64();
                self.left = 64;
            }
            let take = n.min(self.left);
            if take == 64 {
                heads += self.buf.count_ones();
                self.buf = 0;
            } else {
                heads += (self.buf & ((1u64 << take) - 1)).count_ones();
                self.buf >>= take;
            }
            self.left -= take;
            n -= take;
        }
        heads
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splitmix_reference_value() {
        assert_eq!(splitmix64(0), 0xe220_a839_7b1d_cdaf);
    }

    #[test]
    fn adjacent_seeds_give_disjoint_ensembles() {
        let firsts = |seed| -> std::collections::BTreeSet<u64> { (0..64).map(|k| stream(seed, k).next_u64()).collect() };
        assert!(firsts(1).is_disjoint(&firsts(2)));
    }

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: Vec<u64> = (0..4).map({
            let mut r = stream(7, 3);
            move |_| r.next_u64()
        }).collect();
        let b: Vec<u64> = (0..4).map({
            let mut r = stream(7, 3);
            move |_| r.next_u64()
        }).collect();
        let c = stream(7, 4).next_u64();
        assert_eq!(a, b);
        assert_ne!(a[0], c);
    }

    #[test]
    fn binomial_half_has_correct_moments() {
        let mut rng = stream(1, 0);
        let mut flips = CoinFlips::new();
        let n = 37u32;
        let samples = 200_000;
        let mut sum = 0.0;
        let mut sum2 = 0.0;
        for _ in 0..samples {
            let k = flips.binomial_half(&mut rng, n) as f64;
            assert!(k <= n as f64);
            sum += k;
            sum2 += k * k;
        }
        let mean = sum / samples as f64;
        let var = sum2 / samples as f64 - mean * mean;
        // mean n/2, variance n/4
        assert!((mean - 18.5).abs() < 4.0 * (9.25f64 / samples as f64).sqrt());
        assert!((var / 9.25 - 1.0).abs() < 0.02);
    }

    #[test]
    fn binomial_half_spanning_words() {
        let mut rng = stream(2, 0);
        let mut flips = CoinFlips::new();
        for n in [0u32, 1, 63, 64, 65, 200] {
            assert!(flips.binomial_half(&mut rng, n) <= n);
        }
        assert_eq!(flips.binomial_half(&mut rng, 0), 0);
    }
}
