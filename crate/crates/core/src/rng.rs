//! Splittable, counter-based random streams.
//!
//! A stream is addressed by `(seed, index)`: the ChaCha8 key comes from the
//! seed and the 64-bit ChaCha stream id is the replication index. Replication
//! `j` therefore draws the same numbers no matter which worker runs it.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Debug)]
pub struct RandomStream {
    rng: ChaCha8Rng,
}

impl RandomStream {
    pub fn new(seed: u64, index: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(index);
        Self { rng }
    }

    /// Uniform on (0, 1]. Inverse-CDF samplers rely on never seeing 0.
    #[inline]
    pub fn uniform_open_closed(&mut self) -> f64 {
        // 53 random bits mapped to {1, ..., 2^53} / 2^53
        let bits = self.rng.next_u64() >> 11;
        (bits + 1) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Bernoulli trial with success probability `p`.
    #[inline]
    pub fn bernoulli(&mut self, p: f64) -> bool {
        if p <= 0.0 {
            return false;
        }
        self.uniform_open_closed() <= p
    }

    pub(crate) fn rng_mut(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_address_same_numbers() {
        let mut a = RandomStream::new(7, 3);
        let mut b = RandomStream::new(7, 3);
        for _ in 0..100 {
            assert_eq!(a.uniform_open_closed(), b.uniform_open_closed());
        }
    }

    #[test]
    fn distinct_indices_diverge() {
        let mut a = RandomStream::new(7, 3);
        let mut b = RandomStream::new(7, 4);
        let xa: Vec<f64> = (0..8).map(|_| a.uniform_open_closed()).collect();
        let xb: Vec<f64> = (0..8).map(|_| b.uniform_open_closed()).collect();
        assert_ne!(xa, xb);
    }

    #[test]
    fn uniform_in_half_open_unit_interval() {
        let mut s = RandomStream::new(1, 0);
        for _ in 0..100_000 {
            let u = s.uniform_open_closed();
            assert!(u > 0.0 && u <= 1.0);
        }
    }

    #[test]
    fn bernoulli_extremes() {
        let mut s = RandomStream::new(1, 0);
        assert!(!s.bernoulli(0.0));
        assert!(s.bernoulli(1.0));
        let hits = (0..100_000).filter(|_| s.bernoulli(0.3)).count();
        assert!((hits as f64 / 1e5 - 0.3).abs() < 0.01);
    }
}
