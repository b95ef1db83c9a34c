//! splitmix64, the single portable randomness source of the crate.
//!
//! Everything seeded (toy encoder projections, synthetic corpora, training
//! initialisation) draws from this generator so outputs are bit-exact across
//! platforms. Only integer ops and exact float scaling are used.

#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform in `[0, 1)` with 53 bits of precision.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `[lo, hi)`.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// Zero-mean, unit-variance noise (uniform on `[-sqrt 3, sqrt 3)`).
    ///
    /// Uniform rather than Gaussian so no transcendental functions are
    /// involved and results stay bit-identical everywhere.
    pub fn unit_noise(&mut self) -> f64 {
        let r = 3f64.sqrt();
        self.uniform(-r, r)
    }

    /// Uniform integer in `0..n`. `n` must be nonzero.
    pub fn below(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        // Multiply-shift; bias is below 2^-64 * n and irrelevant here.
        ((self.next_u64() as u128 * n as u128) >> 64) as usize
    }

    /// Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_answers() {
        let mut g = SplitMix64::new(0);
        assert_eq!(g.next_u64(), 0xe220a8397b1dcdaf);
        assert_eq!(g.next_u64(), 0x6e789e6aa1b965f4);
        assert_eq!(g.next_u64(), 0x06c45d188009454f);
        let mut g = SplitMix64::new(42);
        assert_eq!(g.next_u64(), 0xbdd732262feb6e95);
        assert_eq!(g.next_u64(), 0x28efe333b266f103);
    }

    #[test]
    fn unit_interval() {
        let mut g = SplitMix64::new(7);
        for _ in 0..10_000 {
            let x = g.next_f64();
            assert!((0.0..1.0).contains(&x));
            let n = g.unit_noise();
            assert!(n.abs() <= 3f64.sqrt());
        }
    }

    #[test]
    fn shuffle_is_permutation() {
        let mut g = SplitMix64::new(3);
        let mut v: Vec<usize> = (0..50).collect();
        g.shuffle(&mut v);
        let mut s = v.clone();
        s.sort();
        assert_eq!(s, (0..50).collect::<Vec<_>>());
    }
}
