//! Portable seeded randomness and stable string hashing.
//!
//! Every random choice in the crate (Random Mode draws, the corrupting mock)
//! goes through [`SplitMix64`] so that a seed names the same selection on
//! every platform and toolchain.

use std::hash::Hasher;

use fnv::FnvHasher;

/// 64-bit FNV-1a over the UTF-8 bytes of `s`.
pub fn fnv1a64(s: &str) -> u64 {
    let mut hasher = FnvHasher::default();
    hasher.write(s.as_bytes());
    hasher.finish()
}

/// Seed for one query of a Random Mode run: `run_seed XOR fnv1a64(query_id)`.
pub fn query_seed(run_seed: u64, query_id: &str) -> u64 {
    run_seed ^ fnv1a64(query_id)
}

/// SplitMix64 generator (Steele, Lea & Flood).
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

    /// Uniform draw from `0..bound` by rejection (no modulo bias).
    ///
    /// Panics if `bound == 0`.
    pub fn below(&mut self, bound: u64) -> u64 {
        assert!(bound > 0, "below() needs a positive bound");
        let threshold = bound.wrapping_neg() % bound;
        loop {
            let x = self.next_u64();
            if x >= threshold {
                return x % bound;
            }
        }
    }
}

/// First `k` entries of a seeded Fisher-Yates shuffle of `0..n`, in draw order.
///
/// Panics if `k > n`.
pub fn shuffled_prefix(n: usize, k: usize, seed: u64) -> Vec<usize> {
    assert!(k <= n, "prefix length {k} exceeds population {n}");
    let mut rng = SplitMix64::new(seed);
    let mut indices: Vec<usize> = (0..n).collect();
    for i in 0..k {
        let j = i + rng.below((n - i) as u64) as usize;
        indices.swap(i, j);
    }
    indices.truncate(k);
    indices
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fnv_oracle(s: &str) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in s.bytes() {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
        h
    }

    #[test]
    fn fnv_matches_hand_rolled_oracle() {
        for s in ["", "a", "q1", "aspirin", "drug interaction", "ünïcode"] {
            assert_eq!(fnv1a64(s), fnv_oracle(s), "{s:?}");
        }
        assert_eq!(fnv1a64("q1"), 0x08d2_1307_b572_d497);
    }

    #[test]
    fn splitmix_reference_stream() {
        // Published test vector for seed 1234567.
        let mut rng = SplitMix64::new(1_234_567);
        let got: Vec<u64> = (0..3).map(|_| rng.next_u64()).collect();
        assert_eq!(
            got,
            vec![
                6_457_827_717_110_365_317,
                3_203_168_211_198_807_973,
                9_817_491_932_198_370_423
            ]
        );
    }

    #[test]
    fn prefix_is_pinned() {
        assert_eq!(shuffled_prefix(10, 3, 42), vec![3, 2, 4]);
        assert_eq!(
            shuffled_prefix(10, 10, 7),
            vec![7, 0, 4, 6, 8, 5, 2, 1, 9, 3]
        );
    }

    #[test]
    fn full_prefix_is_a_permutation() {
        let mut p = shuffled_prefix(25, 25, 99);
        p.sort_unstable();
        assert_eq!(p, (0..25).collect::<Vec<_>>());
    }
}
