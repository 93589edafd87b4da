//! Counter-based pseudorandom generator with explicit stream splitting.
//!
//! Reproducibility contract: a draw is a pure function of
//! `(seed, stream, counter)`, so results are identical across platforms,
//! thread counts, and runs. Parallel code hands each unit of work its own
//! stream id instead of sharing mutable generator state.
//!
//! The core is the SplitMix64 output permutation: the counter walks a
//! Weyl sequence with the golden-ratio increment, and the avalanching
//! finalizer turns consecutive states into decorrelated 64-bit outputs.
//! Stream keys are themselves derived through the same mixer, which in
//! effect gives every stream a random starting point in a 2^64 cycle.
//!
//! Normal variates use the inverse-cdf method through
//! [`crate::normal::quantile`]; nothing here depends on platform libm
//! behavior, so sequences are bit-for-bit stable.

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer (Stafford mix 13 variant).
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Deterministic counter-based generator; see the module docs for the
/// reproducibility contract.
#[derive(Debug, Clone)]
pub struct CounterRng {
    key: u64,
    counter: u64,
}

impl CounterRng {
    /// Generator for `(seed, stream)`. Streams with different ids are
    /// statistically independent; the same pair always reproduces the
    /// same sequence.
    pub fn new(seed: u64, stream: u64) -> Self {
        let key = mix64(
            mix64(seed ^ GOLDEN).wrapping_add(stream.wrapping_mul(0xBF58_476D_1CE4_E5B9)),
        );
        CounterRng { key, counter: 0 }
    }

    /// Derives an independent child stream. The child depends only on
    /// the parent's identity (not on how many draws the parent has
    /// made), so splitting is itself reproducible.
    pub fn substream(&self, idx: u64) -> Self {
        CounterRng::new(self.key, idx.wrapping_add(0x94D0_49BB_1331_11EB))
    }

    /// Next raw 64-bit output.
    pub fn next_u64(&mut self) -> u64 {
        self.counter = self.counter.wrapping_add(1);
        mix64(self.key.wrapping_add(self.counter.wrapping_mul(GOLDEN)))
    }

    /// Uniform draw in the open interval (0, 1): 53 random bits offset by
    /// half an ulp, so 0 and 1 are unreachable and the inverse-cdf method
    /// is safe without clamping.
    pub fn uniform(&mut self) -> f64 {
        let bits = self.next_u64() >> 11;
        (bits as f64 + 0.5) * (1.0 / 9_007_199_254_740_992.0)
    }

    /// Uniform draw on `[lo, hi)`.
    pub fn uniform_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Standard normal draw via the inverse cdf.
    pub fn normal(&mut self) -> f64 {
        crate::normal::quantile(self.uniform())
    }

    /// Uniform integer in `[0, n)`; `n` must be positive. Uses rejection
    /// to stay exactly uniform.
    pub fn below(&mut self, n: u64) -> u64 {
        debug_assert!(n > 0);
        // Rejection zone keeps the modulo unbiased.
        let zone = u64::MAX - (u64::MAX % n);
        loop {
            let v = self.next_u64();
            if v < zone {
                return v % n;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sequences_are_reproducible() {
        let mut a = CounterRng::new(42, 7);
        let mut b = CounterRng::new(42, 7);
        for _ in 0..100 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn first_outputs_are_frozen() {
        // Pinned so accidental algorithm changes (which would silently
        // re-randomize every seeded result in the crate) fail loudly.
        let mut r = CounterRng::new(0, 0);
        let first: Vec<u64> = (0..4).map(|_| r.next_u64()).collect();
        assert_eq!(
            first,
            vec![
                0x568A_9B0B_1A2C_05EC,
                0x44E5_B8B1_47EF_718B,
                0x4585_63AB_5552_1133,
                0x7AEC_6445_39B6_C0F9,
            ]
        );
    }

    #[test]
    fn streams_and_substreams_differ() {
        let mut a = CounterRng::new(1, 0);
        let mut b = CounterRng::new(1, 1);
        let mut c = CounterRng::new(2, 0);
        assert_ne!(a.next_u64(), b.next_u64());
        assert_ne!(CounterRng::new(1, 0).next_u64(), c.next_u64());
        let parent = CounterRng::new(9, 3);
        let mut s0 = parent.substream(0);
        let mut s1 = parent.substream(1);
        assert_ne!(s0.next_u64(), s1.next_u64());
        // Splitting is insensitive to parent consumption.
        let mut consumed = CounterRng::new(9, 3);
        consumed.next_u64();
        assert_eq!(consumed.substream(0).next_u64(), parent.substream(0).next_u64());
    }

    #[test]
    fn uniforms_lie_strictly_inside_unit_interval() {
        let mut r = CounterRng::new(123, 0);
        for _ in 0..10_000 {
            let u = r.uniform();
            assert!(u > 0.0 && u < 1.0, "uniform out of range: {u}");
        }
    }

    #[test]
    fn uniform_moments_are_sane() {
        let mut r = CounterRng::new(2024, 5);
        let n = 200_000;
        let mut sum = 0.0;
        let mut sumsq = 0.0;
        for _ in 0..n {
            let u = r.uniform();
            sum += u;
            sumsq += u * u;
        }
        let mean = sum / n as f64;
        let var = sumsq / n as f64 - mean * mean;
        // Five-sigma bands: sd(mean) = 1/sqrt(12 n).
        assert!((mean - 0.5).abs() < 5.0 / (12.0f64 * n as f64).sqrt(), "mean {mean}");
        assert!((var - 1.0 / 12.0).abs() < 0.002, "var {var}");
    }

    #[test]
    fn normal_moments_are_sane() {
        let mut r = CounterRng::new(7, 11);
        let n = 200_000;
        let mut sum = 0.0;
        let mut sumsq = 0.0;
        for _ in 0..n {
            let z = r.normal();
            assert!(z.is_finite());
            sum += z;
            sumsq += z * z;
        }
        let mean = sum / n as f64;
        let var = sumsq / n as f64 - mean * mean;
        assert!(mean.abs() < 5.0 / (n as f64).sqrt(), "mean {mean}");
        assert!((var - 1.0).abs() < 5.0 * (2.0 / n as f64).sqrt(), "var {var}");
    }

    #[test]
    fn uniformity_chi_square_over_bins() {
        let mut r = CounterRng::new(31, 4);
        let bins = 64;
        let n = 64_000;
        let mut counts = vec![0u64; bins];
        for _ in 0..n {
            let u = r.uniform();
            counts[(u * bins as f64) as usize] += 1;
        }
        let expected = n as f64 / bins as f64;
        let chi2: f64 = counts
            .iter()
            .map(|&c| {
                let d = c as f64 - expected;
                d * d / expected
            })
            .sum();
        // df = 63; mean 63, sd sqrt(126) ~ 11.2; allow five sigma.
        assert!(chi2 < 63.0 + 5.0 * 11.3, "chi2 = {chi2}");
    }

    #[test]
    fn below_is_unbiased_over_small_range() {
        let mut r = CounterRng::new(77, 0);
        let mut counts = [0u64; 5];
        for _ in 0..50_000 {
            counts[r.below(5) as usize] += 1;
        }
        for (i, &c) in counts.iter().enumerate() {
            assert!(
                (c as f64 - 10_000.0).abs() < 600.0,
                "bucket {i} count {c}"
            );
        }
    }
}
