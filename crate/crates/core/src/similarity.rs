//! Intersection, union and Jaccard index of two equal-length bitsets.
//!
//! The fused kernels combine the inputs word by word while counting; no
//! AND/OR array is ever allocated. Counts are accumulated as integers and
//! divided once at the end.

use crate::block::PopCount;
use crate::dispatch::Dispatcher;
use crate::error::{check_same_len, Error, Result};
use crate::scalar::{harley_seal64_src, wwg};
use crate::source::{AndWords, OrWords};
use crate::vector::{native, portable, VectorKernel};

/// Intersection and union cardinalities plus their ratio.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SimilarityResult {
    pub intersection_count: PopCount,
    pub union_count: PopCount,
    /// `intersection / union`, or 1.0 when both sets are empty.
    pub jaccard: f64,
}

impl SimilarityResult {
    pub fn from_counts(intersection_count: PopCount, union_count: PopCount) -> Self {
        debug_assert!(intersection_count <= union_count);
        let jaccard = if union_count == 0 {
            // two empty sets are identical
            1.0
        } else {
            intersection_count as f64 / union_count as f64
        };
        Self {
            intersection_count,
            union_count,
            jaccard,
        }
    }
}

/// `|a ∩ b|` through the dispatched counting kernel.
pub fn intersection_count(a: &[u64], b: &[u64]) -> Result<PopCount> {
    Dispatcher::global().intersection_count(a, b, None)
}

/// `|a ∪ b|` through the dispatched counting kernel.
pub fn union_count(a: &[u64], b: &[u64]) -> Result<PopCount> {
    Dispatcher::global().union_count(a, b, None)
}

/// One pass with the hardware count instruction on `a & b` and `a | b`.
pub fn jaccard_popcnt(a: &[u64], b: &[u64]) -> Result<SimilarityResult> {
    check_same_len(a, b)?;
    let (i, u) = popcnt_counts(a, b)?;
    Ok(SimilarityResult::from_counts(i, u))
}

/// Two interleaved 256-bit Harley-Seal trees, one over `a & b` and one over
/// `a | b`. Uses the emulated vectors when AVX2 is absent.
pub fn jaccard_hs(a: &[u64], b: &[u64]) -> Result<SimilarityResult> {
    check_same_len(a, b)?;
    let (i, u) = native::jaccard(VectorKernel::HarleySeal256, a, b).or_else(|e| match e {
        Error::UnsupportedFeature(_) => Ok(portable::jaccard(VectorKernel::HarleySeal256, a, b)),
        e => Err(e),
    })?;
    Ok(SimilarityResult::from_counts(i, u))
}

pub(crate) fn popcnt_counts(a: &[u64], b: &[u64]) -> Result<(PopCount, PopCount)> {
    #[cfg(target_arch = "x86_64")]
    if crate::vector::detect_cpu_features().has_popcnt {
        // SAFETY: popcnt support checked above.
        return Ok(unsafe { popcnt_counts_x86(a, b) });
    }
    let _ = (a, b);
    Err(Error::UnsupportedFeature("popcnt"))
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "popcnt")]
pub(crate) unsafe fn popcnt_counts_x86(a: &[u64], b: &[u64]) -> (PopCount, PopCount) {
    let (mut s, mut i) = (0u64, 0u64);
    for (&x, &y) in a.iter().zip(b) {
        s += u64::from((x | y).count_ones());
        i += u64::from((x & y).count_ones());
    }
    (i, s)
}

/// Per-word Wilkes-Wheeler-Gill on both combinations.
pub(crate) fn wwg_counts(a: &[u64], b: &[u64]) -> (PopCount, PopCount) {
    a.iter()
        .zip(b)
        .fold((0, 0), |(i, u), (&x, &y)| (i + wwg(x & y), u + wwg(x | y)))
}

/// Scalar Harley-Seal over the AND stream and then the OR stream.
pub(crate) fn harley_seal64_counts(a: &[u64], b: &[u64]) -> (PopCount, PopCount) {
    (
        harley_seal64_src(AndWords::new(a, b)),
        harley_seal64_src(OrWords::new(a, b)),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{intersection_oracle, popcount_oracle, union_oracle};
    use rand::{rngs::StdRng, Rng, SeedableRng};

    fn random_words(rng: &mut StdRng, n: usize) -> Vec<u64> {
        (0..n).map(|_| rng.gen()).collect()
    }

    #[test]
    fn small_examples() {
        assert_eq!(intersection_count(&[0xF0], &[0xAA]).unwrap(), 2);
        assert_eq!(union_count(&[0xF0], &[0xAA]).unwrap(), 6);
        let r = jaccard_popcnt(&[0xF0], &[0xAA]).unwrap();
        assert_eq!((r.intersection_count, r.union_count), (2, 6));
        assert!((r.jaccard - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn padded_block_keeps_ratio() {
        let mut a = vec![0u64; 64];
        let mut b = vec![0u64; 64];
        a[0] = 0xF0;
        b[0] = 0xAA;
        let r = jaccard_hs(&a, &b).unwrap();
        assert_eq!((r.intersection_count, r.union_count), (2, 6));
        assert_eq!(r.jaccard, 2.0 / 6.0);
    }

    #[test]
    fn identity_cases() {
        let mut rng = StdRng::seed_from_u64(1);
        let a = random_words(&mut rng, 512);
        assert_eq!(intersection_count(&a, &a).unwrap(), popcount_oracle(&a));
        assert_eq!(union_count(&vec![0; 512], &a).unwrap(), popcount_oracle(&a));
        assert_eq!(jaccard_hs(&a, &a).unwrap().jaccard, 1.0);
        assert_eq!(jaccard_popcnt(&a, &a).unwrap().jaccard, 1.0);
        let zero = vec![0u64; 8];
        let r = jaccard_popcnt(&zero, &zero).unwrap();
        assert_eq!((r.union_count, r.jaccard), (0, 1.0));
        assert_eq!(jaccard_hs(&[], &[]).unwrap().jaccard, 1.0);
        let not_a: Vec<u64> = a.iter().map(|w| !w).collect();
        assert_eq!(jaccard_hs(&a, &not_a).unwrap().jaccard, 0.0);
    }

    #[test]
    fn length_mismatch() {
        assert!(matches!(
            intersection_count(&[1], &[1, 2]),
            Err(Error::LengthMismatch { left: 1, right: 2 })
        ));
        assert!(matches!(
            union_count(&[1, 2], &[1]),
            Err(Error::LengthMismatch { .. })
        ));
        assert!(matches!(
            jaccard_popcnt(&[1], &[]),
            Err(Error::LengthMismatch { .. })
        ));
        assert!(matches!(
            jaccard_hs(&[], &[1]),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn fused_forms_match_oracle() {
        let mut rng = StdRng::seed_from_u64(2);
        for n in [0, 1, 15, 63, 64, 65, 128, 2048] {
            let a = random_words(&mut rng, n);
            let b = random_words(&mut rng, n);
            let expected = (intersection_oracle(&a, &b), union_oracle(&a, &b));
            assert_eq!(wwg_counts(&a, &b), expected);
            assert_eq!(harley_seal64_counts(&a, &b), expected);
            let hs = jaccard_hs(&a, &b).unwrap();
            assert_eq!((hs.intersection_count, hs.union_count), expected);
            if let Ok(p) = jaccard_popcnt(&a, &b) {
                assert_eq!(p, hs);
            }
        }
    }
}
