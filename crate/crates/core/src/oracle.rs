//! Bit-at-a-time reference counts.
//!
//! Every optimized kernel is tested against these functions. They must not
//! call into any other module of this crate.

use crate::block::PopCount;

/// Counts set bits by testing each of the 64 positions in turn.
pub fn popcount_oracle_word(w: u64) -> PopCount {
    let mut count = 0;
    for i in 0..64 {
        count += (w >> i) & 1;
    }
    count
}

pub fn popcount_oracle(words: &[u64]) -> PopCount {
    words.iter().map(|&w| popcount_oracle_word(w)).sum()
}

/// Reference intersection cardinality (word-wise AND).
pub fn intersection_oracle(a: &[u64], b: &[u64]) -> PopCount {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| popcount_oracle_word(x & y))
        .sum()
}

/// Reference union cardinality (word-wise OR).
pub fn union_oracle(a: &[u64], b: &[u64]) -> PopCount {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| popcount_oracle_word(x | y))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn introduction_values() {
        assert_eq!(popcount_oracle_word(0xFFFF), 16);
        assert_eq!(popcount_oracle_word(0xAA), 4);
        assert_eq!(popcount_oracle_word(0x00), 0);
    }

    #[test]
    fn array_examples() {
        assert_eq!(popcount_oracle(&[]), 0);
        assert_eq!(popcount_oracle(&[u64::MAX; 16]), 1024);
        assert_eq!(popcount_oracle(&[0xF0, 0xAA]), 8);
    }

    proptest! {
        #[test]
        fn complement_sums_to_64(w in any::<u64>()) {
            prop_assert_eq!(popcount_oracle_word(w) + popcount_oracle_word(!w), 64);
        }

        #[test]
        fn inclusion_exclusion(a in any::<u64>(), b in any::<u64>()) {
            prop_assert_eq!(
                popcount_oracle_word(a | b) + popcount_oracle_word(a & b),
                popcount_oracle_word(a) + popcount_oracle_word(b)
            );
        }
    }
}
