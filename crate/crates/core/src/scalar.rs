//! Non-vectorized population counts: per-word bit tricks, table lookups,
//! merged adder trees, the carry-save adder and the Harley-Seal reduction.

use std::sync::OnceLock;

use crate::block::PopCount;
use crate::error::{Error, Result};
use crate::oracle::popcount_oracle_word;
use crate::source::{WordSource, Words};

const C1: u64 = 0x5555_5555_5555_5555;
const C2: u64 = 0x3333_3333_3333_3333;
const C4: u64 = 0x0F0F_0F0F_0F0F_0F0F;
const C8: u64 = 0x00FF_00FF_00FF_00FF;
const C16: u64 = 0x0000_FFFF_0000_FFFF;
const C32: u64 = 0x0000_0000_FFFF_FFFF;

/// Six-level mask-and-add tree: 1-bit fields summed into 2-bit fields, then
/// 4, 8, 16, 32 and finally 64.
#[inline]
pub fn naive_tree(mut x: u64) -> PopCount {
    x = (x & C1) + ((x >> 1) & C1);
    x = (x & C2) + ((x >> 2) & C2);
    x = (x & C4) + ((x >> 4) & C4);
    x = (x & C8) + ((x >> 8) & C8);
    x = (x & C16) + ((x >> 16) & C16);
    (x & C32) + ((x >> 32) & C32)
}

/// Wilkes-Wheeler-Gill count: the subtract trick for 2-bit fields, nibble
/// folding, and a multiply that sums all bytes into the top byte.
#[inline]
pub fn wwg(mut x: u64) -> PopCount {
    x -= (x >> 1) & C1;
    x = ((x >> 2) & C2) + (x & C2);
    x = (x + (x >> 4)) & C4;
    x = x.wrapping_mul(0x0101_0101_0101_0101);
    x >> 56
}

/// Clears the lowest set bit until the word is zero. Cheap for sparse words,
/// branchy for dense ones.
#[inline]
pub fn wegner(mut x: u64) -> PopCount {
    let mut v = 0;
    while x != 0 {
        x &= x - 1;
        v += 1;
    }
    v
}

/// Per-byte counts, 256 entries.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ByteTable(pub [u8; 256]);

/// Per-16-bit counts, 65536 entries (64 KiB).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ShortTable(pub Box<[u8; 65536]>);

impl ByteTable {
    fn from_oracle() -> Self {
        Self(std::array::from_fn(|i| {
            popcount_oracle_word(i as u64) as u8
        }))
    }

    #[inline]
    pub fn count_word(&self, w: u64) -> PopCount {
        w.to_le_bytes()
            .iter()
            .map(|&b| PopCount::from(self.0[usize::from(b)]))
            .sum()
    }
}

impl ShortTable {
    fn from_oracle() -> Self {
        let table: Box<[u8]> = (0..65536u64)
            .map(|i| popcount_oracle_word(i) as u8)
            .collect();
        Self(table.try_into().expect("65536 entries"))
    }

    #[inline]
    pub fn count_word(&self, w: u64) -> PopCount {
        (0..4)
            .map(|k| PopCount::from(self.0[((w >> (16 * k)) & 0xFFFF) as usize]))
            .sum()
    }
}

/// Builds both lookup tables from the reference count.
pub fn build_tables() -> (ByteTable, ShortTable) {
    (ByteTable::from_oracle(), ShortTable::from_oracle())
}

static TABLES: OnceLock<(ByteTable, ShortTable)> = OnceLock::new();

/// Process-wide tables, built on first use.
pub fn tables() -> &'static (ByteTable, ShortTable) {
    TABLES.get_or_init(build_tables)
}

pub fn naive_tree_count(words: &[u64]) -> PopCount {
    sum_per_word(Words(words), naive_tree)
}

pub fn wwg_count(words: &[u64]) -> PopCount {
    sum_per_word(Words(words), wwg)
}

pub fn wegner_count(words: &[u64]) -> PopCount {
    sum_per_word(Words(words), wegner)
}

pub fn table8_count(words: &[u64]) -> PopCount {
    table8_count_with(&tables().0, words)
}

/// `table8_count` against an explicit table (used by the self-test).
pub fn table8_count_with(table: &ByteTable, words: &[u64]) -> PopCount {
    sum_per_word(Words(words), |w| table.count_word(w))
}

pub fn table16_count(words: &[u64]) -> PopCount {
    let table = &tables().1;
    sum_per_word(Words(words), |w| table.count_word(w))
}

pub fn lauradoux(words: &[u64]) -> PopCount {
    lauradoux_src(Words(words))
}

pub fn harley_seal64(words: &[u64]) -> PopCount {
    harley_seal64_src(Words(words))
}

#[inline]
pub(crate) fn sum_per_word<S: WordSource>(src: S, count: impl Fn(u64) -> PopCount) -> PopCount {
    let mut total = 0;
    for i in 0..src.len() {
        total += count(src.word(i));
    }
    total
}

/// Merged adder trees over twelve words; the accumulator holds byte-wide
/// partial counts (at most 96 per byte) until the final fold.
#[inline]
fn lauradoux12(input: [u64; 12]) -> PopCount {
    let mut acc = 0u64;
    for j in (0..12).step_by(3) {
        let mut count1 = input[j];
        let mut count2 = input[j + 1];
        let half1 = input[j + 2] & C1;
        let half2 = (input[j + 2] >> 1) & C1;
        count1 -= (count1 >> 1) & C1;
        count2 -= (count2 >> 1) & C1;
        count1 += half1;
        count2 += half2;
        count1 = (count1 & C2) + ((count1 >> 2) & C2);
        count1 += (count2 & C2) + ((count2 >> 2) & C2);
        acc += (count1 & C4) + ((count1 >> 4) & C4);
    }
    acc = (acc & C8) + ((acc >> 8) & C8);
    acc = (acc + (acc >> 16)) & C16;
    acc += acc >> 32;
    // the upper 32 bits still hold a partial sum; the total is at most 768
    acc & 0xFFFF
}

pub(crate) fn lauradoux_src<S: WordSource>(src: S) -> PopCount {
    let n = src.len();
    let body = n - n % 12;
    let mut total = 0;
    let mut i = 0;
    while i < body {
        total += lauradoux12(src.lanes::<12>(i));
        i += 12;
    }
    for i in body..n {
        total += wwg(src.word(i));
    }
    total
}

/// Output of one carry-save adder step: per bit position,
/// `2 * high + low = a + b + c`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CsaPair {
    pub high: u64,
    pub low: u64,
}

/// Bitwise carry-save adder in five logical operations.
#[inline(always)]
pub fn csa64(a: u64, b: u64, c: u64) -> CsaPair {
    let u = a ^ b;
    CsaPair {
        high: (a & b) | (u & c),
        low: u ^ c,
    }
}

/// Sixteen-word Harley-Seal loop. `ones`..`eights` carry partial sums across
/// blocks; only `sixteens` is counted inside the loop.
pub(crate) fn harley_seal64_src<S: WordSource>(src: S) -> PopCount {
    let n = src.len();
    let body = n - n % 16;
    let (mut total, mut ones, mut twos, mut fours, mut eights) = (0u64, 0u64, 0u64, 0u64, 0u64);

    // (high, low) into (carry, accumulator)
    macro_rules! csa {
        ($h:ident, $l:ident, $a:expr, $b:expr) => {
            let p = csa64($l, $a, $b);
            $h = p.high;
            $l = p.low;
        };
    }

    let mut i = 0;
    while i < body {
        let d = src.lanes::<16>(i);
        let (mut twos_a, mut twos_b, mut fours_a, mut fours_b, eights_a, eights_b);
        let sixteens;
        csa!(twos_a, ones, d[0], d[1]);
        csa!(twos_b, ones, d[2], d[3]);
        csa!(fours_a, twos, twos_a, twos_b);
        csa!(twos_a, ones, d[4], d[5]);
        csa!(twos_b, ones, d[6], d[7]);
        csa!(fours_b, twos, twos_a, twos_b);
        csa!(eights_a, fours, fours_a, fours_b);
        csa!(twos_a, ones, d[8], d[9]);
        csa!(twos_b, ones, d[10], d[11]);
        csa!(fours_a, twos, twos_a, twos_b);
        csa!(twos_a, ones, d[12], d[13]);
        csa!(twos_b, ones, d[14], d[15]);
        csa!(fours_b, twos, twos_a, twos_b);
        csa!(eights_b, fours, fours_a, fours_b);
        csa!(sixteens, eights, eights_a, eights_b);
        total += wwg(sixteens);
        i += 16;
    }

    total = 16 * total + 8 * wwg(eights) + 4 * wwg(fours) + 2 * wwg(twos) + wwg(ones);
    for i in body..n {
        total += wwg(src.word(i));
    }
    total
}

/// Sum of the native per-word count instruction.
pub fn hw_popcnt(words: &[u64]) -> Result<PopCount> {
    hw_popcnt_src(Words(words))
}

pub(crate) fn hw_popcnt_src<S: WordSource>(src: S) -> Result<PopCount> {
    #[cfg(target_arch = "x86_64")]
    if crate::vector::detect_cpu_features().has_popcnt {
        // SAFETY: popcnt support checked above.
        return Ok(unsafe { hw_popcnt_x86(src) });
    }
    let _ = src;
    Err(Error::UnsupportedFeature("popcnt"))
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "popcnt")]
pub(crate) unsafe fn hw_popcnt_x86<S: WordSource>(src: S) -> PopCount {
    let mut total = 0;
    for i in 0..src.len() {
        total += PopCount::from(src.word(i).count_ones());
    }
    total
}
