//! Lane-by-lane emulation of the vector kernels.
//!
//! Each helper mirrors one SIMD instruction (byte shuffle, 16-bit shift,
//! byte add, sum of absolute differences, ternary logic) so the emulated
//! kernels run the same algorithm as the native ones, on any target.

use super::{NibbleLut, Vec128, Vec256, Vec512, VectorKernel};
use crate::block::PopCount;
use crate::scalar::{csa64, wwg};
use crate::source::{WordSource, Words};

/// Ternary-logic selectors: bit `4a + 2b + c` of the selector is the output
/// for input bits `(a, b, c)`.
pub const TERNLOG_XOR3: u8 = 0x96;
pub const TERNLOG_MAJORITY: u8 = 0xE8;

/// Byte shuffle: output byte `i` is `table[idx[i] & 15]`, or zero when the
/// top bit of `idx[i]` is set.
fn shuffle_bytes(table: &[u8; 16], idx: u8) -> u8 {
    if idx & 0x80 != 0 {
        0
    } else {
        table[usize::from(idx & 0x0F)]
    }
}

/// Bitwise three-input function chosen by `selector`.
pub fn ternary_logic(a: u64, b: u64, c: u64, selector: u8) -> u64 {
    let mut out = 0;
    for index in 0..8u8 {
        if selector >> index & 1 == 0 {
            continue;
        }
        let pick = |x: u64, bit: u8| if index >> bit & 1 == 1 { x } else { !x };
        out |= pick(a, 2) & pick(b, 1) & pick(c, 0);
    }
    out
}

/// Operations shared by the emulated 128/256/512-bit vectors.
pub(crate) trait LaneVec: Copy {
    const WORDS: usize;

    fn zero() -> Self;
    fn bytes(&self) -> &[u8];
    fn bytes_mut(&mut self) -> &mut [u8];
    fn lanes(&self) -> Vec<u64>;
    fn from_lanes(lanes: &[u64]) -> Self;

    fn load<S: WordSource>(src: &S, i: usize) -> Self {
        let lanes: Vec<u64> = (0..Self::WORDS).map(|k| src.word(i + k)).collect();
        Self::from_lanes(&lanes)
    }

    fn map_bytes(self, f: impl Fn(usize, u8) -> u8) -> Self {
        let mut out = self;
        for (i, b) in out.bytes_mut().iter_mut().enumerate() {
            *b = f(i, *b);
        }
        out
    }

    fn zip_lanes(self, other: Self, f: impl Fn(u64, u64) -> u64) -> Self {
        let lanes: Vec<u64> = self
            .lanes()
            .iter()
            .zip(other.lanes())
            .map(|(&x, y)| f(x, y))
            .collect();
        Self::from_lanes(&lanes)
    }

    fn and(self, other: Self) -> Self {
        self.zip_lanes(other, |x, y| x & y)
    }

    fn or(self, other: Self) -> Self {
        self.zip_lanes(other, |x, y| x | y)
    }

    fn add_u8(self, other: Self) -> Self {
        let rhs = other;
        self.map_bytes(|i, b| b.wrapping_add(rhs.bytes()[i]))
    }

    fn add_u64(self, other: Self) -> Self {
        self.zip_lanes(other, u64::wrapping_add)
    }

    fn shl_u64(self, k: u32) -> Self {
        self.zip_lanes(self, |x, _| x << k)
    }

    /// Logical right shift of each 16-bit lane.
    fn srli_u16(self, k: u32) -> Self {
        let mut out = self;
        for pair in out.bytes_mut().chunks_exact_mut(2) {
            let v = u16::from_le_bytes([pair[0], pair[1]]) >> k;
            pair.copy_from_slice(&v.to_le_bytes());
        }
        out
    }

    /// Sum of absolute differences against zero: each 64-bit lane becomes
    /// the sum of its eight bytes.
    fn sad_zero(self) -> Self {
        let lanes: Vec<u64> = self
            .bytes()
            .chunks_exact(8)
            .map(|c| c.iter().map(|&b| u64::from(b)).sum())
            .collect();
        Self::from_lanes(&lanes)
    }

    /// Nibble-lookup byte counts: shuffle the table by the low nibbles, by
    /// the high nibbles, and add.
    fn count_bytes(self) -> Self {
        let lut = &NibbleLut::TABLE.0;
        let lo = self.map_bytes(|_, b| b & 0x0F);
        let hi = self.srli_u16(4).map_bytes(|_, b| b & 0x0F);
        let cnt1 = lo.map_bytes(|_, b| shuffle_bytes(lut, b));
        let cnt2 = hi.map_bytes(|_, b| shuffle_bytes(lut, b));
        cnt1.add_u8(cnt2)
    }

    /// Per-64-bit-lane popcounts.
    fn count64(self) -> Self {
        self.count_bytes().sad_zero()
    }

    fn hsum(self) -> u64 {
        self.lanes().iter().sum()
    }

    /// `(high, low)` carry-save adder.
    fn csa(a: Self, b: Self, c: Self) -> (Self, Self) {
        let (a, b, c) = (a.lanes(), b.lanes(), c.lanes());
        let pairs: Vec<_> = (0..Self::WORDS).map(|k| csa64(a[k], b[k], c[k])).collect();
        let high: Vec<u64> = pairs.iter().map(|p| p.high).collect();
        let low: Vec<u64> = pairs.iter().map(|p| p.low).collect();
        (Self::from_lanes(&high), Self::from_lanes(&low))
    }
}

macro_rules! lane_vec {
    ($ty:ty) => {
        fn zero() -> Self {
            <$ty>::zero()
        }

        fn bytes(&self) -> &[u8] {
            &self.0
        }

        fn bytes_mut(&mut self) -> &mut [u8] {
            &mut self.0
        }

        fn lanes(&self) -> Vec<u64> {
            self.u64s().to_vec()
        }

        fn from_lanes(lanes: &[u64]) -> Self {
            <$ty>::from_u64s(lanes.try_into().expect("lane count"))
        }
    };
}

impl LaneVec for Vec128 {
    const WORDS: usize = 2;
    lane_vec!(Vec128);
}

impl LaneVec for Vec256 {
    const WORDS: usize = 4;
    lane_vec!(Vec256);
}

impl LaneVec for Vec512 {
    const WORDS: usize = 8;
    lane_vec!(Vec512);

    /// Two ternary-logic operations replace the five-op adder.
    fn csa(a: Self, b: Self, c: Self) -> (Self, Self) {
        let (a, b, c) = (a.lanes(), b.lanes(), c.lanes());
        let low: Vec<u64> = (0..8)
            .map(|k| ternary_logic(c[k], b[k], a[k], TERNLOG_XOR3))
            .collect();
        let high: Vec<u64> = (0..8)
            .map(|k| ternary_logic(c[k], b[k], a[k], TERNLOG_MAJORITY))
            .collect();
        (Self::from_lanes(&high), Self::from_lanes(&low))
    }
}

/// Nibble-lookup array count: `rounds` byte-count vectors are summed with
/// byte adds before each widening byte-sum. Whole vectors past the last
/// full block form one shorter batch; leftover words go through `wwg`.
pub(crate) fn mula_array<V: LaneVec, S: WordSource>(src: S, rounds: usize) -> PopCount {
    debug_assert!(rounds <= 31);
    let n = src.len();
    let block = V::WORDS * rounds;
    let mut total = V::zero();
    let mut i = 0;
    while i + block <= n {
        let mut acc = V::zero();
        for r in 0..rounds {
            acc = acc.add_u8(V::load(&src, i + r * V::WORDS).count_bytes());
        }
        total = total.add_u64(acc.sad_zero());
        i += block;
    }
    let mut acc = V::zero();
    while i + V::WORDS <= n {
        acc = acc.add_u8(V::load(&src, i).count_bytes());
        i += V::WORDS;
    }
    total = total.add_u64(acc.sad_zero());
    let mut count = total.hsum();
    for k in i..n {
        count += wwg(src.word(k));
    }
    count
}

/// Harley-Seal accumulator over one vector width.
pub(crate) struct HarleySeal<V> {
    total: V,
    ones: V,
    twos: V,
    fours: V,
    eights: V,
}

impl<V: LaneVec> HarleySeal<V> {
    pub(crate) fn new() -> Self {
        Self {
            total: V::zero(),
            ones: V::zero(),
            twos: V::zero(),
            fours: V::zero(),
            eights: V::zero(),
        }
    }

    pub(crate) fn push16(&mut self, d: &[V; 16]) {
        let (twos_a, ones) = V::csa(self.ones, d[0], d[1]);
        let (twos_b, ones) = V::csa(ones, d[2], d[3]);
        let (fours_a, twos) = V::csa(self.twos, twos_a, twos_b);
        let (twos_a, ones) = V::csa(ones, d[4], d[5]);
        let (twos_b, ones) = V::csa(ones, d[6], d[7]);
        let (fours_b, twos) = V::csa(twos, twos_a, twos_b);
        let (eights_a, fours) = V::csa(self.fours, fours_a, fours_b);
        let (twos_a, ones) = V::csa(ones, d[8], d[9]);
        let (twos_b, ones) = V::csa(ones, d[10], d[11]);
        let (fours_a, twos) = V::csa(twos, twos_a, twos_b);
        let (twos_a, ones) = V::csa(ones, d[12], d[13]);
        let (twos_b, ones) = V::csa(ones, d[14], d[15]);
        let (fours_b, twos) = V::csa(twos, twos_a, twos_b);
        let (eights_b, fours) = V::csa(fours, fours_a, fours_b);
        let (sixteens, eights) = V::csa(self.eights, eights_a, eights_b);
        self.total = self.total.add_u64(sixteens.count64());
        self.ones = ones;
        self.twos = twos;
        self.fours = fours;
        self.eights = eights;
    }

    pub(crate) fn finish(self) -> PopCount {
        let mut total = self.total.shl_u64(4);
        total = total.add_u64(self.eights.count64().shl_u64(3));
        total = total.add_u64(self.fours.count64().shl_u64(2));
        total = total.add_u64(self.twos.count64().shl_u64(1));
        total = total.add_u64(self.ones.count64());
        total.hsum()
    }
}

pub(crate) fn harley_seal<V: LaneVec, S: WordSource>(src: S) -> PopCount {
    let n = src.len();
    let block = 16 * V::WORDS;
    let mut hs = HarleySeal::<V>::new();
    let mut i = 0;
    while i + block <= n {
        let d: [V; 16] = std::array::from_fn(|k| V::load(&src, i + k * V::WORDS));
        hs.push16(&d);
        i += block;
    }
    let mut count = hs.finish();
    for k in i..n {
        count += wwg(src.word(k));
    }
    count
}

/// Fused nibble-lookup counts of `a & b` and `a | b`, each input vector
/// loaded once. Returns `(intersection, union)`.
pub(crate) fn jaccard_mula<V: LaneVec>(
    a: &[u64],
    b: &[u64],
    rounds: usize,
) -> (PopCount, PopCount) {
    let (wa, wb) = (Words(a), Words(b));
    let n = a.len();
    let block = V::WORDS * rounds;
    let (mut inter, mut union) = (V::zero(), V::zero());
    let mut i = 0;
    let batch = |i: usize, count: usize, inter: &mut V, union: &mut V| {
        let (mut acc_and, mut acc_or) = (V::zero(), V::zero());
        for r in 0..count {
            let (x, y) = (
                V::load(&wa, i + r * V::WORDS),
                V::load(&wb, i + r * V::WORDS),
            );
            acc_and = acc_and.add_u8(x.and(y).count_bytes());
            acc_or = acc_or.add_u8(x.or(y).count_bytes());
        }
        *inter = inter.add_u64(acc_and.sad_zero());
        *union = union.add_u64(acc_or.sad_zero());
    };
    while i + block <= n {
        batch(i, rounds, &mut inter, &mut union);
        i += block;
    }
    let rest = (n - i) / V::WORDS;
    batch(i, rest, &mut inter, &mut union);
    i += rest * V::WORDS;
    let (mut ic, mut uc) = (inter.hsum(), union.hsum());
    for k in i..n {
        ic += wwg(a[k] & b[k]);
        uc += wwg(a[k] | b[k]);
    }
    (ic, uc)
}

/// Two interleaved Harley-Seal trees over `a & b` and `a | b`.
pub(crate) fn jaccard_harley_seal<V: LaneVec>(a: &[u64], b: &[u64]) -> (PopCount, PopCount) {
    let (wa, wb) = (Words(a), Words(b));
    let n = a.len();
    let block = 16 * V::WORDS;
    let (mut hs_and, mut hs_or) = (HarleySeal::<V>::new(), HarleySeal::<V>::new());
    let mut i = 0;
    while i + block <= n {
        let x: [V; 16] = std::array::from_fn(|k| V::load(&wa, i + k * V::WORDS));
        let y: [V; 16] = std::array::from_fn(|k| V::load(&wb, i + k * V::WORDS));
        hs_and.push16(&std::array::from_fn(|k| x[k].and(y[k])));
        hs_or.push16(&std::array::from_fn(|k| x[k].or(y[k])));
        i += block;
    }
    let (mut ic, mut uc) = (hs_and.finish(), hs_or.finish());
    for k in i..n {
        ic += wwg(a[k] & b[k]);
        uc += wwg(a[k] | b[k]);
    }
    (ic, uc)
}

pub fn mula_count_bytes_128(v: Vec128) -> Vec128 {
    v.count_bytes()
}

pub fn mula_array_128(words: &[u64]) -> PopCount {
    mula_array::<Vec128, _>(Words(words), 8)
}

pub fn mula_count64_256(v: Vec256) -> Vec256 {
    v.count64()
}

pub fn mula_array_256(words: &[u64]) -> PopCount {
    mula_array::<Vec256, _>(Words(words), 16)
}

pub fn csa256(a: Vec256, b: Vec256, c: Vec256) -> (Vec256, Vec256) {
    LaneVec::csa(a, b, c)
}

pub fn avx2_harley_seal(words: &[u64]) -> PopCount {
    harley_seal::<Vec256, _>(Words(words))
}

pub fn csa512(a: Vec512, b: Vec512, c: Vec512) -> (Vec512, Vec512) {
    LaneVec::csa(a, b, c)
}

pub fn avx512_harley_seal(words: &[u64]) -> PopCount {
    harley_seal::<Vec512, _>(Words(words))
}

/// Per-lane counts of a 512-bit vector through the widened nibble lookup.
pub fn mula_count64_512(v: Vec512) -> Vec512 {
    v.count64()
}

pub(crate) fn count_src<S: WordSource>(kernel: VectorKernel, src: S) -> PopCount {
    match kernel {
        VectorKernel::Mula128 => mula_array::<Vec128, _>(src, 8),
        VectorKernel::Mula256 => mula_array::<Vec256, _>(src, 16),
        VectorKernel::HarleySeal256 => harley_seal::<Vec256, _>(src),
        VectorKernel::HarleySeal512 => harley_seal::<Vec512, _>(src),
    }
}

pub(crate) fn jaccard(kernel: VectorKernel, a: &[u64], b: &[u64]) -> (PopCount, PopCount) {
    match kernel {
        VectorKernel::Mula128 => jaccard_mula::<Vec128>(a, b, 8),
        VectorKernel::Mula256 => jaccard_mula::<Vec256>(a, b, 16),
        VectorKernel::HarleySeal256 => jaccard_harley_seal::<Vec256>(a, b),
        VectorKernel::HarleySeal512 => jaccard_harley_seal::<Vec512>(a, b),
    }
}
