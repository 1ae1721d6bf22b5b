//! Native x86-64 kernels. Every function here is `unsafe` because it
//! requires the CPU features named in its `target_feature` attribute;
//! [`super::native`] checks them before calling in.

use std::arch::x86_64::*;

use crate::block::PopCount;
use crate::scalar::wwg;
use crate::source::{AndWords, Combine, OrWords, WordSource, Words};

#[inline]
unsafe fn load128<S: WordSource>(src: &S, i: usize) -> __m128i {
    debug_assert!(i + 2 <= src.len());
    let a = _mm_loadu_si128(src.first().as_ptr().add(i).cast());
    match S::COMBINE {
        Combine::Identity => a,
        Combine::And => _mm_and_si128(a, _mm_loadu_si128(src.second().as_ptr().add(i).cast())),
        Combine::Or => _mm_or_si128(a, _mm_loadu_si128(src.second().as_ptr().add(i).cast())),
    }
}

#[inline]
#[target_feature(enable = "avx2")]
unsafe fn load256<S: WordSource>(src: &S, i: usize) -> __m256i {
    debug_assert!(i + 4 <= src.len());
    let a = _mm256_loadu_si256(src.first().as_ptr().add(i).cast());
    match S::COMBINE {
        Combine::Identity => a,
        Combine::And => {
            _mm256_and_si256(a, _mm256_loadu_si256(src.second().as_ptr().add(i).cast()))
        }
        Combine::Or => _mm256_or_si256(a, _mm256_loadu_si256(src.second().as_ptr().add(i).cast())),
    }
}

#[cfg(feature = "avx512")]
#[inline]
#[target_feature(enable = "avx512f")]
unsafe fn load512<S: WordSource>(src: &S, i: usize) -> __m512i {
    debug_assert!(i + 8 <= src.len());
    let a = _mm512_loadu_si512(src.first().as_ptr().add(i).cast());
    match S::COMBINE {
        Combine::Identity => a,
        Combine::And => {
            _mm512_and_si512(a, _mm512_loadu_si512(src.second().as_ptr().add(i).cast()))
        }
        Combine::Or => _mm512_or_si512(a, _mm512_loadu_si512(src.second().as_ptr().add(i).cast())),
    }
}

#[inline]
fn tail<S: WordSource>(src: &S, from: usize) -> PopCount {
    (from..src.len()).map(|k| wwg(src.word(k))).sum()
}

#[inline]
fn tail_pair(a: &[u64], b: &[u64], from: usize) -> (PopCount, PopCount) {
    (from..a.len()).fold((0, 0), |(i, u), k| {
        (i + wwg(a[k] & b[k]), u + wwg(a[k] | b[k]))
    })
}

#[inline]
unsafe fn hsum128(v: __m128i) -> u64 {
    let mut lanes = [0u64; 2];
    _mm_storeu_si128(lanes.as_mut_ptr().cast(), v);
    lanes[0] + lanes[1]
}

#[inline]
#[target_feature(enable = "avx2")]
unsafe fn hsum256(v: __m256i) -> u64 {
    let mut lanes = [0u64; 4];
    _mm256_storeu_si256(lanes.as_mut_ptr().cast(), v);
    lanes.iter().sum()
}

// ---------------------------------------------------------------- 128-bit

/// Sixteen byte counts: two shuffles, two ANDs, one byte add, one shift.
#[inline]
#[target_feature(enable = "ssse3")]
pub(crate) unsafe fn count_bytes_128(v: __m128i) -> __m128i {
    let lookup = _mm_setr_epi8(0, 1, 1, 2, 1, 2, 2, 3, 1, 2, 2, 3, 2, 3, 3, 4);
    let low_mask = _mm_set1_epi8(0x0f);
    let lo = _mm_and_si128(v, low_mask);
    let hi = _mm_and_si128(_mm_srli_epi16::<4>(v), low_mask);
    let cnt1 = _mm_shuffle_epi8(lookup, lo);
    let cnt2 = _mm_shuffle_epi8(lookup, hi);
    _mm_add_epi8(cnt1, cnt2)
}

#[target_feature(enable = "ssse3")]
pub(crate) unsafe fn mula_array_128<S: WordSource>(src: S) -> PopCount {
    const ROUNDS: usize = 8;
    let n = src.len();
    let zero = _mm_setzero_si128();
    let mut total = zero;
    let mut i = 0;
    while i + 2 * ROUNDS <= n {
        let mut acc = zero;
        for r in 0..ROUNDS {
            acc = _mm_add_epi8(acc, count_bytes_128(load128(&src, i + 2 * r)));
        }
        total = _mm_add_epi64(total, _mm_sad_epu8(acc, zero));
        i += 2 * ROUNDS;
    }
    let mut acc = zero;
    while i + 2 <= n {
        acc = _mm_add_epi8(acc, count_bytes_128(load128(&src, i)));
        i += 2;
    }
    total = _mm_add_epi64(total, _mm_sad_epu8(acc, zero));
    hsum128(total) + tail(&src, i)
}

// ---------------------------------------------------------------- 256-bit

#[inline]
#[target_feature(enable = "avx2")]
pub(crate) unsafe fn count_bytes_256(v: __m256i) -> __m256i {
    let lookup = _mm256_setr_epi8(
        0, 1, 1, 2, 1, 2, 2, 3, 1, 2, 2, 3, 2, 3, 3, 4, //
        0, 1, 1, 2, 1, 2, 2, 3, 1, 2, 2, 3, 2, 3, 3, 4,
    );
    let low_mask = _mm256_set1_epi8(0x0f);
    let lo = _mm256_and_si256(v, low_mask);
    let hi = _mm256_and_si256(_mm256_srli_epi32::<4>(v), low_mask);
    let popcnt1 = _mm256_shuffle_epi8(lookup, lo);
    let popcnt2 = _mm256_shuffle_epi8(lookup, hi);
    _mm256_add_epi8(popcnt1, popcnt2)
}

/// Four 64-bit lane counts, each in `[0, 64]`.
#[inline]
#[target_feature(enable = "avx2")]
pub(crate) unsafe fn count64_256(v: __m256i) -> __m256i {
    _mm256_sad_epu8(count_bytes_256(v), _mm256_setzero_si256())
}

#[target_feature(enable = "avx2")]
pub(crate) unsafe fn mula_array_256<S: WordSource>(src: S) -> PopCount {
    const ROUNDS: usize = 16;
    let n = src.len();
    let zero = _mm256_setzero_si256();
    let mut total = zero;
    let mut i = 0;
    while i + 4 * ROUNDS <= n {
        let mut acc = zero;
        for r in 0..ROUNDS {
            acc = _mm256_add_epi8(acc, count_bytes_256(load256(&src, i + 4 * r)));
        }
        total = _mm256_add_epi64(total, _mm256_sad_epu8(acc, zero));
        i += 4 * ROUNDS;
    }
    let mut acc = zero;
    while i + 4 <= n {
        acc = _mm256_add_epi8(acc, count_bytes_256(load256(&src, i)));
        i += 4;
    }
    total = _mm256_add_epi64(total, _mm256_sad_epu8(acc, zero));
    hsum256(total) + tail(&src, i)
}

#[inline]
#[target_feature(enable = "avx2")]
pub(crate) unsafe fn csa256(a: __m256i, b: __m256i, c: __m256i) -> (__m256i, __m256i) {
    let u = _mm256_xor_si256(a, b);
    let h = _mm256_or_si256(_mm256_and_si256(a, b), _mm256_and_si256(u, c));
    let l = _mm256_xor_si256(u, c);
    (h, l)
}

/// Harley-Seal state: `[total, ones, twos, fours, eights]`.
type Hs256 = [__m256i; 5];

/// Feeds 16 vectors, produced on demand by `d`, into the counters. Taking
/// a closure lets fused callers combine their inputs per step instead of
/// materializing all sixteen operands up front.
#[inline]
#[target_feature(enable = "avx2")]
unsafe fn hs256_push16(s: &mut Hs256, d: impl Fn(usize) -> __m256i) {
    let [total, mut ones, mut twos, mut fours, mut eights] = *s;
    let (twos_a, twos_b, fours_a, fours_b, eights_a, eights_b, sixteens);
    (twos_a, ones) = csa256(ones, d(0), d(1));
    (twos_b, ones) = csa256(ones, d(2), d(3));
    (fours_a, twos) = csa256(twos, twos_a, twos_b);
    let (twos_a, twos_b);
    (twos_a, ones) = csa256(ones, d(4), d(5));
    (twos_b, ones) = csa256(ones, d(6), d(7));
    (fours_b, twos) = csa256(twos, twos_a, twos_b);
    (eights_a, fours) = csa256(fours, fours_a, fours_b);
    let (twos_a, twos_b, fours_a, fours_b);
    (twos_a, ones) = csa256(ones, d(8), d(9));
    (twos_b, ones) = csa256(ones, d(10), d(11));
    (fours_a, twos) = csa256(twos, twos_a, twos_b);
    let (twos_a, twos_b);
    (twos_a, ones) = csa256(ones, d(12), d(13));
    (twos_b, ones) = csa256(ones, d(14), d(15));
    (fours_b, twos) = csa256(twos, twos_a, twos_b);
    (eights_b, fours) = csa256(fours, fours_a, fours_b);
    (sixteens, eights) = csa256(eights, eights_a, eights_b);
    *s = [
        _mm256_add_epi64(total, count64_256(sixteens)),
        ones,
        twos,
        fours,
        eights,
    ];
}

#[inline]
#[target_feature(enable = "avx2")]
unsafe fn csa256x2(
    a: [__m256i; 2],
    b: [__m256i; 2],
    c: [__m256i; 2],
) -> ([__m256i; 2], [__m256i; 2]) {
    let (h0, l0) = csa256(a[0], b[0], c[0]);
    let (h1, l1) = csa256(a[1], b[1], c[1]);
    ([h0, h1], [l0, l1])
}

/// Two trees advanced in lockstep; `d` yields one operand for each.
#[inline]
#[target_feature(enable = "avx2")]
unsafe fn hs256_push16_x2(s: &mut [Hs256; 2], d: impl Fn(usize) -> [__m256i; 2]) {
    let [[t0, o0, w0, f0, e0], [t1, o1, w1, f1, e1]] = *s;
    let (mut ones, mut twos, mut fours, mut eights) = ([o0, o1], [w0, w1], [f0, f1], [e0, e1]);
    let (twos_a, twos_b, fours_a, fours_b, eights_a, eights_b, sixteens);
    (twos_a, ones) = csa256x2(ones, d(0), d(1));
    (twos_b, ones) = csa256x2(ones, d(2), d(3));
    (fours_a, twos) = csa256x2(twos, twos_a, twos_b);
    let (twos_a, twos_b);
    (twos_a, ones) = csa256x2(ones, d(4), d(5));
    (twos_b, ones) = csa256x2(ones, d(6), d(7));
    (fours_b, twos) = csa256x2(twos, twos_a, twos_b);
    (eights_a, fours) = csa256x2(fours, fours_a, fours_b);
    let (twos_a, twos_b, fours_a, fours_b);
    (twos_a, ones) = csa256x2(ones, d(8), d(9));
    (twos_b, ones) = csa256x2(ones, d(10), d(11));
    (fours_a, twos) = csa256x2(twos, twos_a, twos_b);
    let (twos_a, twos_b);
    (twos_a, ones) = csa256x2(ones, d(12), d(13));
    (twos_b, ones) = csa256x2(ones, d(14), d(15));
    (fours_b, twos) = csa256x2(twos, twos_a, twos_b);
    (eights_b, fours) = csa256x2(fours, fours_a, fours_b);
    (sixteens, eights) = csa256x2(eights, eights_a, eights_b);
    *s = [
        [
            _mm256_add_epi64(t0, count64_256(sixteens[0])),
            ones[0],
            twos[0],
            fours[0],
            eights[0],
        ],
        [
            _mm256_add_epi64(t1, count64_256(sixteens[1])),
            ones[1],
            twos[1],
            fours[1],
            eights[1],
        ],
    ];
}

#[inline]
#[target_feature(enable = "avx2")]
unsafe fn hs256_finish(s: &Hs256) -> PopCount {
    let [total, ones, twos, fours, eights] = *s;
    let mut total = _mm256_slli_epi64::<4>(total);
    total = _mm256_add_epi64(total, _mm256_slli_epi64::<3>(count64_256(eights)));
    total = _mm256_add_epi64(total, _mm256_slli_epi64::<2>(count64_256(fours)));
    total = _mm256_add_epi64(total, _mm256_slli_epi64::<1>(count64_256(twos)));
    total = _mm256_add_epi64(total, count64_256(ones));
    hsum256(total)
}

#[target_feature(enable = "avx2")]
pub(crate) unsafe fn harley_seal_256<S: WordSource>(src: S) -> PopCount {
    let n = src.len();
    let zero = _mm256_setzero_si256();
    let mut state: Hs256 = [zero; 5];
    let mut i = 0;
    while i + 64 <= n {
        hs256_push16(&mut state, |k| load256(&src, i + 4 * k));
        i += 64;
    }
    hs256_finish(&state) + tail(&src, i)
}

/// Fused nibble-lookup intersection and union counts.
#[target_feature(enable = "avx2")]
pub(crate) unsafe fn jaccard_mula_256(a: &[u64], b: &[u64]) -> (PopCount, PopCount) {
    const ROUNDS: usize = 16;
    let (wa, wb) = (Words(a), Words(b));
    let n = a.len();
    let zero = _mm256_setzero_si256();
    let (mut inter, mut union) = (zero, zero);
    let mut i = 0;
    while i < n - n % 4 {
        let rounds = ROUNDS.min((n - i) / 4);
        let (mut acc_and, mut acc_or) = (zero, zero);
        for r in 0..rounds {
            let x = load256(&wa, i + 4 * r);
            let y = load256(&wb, i + 4 * r);
            acc_and = _mm256_add_epi8(acc_and, count_bytes_256(_mm256_and_si256(x, y)));
            acc_or = _mm256_add_epi8(acc_or, count_bytes_256(_mm256_or_si256(x, y)));
        }
        inter = _mm256_add_epi64(inter, _mm256_sad_epu8(acc_and, zero));
        union = _mm256_add_epi64(union, _mm256_sad_epu8(acc_or, zero));
        i += 4 * rounds;
    }
    let (ti, tu) = tail_pair(a, b, i);
    (hsum256(inter) + ti, hsum256(union) + tu)
}

/// Two Harley-Seal trees, over `a & b` and `a | b`, advanced together in
/// one pass so each input vector is loaded once.
#[target_feature(enable = "avx2")]
pub(crate) unsafe fn jaccard_harley_seal_256(a: &[u64], b: &[u64]) -> (PopCount, PopCount) {
    let n = a.len();
    let zero = _mm256_setzero_si256();
    let mut hs: [Hs256; 2] = [[zero; 5]; 2];
    let mut i = 0;
    while i + 64 <= n {
        hs256_push16_x2(&mut hs, |k| {
            let x = _mm256_loadu_si256(a.as_ptr().add(i + 4 * k).cast());
            let y = _mm256_loadu_si256(b.as_ptr().add(i + 4 * k).cast());
            [_mm256_and_si256(x, y), _mm256_or_si256(x, y)]
        });
        i += 64;
    }
    let (ti, tu) = tail_pair(a, b, i);
    (hs256_finish(&hs[0]) + ti, hs256_finish(&hs[1]) + tu)
}

// ---------------------------------------------------------------- 512-bit

#[cfg(feature = "avx512")]
mod wide {
    use super::*;

    /// Nibble lookup widened to 512 bits, then per-lane byte sums.
    #[inline]
    #[target_feature(enable = "avx512f,avx512bw")]
    pub(crate) unsafe fn count64_512(v: __m512i) -> __m512i {
        let lookup = _mm512_broadcast_i32x4(_mm_setr_epi8(
            0, 1, 1, 2, 1, 2, 2, 3, 1, 2, 2, 3, 2, 3, 3, 4,
        ));
        let low_mask = _mm512_set1_epi8(0x0f);
        let lo = _mm512_and_si512(v, low_mask);
        let hi = _mm512_and_si512(_mm512_srli_epi32::<4>(v), low_mask);
        let total = _mm512_add_epi8(
            _mm512_shuffle_epi8(lookup, lo),
            _mm512_shuffle_epi8(lookup, hi),
        );
        _mm512_sad_epu8(total, _mm512_setzero_si512())
    }

    /// Carry-save adder as two ternary-logic instructions: 0x96 is the
    /// three-way XOR, 0xE8 the majority (carry) function.
    #[inline]
    #[target_feature(enable = "avx512f")]
    pub(crate) unsafe fn csa512(a: __m512i, b: __m512i, c: __m512i) -> (__m512i, __m512i) {
        let l = _mm512_ternarylogic_epi64::<0x96>(c, b, a);
        let h = _mm512_ternarylogic_epi64::<0xE8>(c, b, a);
        (h, l)
    }

    type Hs512 = [__m512i; 5];

    #[inline]
    #[target_feature(enable = "avx512f,avx512bw")]
    unsafe fn hs512_push16(s: &mut Hs512, d: impl Fn(usize) -> __m512i) {
        let [total, mut ones, mut twos, mut fours, mut eights] = *s;
        let (twos_a, twos_b, fours_a, fours_b, eights_a, eights_b, sixteens);
        (twos_a, ones) = csa512(ones, d(0), d(1));
        (twos_b, ones) = csa512(ones, d(2), d(3));
        (fours_a, twos) = csa512(twos, twos_a, twos_b);
        let (twos_a, twos_b);
        (twos_a, ones) = csa512(ones, d(4), d(5));
        (twos_b, ones) = csa512(ones, d(6), d(7));
        (fours_b, twos) = csa512(twos, twos_a, twos_b);
        (eights_a, fours) = csa512(fours, fours_a, fours_b);
        let (twos_a, twos_b, fours_a, fours_b);
        (twos_a, ones) = csa512(ones, d(8), d(9));
        (twos_b, ones) = csa512(ones, d(10), d(11));
        (fours_a, twos) = csa512(twos, twos_a, twos_b);
        let (twos_a, twos_b);
        (twos_a, ones) = csa512(ones, d(12), d(13));
        (twos_b, ones) = csa512(ones, d(14), d(15));
        (fours_b, twos) = csa512(twos, twos_a, twos_b);
        (eights_b, fours) = csa512(fours, fours_a, fours_b);
        (sixteens, eights) = csa512(eights, eights_a, eights_b);
        *s = [
            _mm512_add_epi64(total, count64_512(sixteens)),
            ones,
            twos,
            fours,
            eights,
        ];
    }

    #[inline]
    #[target_feature(enable = "avx512f,avx512bw")]
    unsafe fn hs512_finish(s: &Hs512) -> PopCount {
        let [total, ones, twos, fours, eights] = *s;
        let mut total = _mm512_slli_epi64::<4>(total);
        total = _mm512_add_epi64(total, _mm512_slli_epi64::<3>(count64_512(eights)));
        total = _mm512_add_epi64(total, _mm512_slli_epi64::<2>(count64_512(fours)));
        total = _mm512_add_epi64(total, _mm512_slli_epi64::<1>(count64_512(twos)));
        total = _mm512_add_epi64(total, count64_512(ones));
        _mm512_reduce_add_epi64(total) as u64
    }

    #[target_feature(enable = "avx512f,avx512bw")]
    pub(crate) unsafe fn harley_seal_512<S: WordSource>(src: S) -> PopCount {
        let n = src.len();
        let mut state: Hs512 = [_mm512_setzero_si512(); 5];
        let mut i = 0;
        while i + 128 <= n {
            hs512_push16(&mut state, |k| load512(&src, i + 8 * k));
            i += 128;
        }
        hs512_finish(&state) + tail(&src, i)
    }

    #[target_feature(enable = "avx512f,avx512bw")]
    pub(crate) unsafe fn jaccard_harley_seal_512(a: &[u64], b: &[u64]) -> (PopCount, PopCount) {
        let (and, or) = (AndWords { a, b }, OrWords { a, b });
        let n = a.len();
        let zero = _mm512_setzero_si512();
        let (mut hs_and, mut hs_or): (Hs512, Hs512) = ([zero; 5], [zero; 5]);
        let mut i = 0;
        while i + 128 <= n {
            hs512_push16(&mut hs_and, |k| load512(&and, i + 8 * k));
            hs512_push16(&mut hs_or, |k| load512(&or, i + 8 * k));
            i += 128;
        }
        let (ti, tu) = tail_pair(a, b, i);
        (hs512_finish(&hs_and) + ti, hs512_finish(&hs_or) + tu)
    }
}

#[cfg(feature = "avx512")]
pub(crate) use wide::{count64_512, csa512, harley_seal_512, jaccard_harley_seal_512};
