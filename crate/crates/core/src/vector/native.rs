//! Checked entry points to the native SIMD kernels. Each returns
//! [`Error::UnsupportedFeature`] when the running CPU lacks what the
//! kernel needs (always, on targets other than x86-64).

#[cfg(target_arch = "x86_64")]
use super::x86;
use super::{detect_cpu_features, CpuFeatureSet, Vec128, Vec256, Vec512, VectorKernel};
use crate::block::PopCount;
use crate::error::{Error, Result};
use crate::source::{WordSource, Words};

fn require(required: CpuFeatureSet) -> Result<()> {
    let have = detect_cpu_features();
    if have.contains(&required) {
        return Ok(());
    }
    let missing = required
        .names()
        .into_iter()
        .find(|f| !have.names().contains(f));
    Err(Error::UnsupportedFeature(missing.unwrap_or("unknown")))
}

pub(crate) fn count_src<S: WordSource>(kernel: VectorKernel, src: S) -> Result<PopCount> {
    require(kernel.required())?;
    #[cfg(target_arch = "x86_64")]
    // SAFETY: the features each kernel needs were checked above.
    unsafe {
        match kernel {
            VectorKernel::Mula128 => Ok(x86::mula_array_128(src)),
            VectorKernel::Mula256 => Ok(x86::mula_array_256(src)),
            VectorKernel::HarleySeal256 => Ok(x86::harley_seal_256(src)),
            #[cfg(feature = "avx512")]
            VectorKernel::HarleySeal512 => Ok(x86::harley_seal_512(src)),
            #[allow(unreachable_patterns)]
            _ => Err(Error::UnsupportedFeature("avx512")),
        }
    }
    #[cfg(not(target_arch = "x86_64"))]
    {
        let _ = src;
        unreachable!("no native features on this target")
    }
}

/// Fused `(intersection, union)` counts. Lengths must already match.
pub(crate) fn jaccard(kernel: VectorKernel, a: &[u64], b: &[u64]) -> Result<(PopCount, PopCount)> {
    require(kernel.required())?;
    debug_assert_eq!(a.len(), b.len());
    #[cfg(target_arch = "x86_64")]
    // SAFETY: features checked above; `a` and `b` have equal length.
    unsafe {
        match kernel {
            VectorKernel::Mula256 => Ok(x86::jaccard_mula_256(a, b)),
            VectorKernel::HarleySeal256 => Ok(x86::jaccard_harley_seal_256(a, b)),
            #[cfg(feature = "avx512")]
            VectorKernel::HarleySeal512 => Ok(x86::jaccard_harley_seal_512(a, b)),
            _ => Err(Error::UnsupportedKernel(format!("fused {kernel:?}"))),
        }
    }
    #[cfg(not(target_arch = "x86_64"))]
    {
        let _ = (a, b);
        unreachable!("no native features on this target")
    }
}

pub fn mula_count_bytes_128(v: Vec128) -> Result<Vec128> {
    require(CpuFeatureSet::SSSE3)?;
    #[cfg(target_arch = "x86_64")]
    // SAFETY: ssse3 checked; Vec128 is 16 bytes.
    unsafe {
        use std::arch::x86_64::*;
        let r = x86::count_bytes_128(_mm_loadu_si128(v.0.as_ptr().cast()));
        let mut out = Vec128::zero();
        _mm_storeu_si128(out.0.as_mut_ptr().cast(), r);
        Ok(out)
    }
    #[cfg(not(target_arch = "x86_64"))]
    unreachable!("{v:?}")
}

pub fn mula_array_128(words: &[u64]) -> Result<PopCount> {
    count_src(VectorKernel::Mula128, Words(words))
}

pub fn mula_count64_256(v: Vec256) -> Result<Vec256> {
    require(CpuFeatureSet::AVX2)?;
    #[cfg(target_arch = "x86_64")]
    // SAFETY: avx2 checked; Vec256 is 32 bytes.
    unsafe {
        use std::arch::x86_64::*;
        let r = x86::count64_256(_mm256_loadu_si256(v.0.as_ptr().cast()));
        let mut out = Vec256::zero();
        _mm256_storeu_si256(out.0.as_mut_ptr().cast(), r);
        Ok(out)
    }
    #[cfg(not(target_arch = "x86_64"))]
    unreachable!("{v:?}")
}

pub fn mula_array_256(words: &[u64]) -> Result<PopCount> {
    count_src(VectorKernel::Mula256, Words(words))
}

pub fn csa256(a: Vec256, b: Vec256, c: Vec256) -> Result<(Vec256, Vec256)> {
    require(CpuFeatureSet::AVX2)?;
    #[cfg(target_arch = "x86_64")]
    // SAFETY: avx2 checked; all vectors are 32 bytes.
    unsafe {
        use std::arch::x86_64::*;
        let ld = |v: &Vec256| _mm256_loadu_si256(v.0.as_ptr().cast());
        let (h, l) = x86::csa256(ld(&a), ld(&b), ld(&c));
        let (mut high, mut low) = (Vec256::zero(), Vec256::zero());
        _mm256_storeu_si256(high.0.as_mut_ptr().cast(), h);
        _mm256_storeu_si256(low.0.as_mut_ptr().cast(), l);
        Ok((high, low))
    }
    #[cfg(not(target_arch = "x86_64"))]
    unreachable!("{a:?}{b:?}{c:?}")
}

pub fn avx2_harley_seal(words: &[u64]) -> Result<PopCount> {
    count_src(VectorKernel::HarleySeal256, Words(words))
}

pub fn csa512(a: Vec512, b: Vec512, c: Vec512) -> Result<(Vec512, Vec512)> {
    require(CpuFeatureSet::AVX512)?;
    #[cfg(all(target_arch = "x86_64", feature = "avx512"))]
    // SAFETY: avx512f/bw checked; all vectors are 64 bytes.
    unsafe {
        use std::arch::x86_64::*;
        let ld = |v: &Vec512| _mm512_loadu_si512(v.0.as_ptr().cast());
        let (h, l) = x86::csa512(ld(&a), ld(&b), ld(&c));
        let (mut high, mut low) = (Vec512::zero(), Vec512::zero());
        _mm512_storeu_si512(high.0.as_mut_ptr().cast(), h);
        _mm512_storeu_si512(low.0.as_mut_ptr().cast(), l);
        Ok((high, low))
    }
    #[cfg(not(all(target_arch = "x86_64", feature = "avx512")))]
    unreachable!("{a:?}{b:?}{c:?}")
}

/// Per-lane counts of a 512-bit vector.
pub fn mula_count64_512(v: Vec512) -> Result<Vec512> {
    require(CpuFeatureSet::AVX512)?;
    #[cfg(all(target_arch = "x86_64", feature = "avx512"))]
    // SAFETY: avx512f/bw checked.
    unsafe {
        use std::arch::x86_64::*;
        let r = x86::count64_512(_mm512_loadu_si512(v.0.as_ptr().cast()));
        let mut out = Vec512::zero();
        _mm512_storeu_si512(out.0.as_mut_ptr().cast(), r);
        Ok(out)
    }
    #[cfg(not(all(target_arch = "x86_64", feature = "avx512")))]
    unreachable!("{v:?}")
}

pub fn avx512_harley_seal(words: &[u64]) -> Result<PopCount> {
    count_src(VectorKernel::HarleySeal512, Words(words))
}
