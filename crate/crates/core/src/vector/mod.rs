//! SIMD population counts.
//!
//! Every vector operation exists twice: a native x86-64 path built on
//! SSSE3 / AVX2 / AVX-512 intrinsics, and a portable emulation over plain
//! arrays that follows the same instruction sequence lane by lane. The
//! functions at this level pick the native path when the running CPU has
//! the features and fall back to the emulation otherwise; [`native`] and
//! [`portable`] pin one side explicitly.
//!
//! Inputs are read with unaligned loads. Kernels that work in fixed blocks
//! finish the leftover words with the Wilkes-Wheeler-Gill count.

mod features;
pub mod native;
pub mod portable;
#[cfg(target_arch = "x86_64")]
pub(crate) mod x86;

pub use features::{detect_cpu_features, CpuFeatureSet};

use crate::block::PopCount;

/// The array-level vector algorithms, independent of backend.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub(crate) enum VectorKernel {
    Mula128,
    Mula256,
    HarleySeal256,
    HarleySeal512,
}

impl VectorKernel {
    pub(crate) fn required(self) -> CpuFeatureSet {
        match self {
            VectorKernel::Mula128 => CpuFeatureSet::SSSE3,
            VectorKernel::Mula256 | VectorKernel::HarleySeal256 => CpuFeatureSet::AVX2,
            VectorKernel::HarleySeal512 => CpuFeatureSet::AVX512,
        }
    }
}

/// Popcounts of the sixteen 4-bit values, in nibble order.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NibbleLut(pub [u8; 16]);

impl NibbleLut {
    pub const TABLE: NibbleLut = NibbleLut([0, 1, 1, 2, 1, 2, 2, 3, 1, 2, 2, 3, 2, 3, 3, 4]);

    #[inline]
    pub fn lookup(&self, nibble: u8) -> u8 {
        self.0[usize::from(nibble & 0x0F)]
    }
}

macro_rules! simd_vec {
    ($(#[$meta:meta])* $name:ident, $bytes:literal, $lanes:literal, $align:literal) => {
        $(#[$meta])*
        #[derive(Clone, Copy, Debug, PartialEq, Eq)]
        #[repr(C, align($align))]
        pub struct $name(pub [u8; $bytes]);

        impl $name {
            pub const BYTES: usize = $bytes;
            pub const WORDS: usize = $lanes;

            pub const fn zero() -> Self {
                Self([0; $bytes])
            }

            pub const fn splat(byte: u8) -> Self {
                Self([byte; $bytes])
            }

            /// Builds the vector from little-endian 64-bit lanes.
            pub fn from_u64s(lanes: [u64; $lanes]) -> Self {
                let mut out = [0u8; $bytes];
                for (chunk, lane) in out.chunks_exact_mut(8).zip(lanes) {
                    chunk.copy_from_slice(&lane.to_le_bytes());
                }
                Self(out)
            }

            pub fn u64s(&self) -> [u64; $lanes] {
                std::array::from_fn(|k| {
                    u64::from_le_bytes(self.0[8 * k..8 * k + 8].try_into().expect("8 bytes"))
                })
            }
        }

        impl Default for $name {
            fn default() -> Self {
                Self::zero()
            }
        }
    };
}

simd_vec!(
    /// 16-byte vector (SSE register width).
    Vec128, 16, 2, 16
);
simd_vec!(
    /// 32-byte vector (AVX2 register width).
    Vec256, 32, 4, 32
);
simd_vec!(
    /// 64-byte vector (AVX-512 register width).
    Vec512, 64, 8, 64
);

/// Per-byte popcounts of a 16-byte vector via two nibble lookups.
pub fn mula_count_bytes_128(v: Vec128) -> Vec128 {
    native::mula_count_bytes_128(v).unwrap_or_else(|_| portable::mula_count_bytes_128(v))
}

/// Array count with 128-bit nibble lookups, eight rounds per byte-sum.
pub fn mula_array_128(words: &[u64]) -> PopCount {
    native::mula_array_128(words).unwrap_or_else(|_| portable::mula_array_128(words))
}

/// Four per-lane 64-bit counts of a 256-bit vector.
pub fn mula_count64_256(v: Vec256) -> Vec256 {
    native::mula_count64_256(v).unwrap_or_else(|_| portable::mula_count64_256(v))
}

/// Array count with 256-bit nibble lookups in 512-byte blocks.
pub fn mula_array_256(words: &[u64]) -> PopCount {
    native::mula_array_256(words).unwrap_or_else(|_| portable::mula_array_256(words))
}

/// 256-bit carry-save adder, returned as `(high, low)`.
pub fn csa256(a: Vec256, b: Vec256, c: Vec256) -> (Vec256, Vec256) {
    native::csa256(a, b, c).unwrap_or_else(|_| portable::csa256(a, b, c))
}

/// Harley-Seal over sixteen 256-bit vectors per iteration.
pub fn avx2_harley_seal(words: &[u64]) -> PopCount {
    native::avx2_harley_seal(words).unwrap_or_else(|_| portable::avx2_harley_seal(words))
}

/// 512-bit carry-save adder from two ternary-logic operations.
pub fn csa512(a: Vec512, b: Vec512, c: Vec512) -> (Vec512, Vec512) {
    native::csa512(a, b, c).unwrap_or_else(|_| portable::csa512(a, b, c))
}

/// Harley-Seal over sixteen 512-bit vectors per iteration.
pub fn avx512_harley_seal(words: &[u64]) -> PopCount {
    native::avx512_harley_seal(words).unwrap_or_else(|_| portable::avx512_harley_seal(words))
}
