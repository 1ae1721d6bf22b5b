use std::fmt;
use std::sync::OnceLock;

/// Instruction-set extensions relevant to the counting kernels.
///
/// `has_512bit_ternlog` covers the full 512-bit tier used here: ternary
/// logic (AVX-512F) plus byte shuffles and byte sums (AVX-512BW).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct CpuFeatureSet {
    pub has_popcnt: bool,
    pub has_ssse3_shuffle: bool,
    pub has_256bit: bool,
    pub has_512bit_ternlog: bool,
}

impl CpuFeatureSet {
    /// No extensions at all; only scalar and emulated kernels qualify.
    pub const BASELINE: Self = Self {
        has_popcnt: false,
        has_ssse3_shuffle: false,
        has_256bit: false,
        has_512bit_ternlog: false,
    };

    pub const POPCNT: Self = Self {
        has_popcnt: true,
        ..Self::BASELINE
    };
    pub const SSSE3: Self = Self {
        has_ssse3_shuffle: true,
        ..Self::BASELINE
    };
    pub const AVX2: Self = Self {
        has_256bit: true,
        ..Self::BASELINE
    };
    pub const AVX512: Self = Self {
        has_512bit_ternlog: true,
        ..Self::BASELINE
    };

    /// `true` when every feature in `required` is present in `self`.
    pub fn contains(&self, required: &CpuFeatureSet) -> bool {
        (!required.has_popcnt || self.has_popcnt)
            && (!required.has_ssse3_shuffle || self.has_ssse3_shuffle)
            && (!required.has_256bit || self.has_256bit)
            && (!required.has_512bit_ternlog || self.has_512bit_ternlog)
    }

    /// Feature-wise AND, used to mask a detected set down for testing.
    pub fn intersect(&self, other: &CpuFeatureSet) -> CpuFeatureSet {
        CpuFeatureSet {
            has_popcnt: self.has_popcnt && other.has_popcnt,
            has_ssse3_shuffle: self.has_ssse3_shuffle && other.has_ssse3_shuffle,
            has_256bit: self.has_256bit && other.has_256bit,
            has_512bit_ternlog: self.has_512bit_ternlog && other.has_512bit_ternlog,
        }
    }

    pub fn union(&self, other: &CpuFeatureSet) -> CpuFeatureSet {
        CpuFeatureSet {
            has_popcnt: self.has_popcnt || other.has_popcnt,
            has_ssse3_shuffle: self.has_ssse3_shuffle || other.has_ssse3_shuffle,
            has_256bit: self.has_256bit || other.has_256bit,
            has_512bit_ternlog: self.has_512bit_ternlog || other.has_512bit_ternlog,
        }
    }

    pub fn names(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        if self.has_popcnt {
            out.push("popcnt");
        }
        if self.has_ssse3_shuffle {
            out.push("ssse3");
        }
        if self.has_256bit {
            out.push("avx2");
        }
        if self.has_512bit_ternlog {
            out.push("avx512");
        }
        out
    }
}

impl fmt::Display for CpuFeatureSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names = self.names();
        if names.is_empty() {
            f.write_str("baseline")
        } else {
            f.write_str(&names.join(","))
        }
    }
}

static DETECTED: OnceLock<CpuFeatureSet> = OnceLock::new();

/// Queries the processor once and caches the answer.
pub fn detect_cpu_features() -> CpuFeatureSet {
    *DETECTED.get_or_init(detect)
}

#[cfg(target_arch = "x86_64")]
fn detect() -> CpuFeatureSet {
    CpuFeatureSet {
        has_popcnt: std::arch::is_x86_feature_detected!("popcnt"),
        has_ssse3_shuffle: std::arch::is_x86_feature_detected!("ssse3"),
        has_256bit: std::arch::is_x86_feature_detected!("avx2"),
        has_512bit_ternlog: cfg!(feature = "avx512")
            && std::arch::is_x86_feature_detected!("avx512f")
            && std::arch::is_x86_feature_detected!("avx512bw"),
    }
}

#[cfg(not(target_arch = "x86_64"))]
fn detect() -> CpuFeatureSet {
    CpuFeatureSet::BASELINE
}
