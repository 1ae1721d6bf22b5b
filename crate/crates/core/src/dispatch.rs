//! Kernel registry and per-call selection by CPU features and input size.
//!
//! Default crossovers: below 512 B the hardware count instruction wins,
//! from 512 B the 256-bit nibble lookup, and from 1 KiB the 256-bit
//! Harley-Seal. For Jaccard the fused nibble lookup already wins on the
//! smallest inputs and fused Harley-Seal takes over at 1 KiB. Crossovers
//! move between CPUs; `popcount calibrate` measures them on the host and
//! [`Thresholds`] accepts the result.
//!
//! Every entry point also takes an explicit kernel name, and the
//! `POPCOUNT_KERNEL` / `POPCOUNT_JACCARD_KERNEL` environment variables pin
//! the kernel used by [`count_auto`] and [`jaccard_auto`].

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::OnceLock;

use crate::block::PopCount;
use crate::error::{check_same_len, Error, Result};
use crate::scalar;
use crate::similarity::{self, SimilarityResult};
use crate::source::{AndWords, OrWords, WordSource, Words};
use crate::vector::{detect_cpu_features, native, portable, CpuFeatureSet, VectorKernel};

pub const COUNT_KERNEL_ENV: &str = "POPCOUNT_KERNEL";
pub const JACCARD_KERNEL_ENV: &str = "POPCOUNT_JACCARD_KERNEL";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum KernelKind {
    Count,
    Jaccard,
}

/// Every kernel this crate implements, native and emulated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum KernelId {
    NaiveTree,
    Wwg,
    Wegner,
    Table8,
    Table16,
    Lauradoux,
    HarleySeal64,
    HwPopcnt,
    MulaSse,
    MulaSsePortable,
    MulaAvx2,
    MulaAvx2Portable,
    Avx2Hs,
    Avx2HsPortable,
    Avx512Hs,
    Avx512HsPortable,
    JaccardWwg,
    JaccardHarleySeal64,
    JaccardPopcnt,
    JaccardMulaAvx2,
    JaccardMulaAvx2Portable,
    JaccardAvx2Hs,
    JaccardAvx2HsPortable,
    JaccardAvx512Hs,
    JaccardAvx512HsPortable,
}

impl KernelId {
    pub const ALL: [KernelId; 25] = [
        KernelId::NaiveTree,
        KernelId::Wwg,
        KernelId::Wegner,
        KernelId::Table8,
        KernelId::Table16,
        KernelId::Lauradoux,
        KernelId::HarleySeal64,
        KernelId::HwPopcnt,
        KernelId::MulaSse,
        KernelId::MulaSsePortable,
        KernelId::MulaAvx2,
        KernelId::MulaAvx2Portable,
        KernelId::Avx2Hs,
        KernelId::Avx2HsPortable,
        KernelId::Avx512Hs,
        KernelId::Avx512HsPortable,
        KernelId::JaccardWwg,
        KernelId::JaccardHarleySeal64,
        KernelId::JaccardPopcnt,
        KernelId::JaccardMulaAvx2,
        KernelId::JaccardMulaAvx2Portable,
        KernelId::JaccardAvx2Hs,
        KernelId::JaccardAvx2HsPortable,
        KernelId::JaccardAvx512Hs,
        KernelId::JaccardAvx512HsPortable,
    ];

    pub fn name(self) -> &'static str {
        match self {
            KernelId::NaiveTree => "naive-tree",
            KernelId::Wwg => "wwg",
            KernelId::Wegner => "wegner",
            KernelId::Table8 => "table8",
            KernelId::Table16 => "table16",
            KernelId::Lauradoux => "lauradoux",
            KernelId::HarleySeal64 => "harley-seal",
            KernelId::HwPopcnt => "popcnt",
            KernelId::MulaSse => "mula-sse",
            KernelId::MulaSsePortable => "mula-sse-portable",
            KernelId::MulaAvx2 => "mula-avx2",
            KernelId::MulaAvx2Portable => "mula-avx2-portable",
            KernelId::Avx2Hs => "avx2-hs",
            KernelId::Avx2HsPortable => "avx2-hs-portable",
            KernelId::Avx512Hs => "avx512-hs",
            KernelId::Avx512HsPortable => "avx512-hs-portable",
            KernelId::JaccardWwg => "jaccard-wwg",
            KernelId::JaccardHarleySeal64 => "jaccard-harley-seal",
            KernelId::JaccardPopcnt => "jaccard-popcnt",
            KernelId::JaccardMulaAvx2 => "jaccard-mula-avx2",
            KernelId::JaccardMulaAvx2Portable => "jaccard-mula-avx2-portable",
            KernelId::JaccardAvx2Hs => "jaccard-avx2-hs",
            KernelId::JaccardAvx2HsPortable => "jaccard-avx2-hs-portable",
            KernelId::JaccardAvx512Hs => "jaccard-avx512-hs",
            KernelId::JaccardAvx512HsPortable => "jaccard-avx512-hs-portable",
        }
    }

    pub fn from_name(name: &str) -> Option<KernelId> {
        KernelId::ALL.into_iter().find(|k| k.name() == name)
    }

    pub fn kind(self) -> KernelKind {
        if self >= KernelId::JaccardWwg {
            KernelKind::Jaccard
        } else {
            KernelKind::Count
        }
    }

    /// The vector algorithm behind this kernel and whether it runs natively.
    fn vector(self) -> Option<(VectorKernel, bool)> {
        use KernelId::*;
        Some(match self {
            MulaSse => (VectorKernel::Mula128, true),
            MulaSsePortable => (VectorKernel::Mula128, false),
            MulaAvx2 | JaccardMulaAvx2 => (VectorKernel::Mula256, true),
            MulaAvx2Portable | JaccardMulaAvx2Portable => (VectorKernel::Mula256, false),
            Avx2Hs | JaccardAvx2Hs => (VectorKernel::HarleySeal256, true),
            Avx2HsPortable | JaccardAvx2HsPortable => (VectorKernel::HarleySeal256, false),
            Avx512Hs | JaccardAvx512Hs => (VectorKernel::HarleySeal512, true),
            Avx512HsPortable | JaccardAvx512HsPortable => (VectorKernel::HarleySeal512, false),
            _ => return None,
        })
    }

    /// `true` for scalar emulations of vector kernels.
    pub fn is_emulated(self) -> bool {
        matches!(self.vector(), Some((_, false)))
    }

    pub fn required_features(self) -> CpuFeatureSet {
        match self {
            KernelId::HwPopcnt | KernelId::JaccardPopcnt => CpuFeatureSet::POPCNT,
            k => match k.vector() {
                Some((v, true)) => v.required(),
                _ => CpuFeatureSet::BASELINE,
            },
        }
    }

    fn index(self) -> usize {
        self as usize
    }

    pub(crate) fn count_src<S: WordSource>(self, src: S) -> Result<PopCount> {
        use KernelId::*;
        match self {
            NaiveTree => Ok(scalar::sum_per_word(src, scalar::naive_tree)),
            Wwg => Ok(scalar::sum_per_word(src, scalar::wwg)),
            Wegner => Ok(scalar::sum_per_word(src, scalar::wegner)),
            Table8 => {
                let table = &scalar::tables().0;
                Ok(scalar::sum_per_word(src, |w| table.count_word(w)))
            }
            Table16 => {
                let table = &scalar::tables().1;
                Ok(scalar::sum_per_word(src, |w| table.count_word(w)))
            }
            Lauradoux => Ok(scalar::lauradoux_src(src)),
            HarleySeal64 => Ok(scalar::harley_seal64_src(src)),
            HwPopcnt => scalar::hw_popcnt_src(src),
            k if k.kind() == KernelKind::Jaccard => Err(Error::UnsupportedKernel(format!(
                "{} is a Jaccard kernel",
                k.name()
            ))),
            k => match k.vector() {
                Some((v, true)) => native::count_src(v, src),
                Some((v, false)) => Ok(portable::count_src(v, src)),
                None => unreachable!("every scalar count kernel is listed above"),
            },
        }
    }

    /// `(intersection, union)` for a fused kernel; lengths already checked.
    pub(crate) fn jaccard_counts(self, a: &[u64], b: &[u64]) -> Result<(PopCount, PopCount)> {
        use KernelId::*;
        match self {
            JaccardWwg => Ok(similarity::wwg_counts(a, b)),
            JaccardHarleySeal64 => Ok(similarity::harley_seal64_counts(a, b)),
            JaccardPopcnt => similarity::popcnt_counts(a, b),
            k if k.kind() == KernelKind::Jaccard => match k.vector() {
                Some((v, true)) => native::jaccard(v, a, b),
                Some((v, false)) => Ok(portable::jaccard(v, a, b)),
                None => unreachable!("every Jaccard kernel is listed above or vectorized"),
            },
            k => Err(Error::UnsupportedKernel(format!(
                "{} is a count kernel",
                k.name()
            ))),
        }
    }

    /// Runs a count kernel on a plain bitset.
    pub fn count(self, words: &[u64]) -> Result<PopCount> {
        self.count_src(Words(words))
    }
}

/// A count kernel whose CPU requirements have been verified, reduced to a
/// plain function pointer for tight benchmark loops.
#[derive(Clone, Copy, Debug)]
pub struct BoundCount {
    id: KernelId,
    f: fn(&[u64]) -> PopCount,
}

impl BoundCount {
    pub fn id(&self) -> KernelId {
        self.id
    }

    #[inline]
    pub fn call(&self, words: &[u64]) -> PopCount {
        (self.f)(words)
    }
}

/// Fused Jaccard counterpart of [`BoundCount`].
#[derive(Clone, Copy, Debug)]
pub struct BoundJaccard {
    id: KernelId,
    f: fn(&[u64], &[u64]) -> (PopCount, PopCount),
}

impl BoundJaccard {
    pub fn id(&self) -> KernelId {
        self.id
    }

    /// `(intersection, union)` counts.
    #[inline]
    pub fn call(&self, a: &[u64], b: &[u64]) -> Result<(PopCount, PopCount)> {
        check_same_len(a, b)?;
        Ok((self.f)(a, b))
    }
}

impl KernelId {
    fn check_host(self) -> Result<()> {
        let have = detect_cpu_features();
        if have.contains(&self.required_features()) {
            Ok(())
        } else {
            Err(Error::UnsupportedKernel(format!(
                "{} (CPU feature absent)",
                self.name()
            )))
        }
    }

    /// Resolves a count kernel to a direct call, checking CPU support once.
    pub fn bind_count(self) -> Result<BoundCount> {
        use KernelId::*;
        self.check_host()?;
        let f: fn(&[u64]) -> PopCount = match self {
            NaiveTree => scalar::naive_tree_count,
            Wwg => scalar::wwg_count,
            Wegner => scalar::wegner_count,
            Table8 => scalar::table8_count,
            Table16 => scalar::table16_count,
            Lauradoux => scalar::lauradoux,
            HarleySeal64 => scalar::harley_seal64,
            MulaSsePortable => portable::mula_array_128,
            MulaAvx2Portable => portable::mula_array_256,
            Avx2HsPortable => portable::avx2_harley_seal,
            Avx512HsPortable => portable::avx512_harley_seal,
            // SAFETY (all native arms): check_host verified the features.
            #[cfg(target_arch = "x86_64")]
            HwPopcnt => |w| unsafe { scalar::hw_popcnt_x86(Words(w)) },
            #[cfg(target_arch = "x86_64")]
            MulaSse => |w| unsafe { crate::vector::x86::mula_array_128(Words(w)) },
            #[cfg(target_arch = "x86_64")]
            MulaAvx2 => |w| unsafe { crate::vector::x86::mula_array_256(Words(w)) },
            #[cfg(target_arch = "x86_64")]
            Avx2Hs => |w| unsafe { crate::vector::x86::harley_seal_256(Words(w)) },
            #[cfg(all(target_arch = "x86_64", feature = "avx512"))]
            Avx512Hs => |w| unsafe { crate::vector::x86::harley_seal_512(Words(w)) },
            k => return Err(Error::UnsupportedKernel(k.name().to_owned())),
        };
        Ok(BoundCount { id: self, f })
    }

    /// Resolves a fused Jaccard kernel to a direct call.
    pub fn bind_jaccard(self) -> Result<BoundJaccard> {
        use KernelId::*;
        self.check_host()?;
        let f: fn(&[u64], &[u64]) -> (PopCount, PopCount) = match self {
            JaccardWwg => similarity::wwg_counts,
            JaccardHarleySeal64 => similarity::harley_seal64_counts,
            JaccardMulaAvx2Portable => |a, b| portable::jaccard(VectorKernel::Mula256, a, b),
            JaccardAvx2HsPortable => |a, b| portable::jaccard(VectorKernel::HarleySeal256, a, b),
            JaccardAvx512HsPortable => |a, b| portable::jaccard(VectorKernel::HarleySeal512, a, b),
            // SAFETY (all native arms): check_host verified the features;
            // BoundJaccard::call checks the lengths.
            #[cfg(target_arch = "x86_64")]
            JaccardPopcnt => |a, b| unsafe { similarity::popcnt_counts_x86(a, b) },
            #[cfg(target_arch = "x86_64")]
            JaccardMulaAvx2 => |a, b| unsafe { crate::vector::x86::jaccard_mula_256(a, b) },
            #[cfg(target_arch = "x86_64")]
            JaccardAvx2Hs => |a, b| unsafe { crate::vector::x86::jaccard_harley_seal_256(a, b) },
            #[cfg(all(target_arch = "x86_64", feature = "avx512"))]
            JaccardAvx512Hs => |a, b| unsafe { crate::vector::x86::jaccard_harley_seal_512(a, b) },
            k => return Err(Error::UnsupportedKernel(k.name().to_owned())),
        };
        Ok(BoundJaccard { id: self, f })
    }
}

/// Size thresholds for automatic selection, in bytes per input.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Thresholds {
    /// Smallest input routed to the 256-bit nibble-lookup count.
    pub count_vector_min_bytes: usize,
    /// Smallest input routed to the 256-bit Harley-Seal count.
    pub count_harley_seal_min_bytes: usize,
    /// Smallest input pair routed to fused Harley-Seal Jaccard.
    pub jaccard_harley_seal_min_bytes: usize,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            count_vector_min_bytes: 512,
            count_harley_seal_min_bytes: 1024,
            jaccard_harley_seal_min_bytes: 1024,
        }
    }
}

/// A registered kernel.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct KernelDescriptor {
    pub name: &'static str,
    pub id: KernelId,
    pub kind: KernelKind,
    pub required_features: CpuFeatureSet,
    /// Inputs smaller than this are not routed here automatically.
    pub min_profitable_bytes: usize,
    /// Eligible for automatic selection (otherwise reachable by name only).
    pub auto: bool,
}

impl KernelDescriptor {
    fn new(id: KernelId, min_profitable_bytes: usize, auto: bool) -> Self {
        Self {
            name: id.name(),
            id,
            kind: id.kind(),
            required_features: id.required_features(),
            min_profitable_bytes,
            auto,
        }
    }
}

/// All kernels runnable with `features`, automatic candidates first in
/// order of preference (largest inputs first), then the rest.
pub fn register_kernels(features: CpuFeatureSet, thresholds: &Thresholds) -> Vec<KernelDescriptor> {
    use KernelId::*;
    let preferred = [
        KernelDescriptor::new(Avx2Hs, thresholds.count_harley_seal_min_bytes, true),
        KernelDescriptor::new(MulaAvx2, thresholds.count_vector_min_bytes, true),
        KernelDescriptor::new(HwPopcnt, 0, true),
        KernelDescriptor::new(HarleySeal64, 0, true),
        KernelDescriptor::new(
            JaccardAvx2Hs,
            thresholds.jaccard_harley_seal_min_bytes,
            true,
        ),
        KernelDescriptor::new(JaccardMulaAvx2, 0, true),
        KernelDescriptor::new(JaccardPopcnt, 0, true),
        KernelDescriptor::new(JaccardHarleySeal64, 0, true),
    ];
    let mut out: Vec<KernelDescriptor> = preferred
        .into_iter()
        .filter(|d| features.contains(&d.required_features))
        .collect();
    for id in KernelId::ALL {
        if features.contains(&id.required_features()) && !out.iter().any(|d| d.id == id) {
            let min = match id.kind() {
                KernelKind::Count if id == Avx512Hs => thresholds.count_harley_seal_min_bytes,
                KernelKind::Jaccard if id == JaccardAvx512Hs => {
                    thresholds.jaccard_harley_seal_min_bytes
                }
                _ => 0,
            };
            out.push(KernelDescriptor::new(id, min, false));
        }
    }
    out
}

/// Selects and runs kernels for one feature set.
#[derive(Debug)]
pub struct Dispatcher {
    features: CpuFeatureSet,
    thresholds: Thresholds,
    kernels: Vec<KernelDescriptor>,
    calls: Vec<AtomicU64>,
    count_override: Option<KernelId>,
    jaccard_override: Option<KernelId>,
    override_error: Option<String>,
}

impl Dispatcher {
    /// A dispatcher restricted to `features`, which may be a masked subset
    /// of what the CPU actually has.
    pub fn new(features: CpuFeatureSet) -> Self {
        Self::with_thresholds(features, Thresholds::default())
    }

    pub fn with_thresholds(features: CpuFeatureSet, thresholds: Thresholds) -> Self {
        // never offer a native kernel the CPU cannot run
        let features = features.intersect(&detect_cpu_features());
        Self {
            features,
            thresholds,
            kernels: register_kernels(features, &thresholds),
            calls: KernelId::ALL.iter().map(|_| AtomicU64::new(0)).collect(),
            count_override: None,
            jaccard_override: None,
            override_error: None,
        }
    }

    /// Routes every automatic count to `name` instead of size-based
    /// selection.
    pub fn with_count_override(mut self, name: &str) -> Result<Self> {
        self.count_override = Some(self.resolve(name, KernelKind::Count)?.id);
        Ok(self)
    }

    /// Routes every automatic Jaccard computation to `name`.
    pub fn with_jaccard_override(mut self, name: &str) -> Result<Self> {
        self.jaccard_override = Some(self.resolve(name, KernelKind::Jaccard)?.id);
        Ok(self)
    }

    /// Detected features plus the environment overrides. An unusable
    /// override is dropped and reported through [`Self::override_error`].
    pub fn from_env() -> Self {
        let mut d = Self::new(detect_cpu_features());
        let mut errors = Vec::new();
        if let Ok(name) = std::env::var(COUNT_KERNEL_ENV) {
            match d.resolve(&name, KernelKind::Count) {
                Ok(desc) => d.count_override = Some(desc.id),
                Err(e) => errors.push(format!("{COUNT_KERNEL_ENV}: {e}")),
            }
        }
        if let Ok(name) = std::env::var(JACCARD_KERNEL_ENV) {
            match d.resolve(&name, KernelKind::Jaccard) {
                Ok(desc) => d.jaccard_override = Some(desc.id),
                Err(e) => errors.push(format!("{JACCARD_KERNEL_ENV}: {e}")),
            }
        }
        if !errors.is_empty() {
            d.override_error = Some(errors.join("; "));
        }
        d
    }

    /// Process-wide dispatcher built from the detected CPU and environment.
    pub fn global() -> &'static Dispatcher {
        static GLOBAL: OnceLock<Dispatcher> = OnceLock::new();
        GLOBAL.get_or_init(Dispatcher::from_env)
    }

    pub fn features(&self) -> CpuFeatureSet {
        self.features
    }

    pub fn thresholds(&self) -> &Thresholds {
        &self.thresholds
    }

    pub fn kernels(&self) -> &[KernelDescriptor] {
        &self.kernels
    }

    pub fn kernels_of(&self, kind: KernelKind) -> impl Iterator<Item = &KernelDescriptor> {
        self.kernels.iter().filter(move |d| d.kind == kind)
    }

    /// Problem with an environment override, if one was ignored.
    pub fn override_error(&self) -> Option<&str> {
        self.override_error.as_deref()
    }

    pub fn count_override(&self) -> Option<KernelId> {
        self.count_override
    }

    pub fn jaccard_override(&self) -> Option<KernelId> {
        self.jaccard_override
    }

    /// Looks up a registered kernel of the given kind by name.
    pub fn resolve(&self, name: &str, kind: KernelKind) -> Result<&KernelDescriptor> {
        self.kernels
            .iter()
            .find(|d| d.name == name && d.kind == kind)
            .ok_or_else(|| Error::UnsupportedKernel(name.to_owned()))
    }

    fn select(&self, kind: KernelKind, bytes: usize) -> &KernelDescriptor {
        self.kernels
            .iter()
            .find(|d| d.kind == kind && d.auto && d.min_profitable_bytes <= bytes)
            .expect("a baseline kernel of every kind is always registered")
    }

    /// Kernel [`count_auto`] would use for `bytes` of input.
    pub fn select_count(&self, bytes: usize) -> &KernelDescriptor {
        match self.count_override {
            Some(id) => self
                .resolve(id.name(), KernelKind::Count)
                .expect("validated override"),
            None => self.select(KernelKind::Count, bytes),
        }
    }

    /// Kernel [`jaccard_auto`] would use for a pair of `bytes`-long inputs.
    pub fn select_jaccard(&self, bytes: usize) -> &KernelDescriptor {
        match self.jaccard_override {
            Some(id) => self
                .resolve(id.name(), KernelKind::Jaccard)
                .expect("validated override"),
            None => self.select(KernelKind::Jaccard, bytes),
        }
    }

    fn pick(&self, kind: KernelKind, kernel: Option<&str>, bytes: usize) -> Result<KernelId> {
        let desc = match kernel {
            Some(name) => self.resolve(name, kind)?,
            None if kind == KernelKind::Count => self.select_count(bytes),
            None => self.select_jaccard(bytes),
        };
        self.calls[desc.id.index()].fetch_add(1, Ordering::Relaxed);
        Ok(desc.id)
    }

    fn count_src<S: WordSource>(&self, src: S, kernel: Option<&str>) -> Result<PopCount> {
        self.pick(KernelKind::Count, kernel, src.len() * 8)?
            .count_src(src)
    }

    /// Population count with the selected (or named) kernel.
    pub fn count(&self, words: &[u64], kernel: Option<&str>) -> Result<PopCount> {
        self.count_src(Words(words), kernel)
    }

    pub fn count_auto(&self, words: &[u64]) -> PopCount {
        self.count(words, None)
            .expect("automatic selection only picks runnable kernels")
    }

    pub fn intersection_count(
        &self,
        a: &[u64],
        b: &[u64],
        kernel: Option<&str>,
    ) -> Result<PopCount> {
        check_same_len(a, b)?;
        self.count_src(AndWords::new(a, b), kernel)
    }

    pub fn union_count(&self, a: &[u64], b: &[u64], kernel: Option<&str>) -> Result<PopCount> {
        check_same_len(a, b)?;
        self.count_src(OrWords::new(a, b), kernel)
    }

    pub fn jaccard(&self, a: &[u64], b: &[u64], kernel: Option<&str>) -> Result<SimilarityResult> {
        check_same_len(a, b)?;
        let id = self.pick(KernelKind::Jaccard, kernel, a.len() * 8)?;
        let (i, u) = id.jaccard_counts(a, b)?;
        Ok(SimilarityResult::from_counts(i, u))
    }

    /// How many calls this dispatcher has routed to `id`.
    pub fn invocations(&self, id: KernelId) -> u64 {
        self.calls[id.index()].load(Ordering::Relaxed)
    }
}

/// Population count through the process-wide dispatcher.
pub fn count_auto(words: &[u64]) -> PopCount {
    Dispatcher::global().count_auto(words)
}

/// Jaccard index through the process-wide dispatcher.
pub fn jaccard_auto(a: &[u64], b: &[u64]) -> Result<SimilarityResult> {
    Dispatcher::global().jaccard(a, b, None)
}
