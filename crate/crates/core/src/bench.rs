//! Microbenchmark harness.
//!
//! Each (kernel, size) pair is warmed up once, then timed `repeats` times
//! on the same randomized buffer. A timed repeat runs the kernel enough
//! times back to back to span a few thousand ticks, which keeps the timer's
//! own cost out of small measurements. Results are reported per 64-bit
//! word (per word pair for Jaccard) as both minimum and mean; a record is
//! stable when the mean is within 1% of the minimum.

use std::fmt::Write as _;
use std::hint::black_box;
use std::io::Write;
use std::sync::OnceLock;
use std::time::Instant;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::block::PopCount;
use crate::dispatch::{Dispatcher, KernelId, KernelKind, Thresholds};
use crate::error::{Error, Result};

/// Largest mean/min ratio a record may show and still count as stable.
pub const STABILITY_BOUND: f64 = 1.01;
pub const DEFAULT_REPEATS: u32 = 500;
pub const DEFAULT_SEED: u64 = 0x005E_ED0F_B175;

/// Ticks a single timed repeat should cover at minimum.
const MIN_REPEAT_TICKS: u64 = 4096;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TimerKind {
    /// Serialized time-stamp counter reads (reference cycles).
    #[serde(rename = "cycle-counter")]
    CycleCounter,
    /// Monotonic clock; values are nanoseconds.
    #[serde(rename = "wall-clock-ns")]
    WallClockNs,
}

impl TimerKind {
    pub fn detect() -> Self {
        if cfg!(target_arch = "x86_64") {
            TimerKind::CycleCounter
        } else {
            TimerKind::WallClockNs
        }
    }

    pub fn unit(self) -> &'static str {
        match self {
            TimerKind::CycleCounter => "cycles",
            TimerKind::WallClockNs => "ns",
        }
    }

    #[inline(always)]
    fn now(self) -> u64 {
        match self {
            #[cfg(target_arch = "x86_64")]
            // SAFETY: rdtsc and lfence exist on every x86-64 CPU.
            TimerKind::CycleCounter => unsafe {
                use std::arch::x86_64::{_mm_lfence, _rdtsc};
                _mm_lfence();
                let t = _rdtsc();
                _mm_lfence();
                t
            },
            _ => {
                static EPOCH: OnceLock<Instant> = OnceLock::new();
                EPOCH.get_or_init(Instant::now).elapsed().as_nanos() as u64
            }
        }
    }

    /// Smallest observed cost of an empty timed region.
    fn overhead(self) -> u64 {
        (0..1000)
            .map(|_| {
                let t0 = self.now();
                let t1 = self.now();
                t1.saturating_sub(t0)
            })
            .min()
            .unwrap_or(0)
    }
}

/// Mean/min ratio of a fixed register-only workload timed like a kernel.
/// Anything well above [`STABILITY_BOUND`] means the host itself (frequency
/// changes, other tenants, interrupts) is too noisy for stable records.
pub fn host_noise(repeats: u32) -> f64 {
    fn work() -> PopCount {
        let mut x = black_box(0x9E37_79B9_7F4A_7C15u64);
        for _ in 0..1024 {
            x ^= x << 13;
            x ^= x >> 7;
            x ^= x << 17;
        }
        x
    }
    let (record, _) = time_repeats("host-noise", 0, 1, repeats, work);
    record.ratio()
}

/// One row of benchmark output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRecord {
    pub kernel: String,
    #[serde(rename = "bytes")]
    pub input_bytes: usize,
    pub repeats: u32,
    pub min_cycles_per_word: f64,
    pub mean_cycles_per_word: f64,
    pub timer_kind: TimerKind,
    pub stable: bool,
}

impl BenchmarkRecord {
    pub fn ratio(&self) -> f64 {
        if self.min_cycles_per_word > 0.0 {
            self.mean_cycles_per_word / self.min_cycles_per_word
        } else if self.mean_cycles_per_word > 0.0 {
            f64::INFINITY
        } else {
            1.0
        }
    }
}

/// A record plus the value the kernel produced while being timed.
#[derive(Clone, Debug, PartialEq)]
pub struct Measurement {
    pub record: BenchmarkRecord,
    /// Population count, or intersection count for Jaccard kernels.
    pub result: PopCount,
    /// Union count for Jaccard kernels.
    pub union: Option<PopCount>,
}

/// Times `f` and reports per-unit costs. `units` is the number of 64-bit
/// words (or word pairs) each call processes.
fn time_repeats(
    kernel: &str,
    bytes: usize,
    units: usize,
    repeats: u32,
    mut f: impl FnMut() -> PopCount,
) -> (BenchmarkRecord, PopCount) {
    let timer = TimerKind::detect();
    let overhead = timer.overhead();
    let repeats = repeats.max(1);

    // warm-up, and an estimate of how many calls fill one repeat
    let result = black_box(f());
    let t0 = timer.now();
    black_box(f());
    let single = (timer.now().saturating_sub(t0))
        .saturating_sub(overhead)
        .max(1);
    let inner = MIN_REPEAT_TICKS.div_ceil(single).clamp(1, 1 << 16);

    let per_unit = (inner * units.max(1) as u64) as f64;
    let mut min = f64::INFINITY;
    let mut sum = 0.0;
    for _ in 0..repeats {
        let t0 = timer.now();
        for _ in 0..inner {
            black_box(f());
        }
        let t1 = timer.now();
        let v = (t1.saturating_sub(t0)).saturating_sub(overhead) as f64 / per_unit;
        min = min.min(v);
        sum += v;
    }
    let mean = (sum / f64::from(repeats)).max(min);
    let record = BenchmarkRecord {
        kernel: kernel.to_owned(),
        input_bytes: bytes,
        repeats,
        min_cycles_per_word: min,
        mean_cycles_per_word: mean,
        timer_kind: timer,
        stable: mean <= min * STABILITY_BOUND,
    };
    (record, result)
}

fn random_buffer(words: usize, seed: u64) -> Vec<u64> {
    let mut rng = StdRng::seed_from_u64(seed);
    (0..words).map(|_| rng.gen()).collect()
}

fn words_for(bytes: usize) -> usize {
    bytes.div_ceil(8)
}

/// Measures a count kernel on `words`.
pub fn measure_words(kernel: KernelId, words: &[u64], repeats: u32) -> Result<Measurement> {
    let bound = kernel.bind_count()?;
    let (record, result) =
        time_repeats(kernel.name(), words.len() * 8, words.len(), repeats, || {
            bound.call(black_box(words))
        });
    Ok(Measurement {
        record,
        result,
        union: None,
    })
}

/// Measures a fused Jaccard kernel on the pair `(a, b)`; costs are per word
/// pair.
pub fn measure_pair(kernel: KernelId, a: &[u64], b: &[u64], repeats: u32) -> Result<Measurement> {
    let bound = kernel.bind_jaccard()?;
    bound.call(a, b)?;
    let mut union = 0;
    let (record, result) = time_repeats(kernel.name(), a.len() * 8, a.len(), repeats, || {
        let (i, u) = bound
            .call(black_box(a), black_box(b))
            .expect("lengths checked");
        union = u;
        i
    });
    Ok(Measurement {
        record,
        result,
        union: Some(union),
    })
}

/// Measures `kernel` by name on a fresh random buffer of `size` bytes
/// (rounded up to whole words).
pub fn measure(kernel: &str, size: usize, repeats: u32, seed: u64) -> Result<Measurement> {
    let id =
        KernelId::from_name(kernel).ok_or_else(|| Error::UnsupportedKernel(kernel.to_owned()))?;
    let n = words_for(size);
    match id.kind() {
        KernelKind::Count => measure_words(id, &random_buffer(n, seed), repeats),
        KernelKind::Jaccard => {
            let a = random_buffer(n, seed);
            let b = random_buffer(n, seed.wrapping_add(1));
            measure_pair(id, &a, &b, repeats)
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Markdown,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchConfig {
    /// Input sizes in bytes.
    pub sizes: Vec<usize>,
    pub repeats: u32,
    /// Kernel names; `None` selects the default column set for the mode.
    pub kernels: Option<Vec<String>>,
    pub format: OutputFormat,
    pub mode: KernelKind,
    pub seed: u64,
}

/// 256 B to 64 KiB, doubling.
pub fn default_sizes() -> Vec<usize> {
    (8..=16).map(|p| 1usize << p).collect()
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            sizes: default_sizes(),
            repeats: DEFAULT_REPEATS,
            kernels: None,
            format: OutputFormat::Markdown,
            mode: KernelKind::Count,
            seed: DEFAULT_SEED,
        }
    }
}

impl BenchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.sizes.is_empty() || self.sizes.contains(&0) {
            return Err(Error::InvalidConfig(
                "sizes must be non-empty and positive".into(),
            ));
        }
        if self.repeats == 0 {
            return Err(Error::InvalidConfig("repeats must be at least 1".into()));
        }
        Ok(())
    }

    /// Kernel columns for this run: the requested names, or every runnable
    /// native kernel from the default set.
    pub fn kernel_ids(&self, dispatcher: &Dispatcher) -> Result<Vec<KernelId>> {
        match &self.kernels {
            Some(names) => names
                .iter()
                .map(|n| dispatcher.resolve(n, self.mode).map(|d| d.id))
                .collect(),
            None => {
                let defaults: &[KernelId] = match self.mode {
                    KernelKind::Count => &[
                        KernelId::Wwg,
                        KernelId::Lauradoux,
                        KernelId::HarleySeal64,
                        KernelId::HwPopcnt,
                        KernelId::MulaAvx2,
                        KernelId::Avx2Hs,
                        KernelId::Avx512Hs,
                    ],
                    KernelKind::Jaccard => &[
                        KernelId::JaccardPopcnt,
                        KernelId::JaccardMulaAvx2,
                        KernelId::JaccardAvx2Hs,
                        KernelId::JaccardAvx512Hs,
                    ],
                };
                Ok(defaults
                    .iter()
                    .copied()
                    .filter(|id| dispatcher.resolve(id.name(), self.mode).is_ok())
                    .collect())
            }
        }
    }
}

/// Size-by-kernel matrix of records.
#[derive(Clone, Debug, PartialEq)]
pub struct BenchTable {
    pub mode: KernelKind,
    pub sizes: Vec<usize>,
    pub kernels: Vec<String>,
    /// Row-major: `records[size_index * kernels.len() + kernel_index]`.
    pub records: Vec<BenchmarkRecord>,
}

impl BenchTable {
    pub fn record(&self, size_index: usize, kernel_index: usize) -> &BenchmarkRecord {
        &self.records[size_index * self.kernels.len() + kernel_index]
    }

    /// Index of the kernel with the lowest minimum in a row.
    pub fn fastest(&self, size_index: usize) -> Option<usize> {
        (0..self.kernels.len()).min_by(|&x, &y| {
            self.record(size_index, x)
                .min_cycles_per_word
                .total_cmp(&self.record(size_index, y).min_cycles_per_word)
        })
    }

    pub fn stable_fraction(&self) -> f64 {
        if self.records.is_empty() {
            return 1.0;
        }
        self.records.iter().filter(|r| r.stable).count() as f64 / self.records.len() as f64
    }

    pub fn write_csv(&self, out: impl Write) -> Result<()> {
        write_csv(&self.records, out)
    }

    /// Rows are sizes, columns kernels; the fastest cell per row is bold and
    /// unstable cells carry a `~`.
    pub fn to_markdown(&self) -> String {
        let timer = self
            .records
            .first()
            .map_or(TimerKind::detect(), |r| r.timer_kind);
        let per = match self.mode {
            KernelKind::Count => "64-bit word",
            KernelKind::Jaccard => "word-pair",
        };
        let mut s = String::new();
        let _ = writeln!(s, "{} per {per} (minimum over repeats)\n", timer.unit());
        let _ = writeln!(s, "| array size | {} |", self.kernels.join(" | "));
        let _ = writeln!(s, "|---|{}", "---|".repeat(self.kernels.len()));
        for (si, &size) in self.sizes.iter().enumerate() {
            let fastest = self.fastest(si);
            let cells: Vec<String> = (0..self.kernels.len())
                .map(|ki| {
                    let r = self.record(si, ki);
                    let mut cell = format!("{:.2}", r.min_cycles_per_word);
                    if Some(ki) == fastest {
                        cell = format!("**{cell}**");
                    }
                    if !r.stable {
                        cell.push('~');
                    }
                    cell
                })
                .collect();
            let _ = writeln!(s, "| {} | {} |", format_size(size), cells.join(" | "));
        }
        if self.records.iter().any(|r| !r.stable) {
            let _ = writeln!(s, "\n~ mean exceeds minimum by more than 1%");
        }
        s
    }
}

pub fn format_size(bytes: usize) -> String {
    if bytes >= 1024 && bytes.is_multiple_of(1024) {
        format!("{} kB", bytes / 1024)
    } else {
        format!("{bytes} B")
    }
}

/// Parses `256`, `4k`, `64kB` and similar sizes.
pub fn parse_size(text: &str) -> Result<usize> {
    let t = text.trim().to_ascii_lowercase();
    let (digits, scale) = if let Some(d) = t.strip_suffix("kb").or_else(|| t.strip_suffix('k')) {
        (d, 1024)
    } else {
        (t.strip_suffix('b').unwrap_or(&t), 1)
    };
    digits
        .trim()
        .parse::<usize>()
        .ok()
        .and_then(|v| v.checked_mul(scale))
        .filter(|&v| v > 0)
        .ok_or_else(|| Error::InvalidConfig(format!("bad size `{text}`")))
}

/// Runs every configured kernel at every size on shared random buffers.
pub fn run_bench(config: &BenchConfig, dispatcher: &Dispatcher) -> Result<BenchTable> {
    config.validate()?;
    let ids = config.kernel_ids(dispatcher)?;
    let mut records = Vec::with_capacity(ids.len() * config.sizes.len());
    let mut sizes = Vec::with_capacity(config.sizes.len());
    for (i, &size) in config.sizes.iter().enumerate() {
        let n = words_for(size);
        sizes.push(n * 8);
        let seed = config.seed.wrapping_add(2 * i as u64);
        let a = random_buffer(n, seed);
        let b = random_buffer(n, seed + 1);
        for &id in &ids {
            let m = match config.mode {
                KernelKind::Count => measure_words(id, &a, config.repeats)?,
                KernelKind::Jaccard => measure_pair(id, &a, &b, config.repeats)?,
            };
            records.push(m.record);
        }
    }
    Ok(BenchTable {
        mode: config.mode,
        sizes,
        kernels: ids.iter().map(|k| k.name().to_owned()).collect(),
        records,
    })
}

/// Columns: kernel,bytes,repeats,min_cycles_per_word,mean_cycles_per_word,timer_kind,stable
pub fn write_csv(records: &[BenchmarkRecord], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv(input: impl std::io::Read) -> Result<Vec<BenchmarkRecord>> {
    let mut r = csv::Reader::from_reader(input);
    r.deserialize()
        .map(|rec| rec.map_err(Error::from))
        .collect()
}

/// Crossover sizes measured on this host.
#[derive(Clone, Debug, PartialEq)]
pub struct CalibrationReport {
    pub count: BenchTable,
    pub jaccard: BenchTable,
    pub thresholds: Thresholds,
}

impl CalibrationReport {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for table in [&self.count, &self.jaccard] {
            let _ = writeln!(s, "{}", table.to_markdown());
            for (si, &size) in table.sizes.iter().enumerate() {
                if let Some(k) = table.fastest(si) {
                    let _ = writeln!(
                        s,
                        "fastest at {:>6}: {}",
                        format_size(size),
                        table.kernels[k]
                    );
                }
            }
            s.push('\n');
        }
        let show = |v: usize| {
            if v == usize::MAX {
                "never".to_owned()
            } else {
                format_size(v)
            }
        };
        let t = &self.thresholds;
        let _ = writeln!(s, "recommended thresholds:");
        let _ = writeln!(
            s,
            "  count_vector_min_bytes        = {}",
            show(t.count_vector_min_bytes)
        );
        let _ = writeln!(
            s,
            "  count_harley_seal_min_bytes   = {}",
            show(t.count_harley_seal_min_bytes)
        );
        let _ = writeln!(
            s,
            "  jaccard_harley_seal_min_bytes = {}",
            show(t.jaccard_harley_seal_min_bytes)
        );
        s
    }
}

/// Smallest size from which `faster` beats `slower` at every larger size
/// of the ladder; `usize::MAX` when it never does, 0 when it always does.
fn crossover(table: &BenchTable, slower: &str, faster: &str) -> Option<usize> {
    let si = table.kernels.iter().position(|k| k == slower)?;
    let fi = table.kernels.iter().position(|k| k == faster)?;
    let wins: Vec<bool> = (0..table.sizes.len())
        .map(|r| table.record(r, fi).min_cycles_per_word < table.record(r, si).min_cycles_per_word)
        .collect();
    let mut from = table.sizes.len();
    while from > 0 && wins[from - 1] {
        from -= 1;
    }
    Some(match from {
        0 => 0,
        f if f == table.sizes.len() => usize::MAX,
        f => table.sizes[f],
    })
}

/// Measures every runnable native kernel across `sizes` and derives
/// dispatch thresholds from the observed crossovers.
pub fn calibrate(
    dispatcher: &Dispatcher,
    sizes: &[usize],
    repeats: u32,
    seed: u64,
) -> Result<CalibrationReport> {
    let native = |kind: KernelKind| -> Vec<String> {
        dispatcher
            .kernels_of(kind)
            .filter(|d| !d.id.is_emulated())
            .map(|d| d.name.to_owned())
            .collect()
    };
    let mut config = BenchConfig {
        sizes: sizes.to_vec(),
        repeats,
        kernels: Some(native(KernelKind::Count)),
        format: OutputFormat::Markdown,
        mode: KernelKind::Count,
        seed,
    };
    let count = run_bench(&config, dispatcher)?;
    config.mode = KernelKind::Jaccard;
    config.kernels = Some(native(KernelKind::Jaccard));
    let jaccard = run_bench(&config, dispatcher)?;

    let defaults = Thresholds::default();
    let small = if dispatcher.features().has_popcnt {
        "popcnt"
    } else {
        "harley-seal"
    };
    let jsmall = if dispatcher.features().has_popcnt {
        "jaccard-popcnt"
    } else {
        "jaccard-harley-seal"
    };
    let count_vector =
        crossover(&count, small, "mula-avx2").unwrap_or(defaults.count_vector_min_bytes);
    let count_hs =
        crossover(&count, "mula-avx2", "avx2-hs").unwrap_or(defaults.count_harley_seal_min_bytes);
    let jaccard_hs = crossover(&jaccard, "jaccard-mula-avx2", "jaccard-avx2-hs")
        .or_else(|| crossover(&jaccard, jsmall, "jaccard-avx2-hs"))
        .unwrap_or(defaults.jaccard_harley_seal_min_bytes);
    Ok(CalibrationReport {
        count,
        jaccard,
        thresholds: Thresholds {
            count_vector_min_bytes: count_vector,
            count_harley_seal_min_bytes: count_hs,
            jaccard_harley_seal_min_bytes: jaccard_hs,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{intersection_oracle, popcount_oracle, union_oracle};
    use crate::vector::detect_cpu_features;

    #[test]
    fn single_repeat_has_equal_min_and_mean() {
        let m = measure("wwg", 256, 1, 1).unwrap();
        assert_eq!(m.record.repeats, 1);
        assert_eq!(m.record.min_cycles_per_word, m.record.mean_cycles_per_word);
        assert!(m.record.stable);
    }

    #[test]
    fn measured_value_is_oracle_value() {
        for kernel in ["wwg", "harley-seal", "lauradoux", "avx2-hs-portable"] {
            let words = random_buffer(300, 4);
            let m = measure_words(KernelId::from_name(kernel).unwrap(), &words, 3).unwrap();
            assert_eq!(m.result, popcount_oracle(&words));
            assert!(m.record.min_cycles_per_word <= m.record.mean_cycles_per_word);
        }
        let (a, b) = (random_buffer(200, 5), random_buffer(200, 6));
        let m = measure_pair(KernelId::JaccardHarleySeal64, &a, &b, 3).unwrap();
        assert_eq!(m.result, intersection_oracle(&a, &b));
        assert_eq!(m.union, Some(union_oracle(&a, &b)));
    }

    #[test]
    fn unknown_kernel() {
        assert!(matches!(
            measure("bogus", 256, 1, 0),
            Err(Error::UnsupportedKernel(_))
        ));
    }

    #[test]
    fn sizes_round_up_to_words() {
        let d = Dispatcher::new(detect_cpu_features());
        let config = BenchConfig {
            sizes: vec![9, 16],
            repeats: 2,
            kernels: Some(vec!["wwg".into()]),
            ..BenchConfig::default()
        };
        let t = run_bench(&config, &d).unwrap();
        assert_eq!(t.sizes, vec![16, 16]);
        assert_eq!(t.records[0].input_bytes, 16);
    }

    #[test]
    fn config_validation() {
        let d = Dispatcher::new(detect_cpu_features());
        let bad = BenchConfig {
            sizes: vec![0],
            ..BenchConfig::default()
        };
        assert!(run_bench(&bad, &d).is_err());
        let bad = BenchConfig {
            repeats: 0,
            ..BenchConfig::default()
        };
        assert!(run_bench(&bad, &d).is_err());
        assert_eq!(default_sizes().first(), Some(&256));
        assert_eq!(default_sizes().last(), Some(&65536));
    }

    #[test]
    fn size_parsing() {
        assert_eq!(parse_size("256").unwrap(), 256);
        assert_eq!(parse_size("4k").unwrap(), 4096);
        assert_eq!(parse_size("64kB").unwrap(), 65536);
        assert_eq!(parse_size("512B").unwrap(), 512);
        assert!(parse_size("0").is_err());
        assert!(parse_size("x").is_err());
    }

    #[test]
    fn markdown_marks_fastest_and_unstable() {
        let rec = |k: &str, min: f64, stable: bool| BenchmarkRecord {
            kernel: k.into(),
            input_bytes: 256,
            repeats: 5,
            min_cycles_per_word: min,
            mean_cycles_per_word: min * 1.5,
            timer_kind: TimerKind::CycleCounter,
            stable,
        };
        let t = BenchTable {
            mode: KernelKind::Jaccard,
            sizes: vec![256],
            kernels: vec!["a".into(), "b".into()],
            records: vec![rec("a", 3.0, true), rec("b", 2.5, false)],
        };
        let md = t.to_markdown();
        assert!(md.contains("per word-pair"));
        assert!(md.contains("| 256 B | 3.00 | **2.50**~ |"), "{md}");
    }

    #[test]
    fn crossover_detection() {
        let rec = |k: &str, size: usize, min: f64| BenchmarkRecord {
            kernel: k.into(),
            input_bytes: size,
            repeats: 1,
            min_cycles_per_word: min,
            mean_cycles_per_word: min,
            timer_kind: TimerKind::CycleCounter,
            stable: true,
        };
        let t = BenchTable {
            mode: KernelKind::Count,
            sizes: vec![256, 512, 1024],
            kernels: vec!["slow".into(), "fast".into()],
            records: vec![
                rec("slow", 256, 1.0),
                rec("fast", 256, 1.4),
                rec("slow", 512, 1.0),
                rec("fast", 512, 0.9),
                rec("slow", 1024, 1.0),
                rec("fast", 1024, 0.8),
            ],
        };
        assert_eq!(crossover(&t, "slow", "fast"), Some(512));
        assert_eq!(crossover(&t, "fast", "slow"), Some(usize::MAX));
        assert_eq!(crossover(&t, "slow", "missing"), None);
    }
}
