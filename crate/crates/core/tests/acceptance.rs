//! Acceptance criteria 1-7, run in order on one thread so the timing
//! criteria do not compete with other tests. Prints one line per criterion
//! and exits non-zero if any asserted criterion fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use proptest::collection::vec;
use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use popcount_core::bench::{self, BenchConfig, OutputFormat, STABILITY_BOUND};
use popcount_core::oracle::popcount_oracle;
use popcount_core::scalar::{self, csa64};
use popcount_core::vector::{self, portable, Vec256, Vec512};
use popcount_core::{
    detect_cpu_features, jaccard_hs, jaccard_popcnt, CpuFeatureSet, Dispatcher, KernelId,
    KernelKind,
};

const SEED: u64 = 0x00AC_CE97;

// criterion 1
const MAX_WORDS: usize = 2048;
const RANDOM_BLOCKS: u32 = 256;
const ORACLE_TIME_LIMIT: Duration = Duration::from_secs(120);
// criterion 2
const CSA_TRIPLES: usize = 1_000_000;
const CSA_LANE_TRIPLES: usize = 100_000;
// criterion 4
const SIMILARITY_PAIRS: usize = 10_000;
const PAIR_MAX_WORDS: usize = 128;
// criterion 5
const HS_MIN_SPEEDUP: f64 = 1.5;
const HS_SIZES: [usize; 4] = [8 << 10, 16 << 10, 32 << 10, 64 << 10];
const JACCARD_MIN_SPEEDUP: f64 = 1.8;
const JACCARD_SIZES: [usize; 3] = [16 << 10, 32 << 10, 64 << 10];
const SPEED_ROUNDS: usize = 20;
const SPEED_REPEATS: u32 = 100;
const PERF_TIME_LIMIT: Duration = Duration::from_secs(300);
// criterion 7
const MIN_STABLE_FRACTION: f64 = 0.90;

/// Independent of every kernel in the crate.
fn reference(words: &[u64]) -> u64 {
    words.iter().map(|w| u64::from(w.count_ones())).sum()
}

fn random_words(rng: &mut StdRng, n: usize) -> Vec<u64> {
    (0..n).map(|_| rng.gen()).collect()
}

enum Verdict {
    Pass(String),
    Fail(String),
    Skip(String),
    /// Criterion missed, but a stated precondition of it is absent on this
    /// host, so the miss is reported without failing the run.
    Unmet(String),
}

type Criterion = (&'static str, fn() -> Verdict);

fn runnable(id: KernelId, features: &CpuFeatureSet) -> bool {
    features.contains(&id.required_features())
}

fn count_kernels() -> impl Iterator<Item = KernelId> {
    KernelId::ALL
        .into_iter()
        .filter(|k| k.kind() == KernelKind::Count)
}

fn jaccard_kernels() -> impl Iterator<Item = KernelId> {
    KernelId::ALL
        .into_iter()
        .filter(|k| k.kind() == KernelKind::Jaccard)
}

fn oracle_equivalence() -> Verdict {
    let start = Instant::now();
    let features = detect_cpu_features();
    let kernels: Vec<KernelId> = count_kernels()
        .filter(|k| runnable(*k, &features))
        .collect();
    let skipped: Vec<&str> = count_kernels()
        .filter(|k| !runnable(*k, &features))
        .map(|k| k.name())
        .collect();

    let mut runner = TestRunner::new(Config {
        cases: RANDOM_BLOCKS,
        failure_persistence: None,
        rng_algorithm: proptest::test_runner::RngAlgorithm::ChaCha,
        ..Config::default()
    });
    let blocks = std::cell::Cell::new(0u32);
    let result = runner.run(
        &(0..=MAX_WORDS).prop_flat_map(|n| vec(any::<u64>(), n)),
        |words| {
            blocks.set(blocks.get() + 1);
            let want = reference(&words);
            prop_assert_eq!(popcount_oracle(&words), want, "oracle");
            for &k in &kernels {
                prop_assert_eq!(
                    k.count(&words).unwrap(),
                    want,
                    "{} on {} words",
                    k.name(),
                    words.len()
                );
            }
            Ok(())
        },
    );
    // the length extremes and every tail length of the widest block
    let mut rng = StdRng::seed_from_u64(SEED);
    let mut edges = vec![
        Vec::new(),
        vec![u64::MAX; MAX_WORDS],
        random_words(&mut rng, MAX_WORDS),
    ];
    edges.extend((1..=129).map(|n| random_words(&mut rng, n)));
    let edge_failure = edges.iter().find_map(|w| {
        let want = reference(w);
        kernels
            .iter()
            .find(|k| k.count(w).unwrap() != want)
            .map(|k| format!("{} on {} words", k.name(), w.len()))
    });
    let elapsed = start.elapsed();
    let blocks = blocks.get();
    let detail = format!(
        "{} kernels x {blocks} random blocks + {} edge blocks in {:.1}s{}",
        kernels.len(),
        edges.len(),
        elapsed.as_secs_f64(),
        if skipped.is_empty() {
            String::new()
        } else {
            format!("; skipped (feature absent): {}", skipped.join(", "))
        }
    );
    match (result, edge_failure) {
        (Err(e), _) => Verdict::Fail(format!("{e}")),
        (_, Some(f)) => Verdict::Fail(f),
        _ if blocks < 200 => Verdict::Fail(format!("only {blocks} blocks")),
        _ if elapsed > ORACLE_TIME_LIMIT => Verdict::Fail(format!("too slow: {detail}")),
        _ => Verdict::Pass(detail),
    }
}

fn csa_correctness() -> Verdict {
    // (a, b, c) -> (high, low), one row per input combination
    const TRUTH_TABLE: [(u64, u64, u64, u64, u64); 8] = [
        (0, 0, 0, 0, 0),
        (0, 0, 1, 0, 1),
        (0, 1, 0, 0, 1),
        (1, 0, 0, 0, 1),
        (0, 1, 1, 1, 0),
        (1, 0, 1, 1, 0),
        (1, 1, 0, 1, 0),
        (1, 1, 1, 1, 1),
    ];
    for (a, b, c, h, l) in TRUTH_TABLE {
        let s = csa64(a, b, c);
        if (s.high, s.low) != (h, l) {
            return Verdict::Fail(format!("row ({a},{b},{c}) gave ({}, {})", s.high, s.low));
        }
    }
    let pc = |w: u64| u64::from(w.count_ones());
    let mut rng = StdRng::seed_from_u64(SEED + 2);
    for _ in 0..CSA_TRIPLES {
        let (a, b, c) = rng.gen::<(u64, u64, u64)>();
        let s = csa64(a, b, c);
        if 2 * pc(s.high) + pc(s.low) != pc(a) + pc(b) + pc(c) {
            return Verdict::Fail(format!("conservation broken at ({a:#x}, {b:#x}, {c:#x})"));
        }
    }
    let lanes8 = |rng: &mut StdRng| -> [u64; 8] { rng.gen() };
    for _ in 0..CSA_LANE_TRIPLES / 8 {
        let (a, b, c) = (lanes8(&mut rng), lanes8(&mut rng), lanes8(&mut rng));
        let q = |x: [u64; 8]| Vec256::from_u64s([x[0], x[1], x[2], x[3]]);
        let (h4, l4) = vector::csa256(q(a), q(b), q(c));
        let (h4e, l4e) = portable::csa256(q(a), q(b), q(c));
        let (h8, l8) = vector::csa512(
            Vec512::from_u64s(a),
            Vec512::from_u64s(b),
            Vec512::from_u64s(c),
        );
        let (h8e, l8e) = portable::csa512(
            Vec512::from_u64s(a),
            Vec512::from_u64s(b),
            Vec512::from_u64s(c),
        );
        for lane in 0..8 {
            let s = csa64(a[lane], b[lane], c[lane]);
            let wide = (h8.u64s()[lane], l8.u64s()[lane]) == (s.high, s.low)
                && (h8e.u64s()[lane], l8e.u64s()[lane]) == (s.high, s.low);
            let narrow = lane >= 4
                || ((h4.u64s()[lane], l4.u64s()[lane]) == (s.high, s.low)
                    && (h4e.u64s()[lane], l4e.u64s()[lane]) == (s.high, s.low));
            if !(wide && narrow) {
                return Verdict::Fail(format!("lane {lane} differs from csa64"));
            }
        }
    }
    Verdict::Pass(format!(
        "8 truth-table rows, {CSA_TRIPLES} conservation triples, {CSA_LANE_TRIPLES} lane triples (native and emulated)"
    ))
}

fn tabulation() -> Verdict {
    let (bytes, shorts) = scalar::tables();
    if let Some(i) = (0..256usize).find(|&i| u32::from(bytes.0[i]) != i.count_ones()) {
        return Verdict::Fail(format!("byte table entry {i:#04x}"));
    }
    if let Some(i) = (0..65536usize).find(|&i| u32::from(shorts.0[i]) != i.count_ones()) {
        return Verdict::Fail(format!("16-bit table entry {i:#06x}"));
    }
    Verdict::Pass("256 byte entries, 65536 16-bit entries".into())
}

fn similarity_identities() -> Verdict {
    let d = Dispatcher::new(detect_cpu_features());
    let has_popcnt = d.features().has_popcnt;
    let mut rng = StdRng::seed_from_u64(SEED + 4);
    for case in 0..SIMILARITY_PAIRS {
        let n = rng.gen_range(1..=PAIR_MAX_WORDS);
        let a = random_words(&mut rng, n);
        // mix of independent, sparse and overlapping partners
        let b: Vec<u64> = match case % 3 {
            0 => random_words(&mut rng, n),
            1 => a
                .iter()
                .map(|w| w & rng.gen::<u64>() & rng.gen::<u64>())
                .collect(),
            _ => a
                .iter()
                .map(|w| w ^ (1u64 << rng.gen_range(0..64)))
                .collect(),
        };
        let not_a: Vec<u64> = a.iter().map(|w| !w).collect();
        let inter = d.intersection_count(&a, &b, None).unwrap();
        let union = d.union_count(&a, &b, None).unwrap();
        let ab = d.jaccard(&a, &b, None).unwrap();
        let ba = d.jaccard(&b, &a, None).unwrap();
        let fail = |what: &str| Verdict::Fail(format!("{what} on pair {case} ({n} words)"));
        if inter + union != reference(&a) + reference(&b) {
            return fail("inclusion-exclusion");
        }
        let and: Vec<u64> = a.iter().zip(&b).map(|(x, y)| x & y).collect();
        let or: Vec<u64> = a.iter().zip(&b).map(|(x, y)| x | y).collect();
        if (inter, union) != (reference(&and), reference(&or))
            || (ab.intersection_count, ab.union_count) != (inter, union)
        {
            return fail("counts");
        }
        if ab != ba {
            return fail("symmetry");
        }
        if d.jaccard(&a, &a, None).unwrap().jaccard != 1.0 {
            return fail("jaccard(a, a) = 1");
        }
        if d.jaccard(&a, &not_a, None).unwrap().jaccard != 0.0 {
            return fail("jaccard(a, !a) = 0");
        }
        let hs = jaccard_hs(&a, &b).unwrap();
        if hs != ab {
            return fail("jaccard_hs");
        }
        if has_popcnt && jaccard_popcnt(&a, &b).unwrap() != hs {
            return fail("jaccard_hs vs jaccard_popcnt");
        }
    }
    let note = if has_popcnt {
        ""
    } else {
        "; jaccard_popcnt skipped (feature absent)"
    };
    Verdict::Pass(format!("{SIMILARITY_PAIRS} random pairs{note}"))
}

/// Best per-word cost over interleaved rounds, so slow phases of the host
/// hit both kernels alike.
fn best_of(kernels: [KernelId; 2], size: usize, seed: u64) -> [f64; 2] {
    let mut rng = StdRng::seed_from_u64(seed);
    let n = size / 8;
    let (a, b) = (random_words(&mut rng, n), random_words(&mut rng, n));
    let mut best = [f64::INFINITY; 2];
    for _ in 0..SPEED_ROUNDS {
        for (slot, &k) in kernels.iter().enumerate() {
            let m = match k.kind() {
                KernelKind::Count => bench::measure_words(k, &a, SPEED_REPEATS),
                KernelKind::Jaccard => bench::measure_pair(k, &a, &b, SPEED_REPEATS),
            }
            .unwrap();
            best[slot] = best[slot].min(m.record.min_cycles_per_word);
        }
    }
    best
}

fn performance() -> Verdict {
    let f = detect_cpu_features();
    if !(f.has_256bit && f.has_popcnt) {
        return Verdict::Skip("no AVX2 or no popcnt on this host".into());
    }
    let start = Instant::now();
    let mut lines = Vec::new();
    let mut ok = true;
    for size in HS_SIZES {
        let [popcnt, hs] = best_of(
            [KernelId::HwPopcnt, KernelId::Avx2Hs],
            size,
            SEED + size as u64,
        );
        let r = popcnt / hs;
        ok &= r >= HS_MIN_SPEEDUP;
        lines.push(format!(
            "{}: {popcnt:.2}/{hs:.2}={r:.2}x",
            bench::format_size(size)
        ));
    }
    let count_line = format!(
        "count avx2-hs vs popcnt (need >= {HS_MIN_SPEEDUP}x) [{}]",
        lines.join(", ")
    );
    lines.clear();
    for size in JACCARD_SIZES {
        let [popcnt, hs] = best_of(
            [KernelId::JaccardPopcnt, KernelId::JaccardAvx2Hs],
            size,
            SEED + size as u64,
        );
        let r = popcnt / hs;
        ok &= r >= JACCARD_MIN_SPEEDUP;
        lines.push(format!(
            "{}: {popcnt:.2}/{hs:.2}={r:.2}x",
            bench::format_size(size)
        ));
    }
    let detail = format!(
        "{count_line}; jaccard avx2-hs vs popcnt (need >= {JACCARD_MIN_SPEEDUP}x) [{}]; {:.1}s",
        lines.join(", "),
        start.elapsed().as_secs_f64()
    );
    if ok && start.elapsed() <= PERF_TIME_LIMIT {
        Verdict::Pass(detail)
    } else {
        Verdict::Fail(detail)
    }
}

fn dispatch_soundness() -> Verdict {
    let detected = detect_cpu_features();
    let mut rng = StdRng::seed_from_u64(SEED + 6);
    let mut blocks: Vec<Vec<u64>> = [
        0usize, 1, 7, 31, 32, 63, 64, 127, 128, 129, 255, 256, 1000, 2048, 8192,
    ]
    .iter()
    .map(|&n| random_words(&mut rng, n))
    .collect();
    blocks.push(vec![u64::MAX; 4096]);
    let partners: Vec<Vec<u64>> = blocks
        .iter()
        .map(|w| random_words(&mut rng, w.len()))
        .collect();
    let want_count: Vec<u64> = blocks.iter().map(|w| reference(w)).collect();
    let want_pair: Vec<(u64, u64)> = blocks
        .iter()
        .zip(&partners)
        .map(|(a, b)| {
            let and: Vec<u64> = a.iter().zip(b).map(|(x, y)| x & y).collect();
            let or: Vec<u64> = a.iter().zip(b).map(|(x, y)| x | y).collect();
            (reference(&and), reference(&or))
        })
        .collect();

    // every runnable kernel forced in turn
    let mut swept = 0;
    for k in count_kernels().filter(|k| runnable(*k, &detected)) {
        let d = Dispatcher::new(detected)
            .with_count_override(k.name())
            .unwrap();
        for (w, &want) in blocks.iter().zip(&want_count) {
            if d.count_auto(w) != want {
                return Verdict::Fail(format!("override {} on {} words", k.name(), w.len()));
            }
        }
        if d.invocations(k) != blocks.len() as u64 {
            return Verdict::Fail(format!("override {} not honoured", k.name()));
        }
        swept += 1;
    }
    for k in jaccard_kernels().filter(|k| runnable(*k, &detected)) {
        let d = Dispatcher::new(detected)
            .with_jaccard_override(k.name())
            .unwrap();
        for ((a, b), &want) in blocks.iter().zip(&partners).zip(&want_pair) {
            let r = d.jaccard(a, b, None).unwrap();
            if (r.intersection_count, r.union_count) != want {
                return Verdict::Fail(format!("override {} on {} words", k.name(), a.len()));
            }
        }
        if d.invocations(k) != blocks.len() as u64 {
            return Verdict::Fail(format!("override {} not honoured", k.name()));
        }
        swept += 1;
    }

    // masked configurations never route to a kernel they exclude
    let masks = [
        CpuFeatureSet::BASELINE,
        CpuFeatureSet::POPCNT,
        CpuFeatureSet::POPCNT.union(&CpuFeatureSet::SSSE3),
        CpuFeatureSet::POPCNT
            .union(&CpuFeatureSet::SSSE3)
            .union(&CpuFeatureSet::AVX2),
        detected,
    ];
    for mask in masks {
        let d = Dispatcher::new(mask);
        for ((a, b), (&want, &pair)) in blocks
            .iter()
            .zip(&partners)
            .zip(want_count.iter().zip(&want_pair))
        {
            if d.count_auto(a) != want {
                return Verdict::Fail(format!("masked [{mask}] count on {} words", a.len()));
            }
            let r = d.jaccard(a, b, None).unwrap();
            if (r.intersection_count, r.union_count) != pair {
                return Verdict::Fail(format!("masked [{mask}] jaccard on {} words", a.len()));
            }
            if d.intersection_count(a, b, None).unwrap() != pair.0
                || d.union_count(a, b, None).unwrap() != pair.1
            {
                return Verdict::Fail(format!("masked [{mask}] set counts on {} words", a.len()));
            }
        }
        for k in KernelId::ALL {
            if !d.features().contains(&k.required_features()) && d.invocations(k) != 0 {
                return Verdict::Fail(format!("gated kernel {} ran under mask [{mask}]", k.name()));
            }
            if d.resolve(k.name(), k.kind()).is_ok() && !mask.contains(&k.required_features()) {
                return Verdict::Fail(format!(
                    "gated kernel {} offered under mask [{mask}]",
                    k.name()
                ));
            }
        }
    }
    Verdict::Pass(format!(
        "{swept} overrides swept over {} inputs; {} masked configurations",
        blocks.len(),
        masks.len()
    ))
}

fn measurement_protocol() -> Verdict {
    let config = BenchConfig {
        format: OutputFormat::Csv,
        ..BenchConfig::default()
    };
    assert_eq!(config.repeats, 500);
    let d = Dispatcher::new(detect_cpu_features());
    let table = bench::run_bench(&config, &d).unwrap();

    // flags must be truthful and visible in every output format
    let mut csv = Vec::new();
    table.write_csv(&mut csv).unwrap();
    let parsed = bench::read_csv(csv.as_slice()).unwrap();
    let markdown = table.to_markdown();
    let flagged_cells = markdown.matches("~ |").count();
    for r in &table.records {
        if r.stable != (r.mean_cycles_per_word <= r.min_cycles_per_word * STABILITY_BOUND)
            || r.min_cycles_per_word > r.mean_cycles_per_word
            || r.repeats != 500
        {
            return Verdict::Fail(format!(
                "record for {} at {} B is mislabelled",
                r.kernel, r.input_bytes
            ));
        }
    }
    let unstable = table.records.iter().filter(|r| !r.stable).count();
    if parsed != table.records || flagged_cells != unstable {
        return Verdict::Fail("unstable records hidden from output".into());
    }

    let fraction = table.stable_fraction();
    let noise = bench::host_noise(500);
    let detail = format!(
        "{}/{} records stable ({:.0}%, need >= {:.0}%); host noise probe mean/min {noise:.3}",
        table.records.len() - unstable,
        table.records.len(),
        fraction * 100.0,
        MIN_STABLE_FRACTION * 100.0
    );
    if fraction >= MIN_STABLE_FRACTION {
        Verdict::Pass(detail)
    } else if noise > STABILITY_BOUND {
        Verdict::Unmet(format!("{detail}; host is not idle/fixed-frequency, a register-only loop alone exceeds the bound"))
    } else {
        Verdict::Fail(detail)
    }
}

fn main() -> ExitCode {
    let criteria: [Criterion; 7] = [
        ("oracle equivalence", oracle_equivalence),
        ("carry-save adder", csa_correctness),
        ("exhaustive tables", tabulation),
        ("similarity identities", similarity_identities),
        ("performance", performance),
        ("dispatch soundness", dispatch_soundness),
        ("measurement protocol", measurement_protocol),
    ];
    println!("host features: {}", detect_cpu_features());
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let (tag, detail) = match check() {
            Verdict::Pass(d) => ("PASS", d),
            Verdict::Skip(d) => ("SKIP", d),
            Verdict::Unmet(d) => ("FAIL (precondition absent, not gating)", d),
            Verdict::Fail(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("criterion {} {name}: {tag}: {detail}", i + 1);
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criterion/criteria failed");
        ExitCode::FAILURE
    }
}
