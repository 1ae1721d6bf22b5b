//! Differential self-check run by `popcount selftest`.

use std::fmt;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use crate::dispatch::{KernelId, KernelKind};
use crate::oracle::{intersection_oracle, popcount_oracle, popcount_oracle_word, union_oracle};
use crate::scalar::{self, ByteTable};
use crate::vector::{self, CpuFeatureSet, Vec256, Vec512};

const MAX_WORDS: usize = 2048;
const RANDOM_BLOCKS: usize = 200;
const CSA_TRIPLES: usize = 100_000;

#[derive(Clone, Debug)]
pub struct SelftestOptions {
    pub seed: u64,
    /// Features kernels may use; kernels needing more are skipped.
    pub features: CpuFeatureSet,
    /// Flips one entry of the byte table before checking it. Test hook.
    pub corrupt_byte_table: bool,
}

impl Default for SelftestOptions {
    fn default() -> Self {
        Self {
            seed: 0x5e1f,
            features: vector::detect_cpu_features(),
            corrupt_byte_table: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Outcome {
    Pass,
    Fail(String),
    Skipped(String),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Check {
    pub name: String,
    pub outcome: Outcome,
}

#[derive(Clone, Debug, Default)]
pub struct SelftestReport {
    pub checks: Vec<Check>,
}

impl SelftestReport {
    pub fn passed(&self) -> bool {
        !self
            .checks
            .iter()
            .any(|c| matches!(c.outcome, Outcome::Fail(_)))
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks
            .iter()
            .filter(|c| matches!(c.outcome, Outcome::Fail(_)))
    }

    pub fn get(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    fn push(&mut self, name: impl Into<String>, outcome: Outcome) {
        self.checks.push(Check {
            name: name.into(),
            outcome,
        });
    }
}

impl fmt::Display for SelftestReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            match &c.outcome {
                Outcome::Pass => writeln!(f, "pass     {}", c.name)?,
                Outcome::Fail(why) => writeln!(f, "FAIL     {}: {why}", c.name)?,
                Outcome::Skipped(why) => writeln!(f, "skipped  {} ({why})", c.name)?,
            }
        }
        let failed = self.failures().count();
        if failed == 0 {
            write!(f, "all checks passed")
        } else {
            write!(f, "{failed} check(s) failed")
        }
    }
}

fn check_all<T>(
    items: impl IntoIterator<Item = T>,
    mut bad: impl FnMut(&T) -> Option<String>,
) -> Outcome {
    for item in items {
        if let Some(why) = bad(&item) {
            return Outcome::Fail(why);
        }
    }
    Outcome::Pass
}

fn random_words(rng: &mut StdRng, n: usize) -> Vec<u64> {
    (0..n).map(|_| rng.gen()).collect()
}

pub fn run_selftest(options: &SelftestOptions) -> SelftestReport {
    let mut report = SelftestReport::default();
    let mut rng = StdRng::seed_from_u64(options.seed);

    let mut byte_table: ByteTable = scalar::tables().0.clone();
    if options.corrupt_byte_table {
        byte_table.0[0x5a] ^= 1;
    }
    report.push(
        "table8",
        check_all(0..=255u64, |&b| {
            let got = scalar::table8_count_with(&byte_table, &[b]);
            (got != popcount_oracle_word(b)).then(|| format!("entry {b:#04x} holds {got}"))
        }),
    );
    let short = &scalar::tables().1;
    report.push(
        "table16",
        check_all(0..=0xffffu64, |&v| {
            (short.count_word(v) != popcount_oracle_word(v)).then(|| format!("entry {v:#06x}"))
        }),
    );

    report.push(
        "csa truth table",
        check_all(0..8u64, |&row| {
            let (a, b, c) = (row >> 2 & 1, row >> 1 & 1, row & 1);
            let s = scalar::csa64(a, b, c);
            let sum = a + b + c;
            (s.high != sum >> 1 || s.low != sum & 1).then(|| format!("row {a}{b}{c}"))
        }),
    );
    let triples: Vec<[u64; 3]> = (0..CSA_TRIPLES).map(|_| rng.gen()).collect();
    report.push(
        "csa conservation",
        check_all(&triples, |&&[a, b, c]| {
            let s = scalar::csa64(a, b, c);
            let lhs = 2 * popcount_oracle_word(s.high) + popcount_oracle_word(s.low);
            let rhs = popcount_oracle_word(a) + popcount_oracle_word(b) + popcount_oracle_word(c);
            (lhs != rhs).then(|| format!("({a:#x}, {b:#x}, {c:#x})"))
        }),
    );
    report.push(
        "csa lanes",
        check_all(triples.chunks_exact(8).take(2000), |chunk| {
            let lanes = |i: usize| -> [u64; 8] { std::array::from_fn(|l| chunk[l][i]) };
            let (a, b, c) = (lanes(0), lanes(1), lanes(2));
            let four = |x: [u64; 8]| Vec256::from_u64s([x[0], x[1], x[2], x[3]]);
            let (h4, l4) = vector::csa256(four(a), four(b), four(c));
            let (h8, l8) = vector::csa512(
                Vec512::from_u64s(a),
                Vec512::from_u64s(b),
                Vec512::from_u64s(c),
            );
            (0..8).find_map(|l| {
                let s = scalar::csa64(a[l], b[l], c[l]);
                let ok8 = h8.u64s()[l] == s.high && l8.u64s()[l] == s.low;
                let ok4 = l >= 4 || (h4.u64s()[l] == s.high && l4.u64s()[l] == s.low);
                (!(ok4 && ok8)).then(|| format!("lane {l}"))
            })
        }),
    );

    // one shared set of blocks for every kernel
    let mut blocks: Vec<Vec<u64>> = vec![Vec::new(), vec![u64::MAX; MAX_WORDS]];
    blocks.extend((0..RANDOM_BLOCKS).map(|_| {
        let n = rng.gen_range(0..=MAX_WORDS);
        random_words(&mut rng, n)
    }));
    let pairs: Vec<(Vec<u64>, Vec<u64>)> = blocks
        .iter()
        .map(|a| {
            let b = random_words(&mut rng, a.len());
            (a.clone(), b)
        })
        .collect();

    for id in KernelId::ALL {
        let required = id.required_features();
        if !options.features.contains(&required) {
            report.push(id.name(), Outcome::Skipped("feature absent".into()));
            continue;
        }
        let outcome = match id.kind() {
            KernelKind::Count => check_all(&blocks, |w| match id.count(w) {
                Ok(n) if n == popcount_oracle(w) => None,
                Ok(n) => Some(format!(
                    "{} words: got {n}, expected {}",
                    w.len(),
                    popcount_oracle(w)
                )),
                Err(e) => Some(e.to_string()),
            }),
            KernelKind::Jaccard => check_all(&pairs, |(a, b)| {
                let want = (intersection_oracle(a, b), union_oracle(a, b));
                match id.jaccard_counts(a, b) {
                    Ok(got) if got == want => None,
                    Ok(got) => Some(format!("{} words: got {got:?}, expected {want:?}", a.len())),
                    Err(e) => Some(e.to_string()),
                }
            }),
        };
        report.push(id.name(), outcome);
    }
    report
}
