use std::io;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use popcount_core::bench::{self, BenchConfig, OutputFormat};
use popcount_core::selftest::{run_selftest, SelftestOptions};
use popcount_core::{Dispatcher, KernelKind, Result, WordBlock};

#[derive(Parser)]
#[command(
    name = "popcount",
    version,
    about = "Population counts and bitset similarity"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Md,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Count,
    Jaccard,
}

#[derive(Subcommand)]
enum Command {
    /// Time kernels over a ladder of input sizes.
    Bench {
        /// Kernel to include; repeat for several. Defaults to the standard set.
        #[arg(long = "kernel")]
        kernels: Vec<String>,
        /// Comma-separated sizes in bytes (suffix k for KiB).
        #[arg(long, value_delimiter = ',', value_parser = parse_size)]
        sizes: Option<Vec<usize>>,
        #[arg(long, default_value_t = bench::DEFAULT_REPEATS)]
        repeats: u32,
        #[arg(long, value_enum, default_value = "md")]
        format: Format,
        #[arg(long, default_value_t = bench::DEFAULT_SEED)]
        seed: u64,
        #[arg(long, value_enum, default_value = "count")]
        mode: Mode,
    },
    /// Count the one-bits of a raw little-endian file.
    Count {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        kernel: Option<String>,
    },
    /// Intersection, union and Jaccard index of two raw files.
    Jaccard {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        #[arg(long)]
        kernel: Option<String>,
    },
    /// Check every runnable kernel against the reference count.
    Selftest {
        #[arg(long, default_value_t = 0x5e1f)]
        seed: u64,
        #[arg(long, hide = true)]
        corrupt_table8: bool,
    },
    /// Measure crossovers and suggest dispatch thresholds for this host.
    Calibrate {
        #[arg(long, value_delimiter = ',', value_parser = parse_size)]
        sizes: Option<Vec<usize>>,
        #[arg(long, default_value_t = bench::DEFAULT_REPEATS)]
        repeats: u32,
        #[arg(long, default_value_t = bench::DEFAULT_SEED)]
        seed: u64,
    },
}

fn parse_size(s: &str) -> std::result::Result<usize, String> {
    bench::parse_size(s).map_err(|e| e.to_string())
}

fn run(command: Command) -> Result<bool> {
    let dispatcher = Dispatcher::global();
    if let Some(e) = dispatcher.override_error() {
        eprintln!("warning: ignoring kernel override: {e}");
    }
    match command {
        Command::Bench {
            kernels,
            sizes,
            repeats,
            format,
            seed,
            mode,
        } => {
            let config = BenchConfig {
                sizes: sizes.unwrap_or_else(bench::default_sizes),
                repeats,
                kernels: (!kernels.is_empty()).then_some(kernels),
                format: match format {
                    Format::Csv => OutputFormat::Csv,
                    Format::Md => OutputFormat::Markdown,
                },
                mode: match mode {
                    Mode::Count => KernelKind::Count,
                    Mode::Jaccard => KernelKind::Jaccard,
                },
                seed,
            };
            let table = bench::run_bench(&config, dispatcher)?;
            match config.format {
                OutputFormat::Csv => table.write_csv(io::stdout().lock())?,
                OutputFormat::Markdown => print!("{}", table.to_markdown()),
            }
            let unstable = table.records.iter().filter(|r| !r.stable).count();
            if unstable > 0 {
                eprintln!(
                    "warning: {unstable} of {} records unstable (host noise mean/min {:.3})",
                    table.records.len(),
                    bench::host_noise(config.repeats)
                );
            }
        }
        Command::Count { input, kernel } => {
            let words = WordBlock::read_file(input)?;
            println!("{}", dispatcher.count(&words, kernel.as_deref())?);
        }
        Command::Jaccard { a, b, kernel } => {
            let a = WordBlock::read_file(a)?;
            let b = WordBlock::read_file(b)?;
            let r = dispatcher.jaccard(&a, &b, kernel.as_deref())?;
            println!("intersection {}", r.intersection_count);
            println!("union {}", r.union_count);
            println!("jaccard {:.6}", r.jaccard);
        }
        Command::Selftest {
            seed,
            corrupt_table8,
        } => {
            let options = SelftestOptions {
                seed,
                features: dispatcher.features(),
                corrupt_byte_table: corrupt_table8,
            };
            let report = run_selftest(&options);
            println!("{report}");
            return Ok(report.passed());
        }
        Command::Calibrate {
            sizes,
            repeats,
            seed,
        } => {
            let sizes = sizes.unwrap_or_else(bench::default_sizes);
            let report = bench::calibrate(dispatcher, &sizes, repeats, seed)?;
            print!("{}", report.to_text());
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
