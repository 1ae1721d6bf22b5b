use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use popcount_core::bench::{read_csv, TimerKind};
use tempfile::TempDir;

fn popcount(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_popcount"))
        .args(args)
        .env_remove("POPCOUNT_KERNEL")
        .env_remove("POPCOUNT_JACCARD_KERNEL")
        .output()
        .expect("spawn popcount")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn file(dir: &TempDir, name: &str, bytes: &[u8]) -> PathBuf {
    let p = dir.path().join(name);
    fs::write(&p, bytes).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn count_padded_file() {
    let dir = TempDir::new().unwrap();
    let f = file(&dir, "a.bin", &[0xAA, 0x00]);
    let o = popcount(&["count", "--input", s(&f)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(stdout(&o).trim(), "4");
}

#[test]
fn count_empty_file() {
    let dir = TempDir::new().unwrap();
    let f = file(&dir, "e.bin", &[]);
    assert_eq!(stdout(&popcount(&["count", "--input", s(&f)])).trim(), "0");
}

#[test]
fn forced_kernel_agrees_with_default() {
    let dir = TempDir::new().unwrap();
    let bytes: Vec<u8> = (0..5000u32)
        .map(|i| (i.wrapping_mul(2_654_435_761) >> 13) as u8)
        .collect();
    let f = file(&dir, "r.bin", &bytes);
    let expected: u32 = bytes.iter().map(|b| b.count_ones()).sum();
    let default = stdout(&popcount(&["count", "--input", s(&f)]));
    assert_eq!(default.trim(), expected.to_string());
    for k in [
        "wwg",
        "lauradoux",
        "harley-seal",
        "table16",
        "avx2-hs-portable",
    ] {
        let o = popcount(&["count", "--input", s(&f), "--kernel", k]);
        assert!(o.status.success(), "{k}: {}", stderr(&o));
        assert_eq!(stdout(&o), default, "{k}");
    }
}

#[test]
fn count_errors() {
    let dir = TempDir::new().unwrap();
    let f = file(&dir, "a.bin", &[1]);
    let o = popcount(&["count", "--input", s(&f), "--kernel", "bogus"]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("bogus"));
    let o = popcount(&["count", "--input", s(&dir.path().join("missing.bin"))]);
    assert!(!o.status.success());
    assert!(stderr(&o).starts_with("error:"));
}

#[test]
fn jaccard_files() {
    let dir = TempDir::new().unwrap();
    let a = file(&dir, "a.bin", &[0xF0]);
    let b = file(&dir, "b.bin", &[0xAA]);
    let o = popcount(&["jaccard", "--a", s(&a), "--b", s(&b)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(stdout(&o), "intersection 2\nunion 6\njaccard 0.333333\n");

    let o = popcount(&[
        "jaccard",
        "--a",
        s(&a),
        "--b",
        s(&a),
        "--kernel",
        "jaccard-wwg",
    ]);
    assert!(stdout(&o).ends_with("jaccard 1.000000\n"));

    let long = file(&dir, "long.bin", &[0xF0; 9]);
    let o = popcount(&["jaccard", "--a", s(&a), "--b", s(&long)]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("length"), "{}", stderr(&o));
}

#[test]
fn selftest_exit_status() {
    let o = popcount(&["selftest"]);
    assert!(o.status.success(), "{}", stdout(&o));
    assert!(stdout(&o).contains("all checks passed"));

    let o = popcount(&["selftest", "--corrupt-table8"]);
    assert!(!o.status.success());
    let out = stdout(&o);
    assert!(out.contains("FAIL     table8"), "{out}");
    assert_eq!(out.matches("FAIL").count(), 1);
}

#[test]
fn bench_csv_round_trips() {
    let o = popcount(&[
        "bench",
        "--format",
        "csv",
        "--sizes",
        "256,1k,100",
        "--repeats",
        "5",
        "--kernel",
        "wwg",
        "--kernel",
        "harley-seal",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.starts_with(
        "kernel,bytes,repeats,min_cycles_per_word,mean_cycles_per_word,timer_kind,stable\n"
    ));
    let records = read_csv(text.as_bytes()).unwrap();
    assert_eq!(records.len(), 6);
    let bytes: Vec<usize> = records.iter().map(|r| r.input_bytes).collect();
    assert_eq!(bytes, [256, 256, 1024, 1024, 104, 104]);
    for r in &records {
        assert_eq!(r.repeats, 5);
        assert!(r.min_cycles_per_word <= r.mean_cycles_per_word);
        assert_eq!(r.timer_kind, TimerKind::detect());
    }
    let mut again = Vec::new();
    popcount_core::bench::write_csv(&records, &mut again).unwrap();
    assert_eq!(String::from_utf8(again).unwrap(), text);
}

#[test]
fn bench_markdown_layout() {
    let o = popcount(&[
        "bench",
        "--sizes",
        "256,512",
        "--repeats",
        "3",
        "--kernel",
        "wwg",
        "--kernel",
        "lauradoux",
    ]);
    let text = stdout(&o);
    assert!(text.contains("| array size | wwg | lauradoux |"), "{text}");
    assert!(text.contains("| 256 B |"));
    assert!(text.contains("| 512 B |"));
    assert_eq!(text.matches("**").count(), 4, "one bold cell per row");

    let o = popcount(&[
        "bench",
        "--mode",
        "jaccard",
        "--sizes",
        "256",
        "--repeats",
        "3",
        "--kernel",
        "jaccard-wwg",
    ]);
    assert!(stdout(&o).contains("per word-pair"));
}

#[test]
fn bench_rejects_bad_input() {
    assert!(!popcount(&["bench", "--repeats", "0", "--sizes", "256"])
        .status
        .success());
    assert!(!popcount(&["bench", "--sizes", "0"]).status.success());
    assert!(
        !popcount(&["bench", "--sizes", "256", "--kernel", "jaccard-wwg"])
            .status
            .success()
    );
}

#[test]
fn calibrate_reports_thresholds() {
    let o = popcount(&["calibrate", "--sizes", "256,1k,4k", "--repeats", "3"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("recommended thresholds:"));
    assert!(text.contains("count_vector_min_bytes"));
    assert!(text.contains("fastest at"));
}

#[test]
fn environment_override() {
    let dir = TempDir::new().unwrap();
    let f = file(&dir, "a.bin", &[0xFF; 24]);
    let run = |var: &str, value: &str| {
        Command::new(env!("CARGO_BIN_EXE_popcount"))
            .args(["count", "--input", s(&f)])
            .env(var, value)
            .output()
            .unwrap()
    };
    let o = run("POPCOUNT_KERNEL", "wegner");
    assert_eq!(stdout(&o).trim(), "192");
    assert!(stderr(&o).is_empty());
    let o = run("POPCOUNT_KERNEL", "nonsense");
    assert!(o.status.success());
    assert_eq!(stdout(&o).trim(), "192");
    assert!(stderr(&o).contains("warning: ignoring kernel override"));
}
