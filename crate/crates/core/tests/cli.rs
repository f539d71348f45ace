use std::fs;
use std::path::Path;
use std::process::Command;

use rfcache::cli::main_with_args;
use rfcache::trace::{gen_synthetic, save_trace, SyntheticKind};

fn cli(args: &[&str]) -> i32 {
    main_with_args(std::iter::once("rfcache").chain(args.iter().copied()))
}

fn gen(dir: &Path, kind: &str, warps: &str, instrs: &str) -> String {
    let p = dir.join(format!("{kind}.trace"));
    let path = p.to_str().unwrap().to_string();
    assert_eq!(cli(&["gen", "--kind", kind, "--warps", warps, "--instrs", instrs, "--seed", "3", "-o", &path]), 0);
    path
}

fn read(p: impl AsRef<Path>) -> String {
    fs::read_to_string(p).unwrap()
}

#[test]
fn run_writes_reports_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let raw = gen(dir.path(), "near-reuse", "8", "100");
    let trace = dir.path().join("ann.trace").to_str().unwrap().to_string();
    assert_eq!(cli(&["annotate", &raw, "-o", &trace]), 0);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        assert_eq!(cli(&["run", &trace, "--mode", "malekeh", "--seed", "9", "-o", out.to_str().unwrap()]), 0);
    }
    for f in ["report.json", "summary.csv", "intervals.csv"] {
        assert_eq!(read(a.join(f)), read(b.join(f)), "{f}");
    }
    let report: serde_json::Value = serde_json::from_str(&read(a.join("report.json"))).unwrap();
    assert_eq!(report["config"]["seed"], 9);
    assert_eq!(report["mode"], "malekeh");
    assert!(read(a.join("summary.csv")).contains("seed"));
}

#[test]
fn baseline_runs_unannotated() {
    let dir = tempfile::tempdir().unwrap();
    let trace = gen(dir.path(), "random", "4", "30");
    let out = dir.path().join("o");
    let o = out.to_str().unwrap();
    assert_eq!(cli(&["run", &trace, "--mode", "baseline_ocu", "-o", o]), 0);
}

#[test]
fn malekeh_on_unannotated_trace_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let trace = gen(dir.path(), "random", "2", "10");
    let o = dir.path().join("o");
    assert_eq!(cli(&["run", &trace, "--mode", "malekeh", "-o", o.to_str().unwrap()]), 2);
    assert!(!o.join("report.json").exists());
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let trace = gen(dir.path(), "random", "2", "10");
    let o = dir.path().join("o");
    let o = o.to_str().unwrap();
    assert_eq!(cli(&["frobnicate"]), 1);
    assert_eq!(cli(&["run"]), 1);
    assert_eq!(cli(&["run", "/nonexistent/trace", "-o", o]), 2);
    assert_eq!(cli(&["run", &trace, "--set", "no_such_key=1", "-o", o]), 2);
    assert_eq!(cli(&["run", &trace, "--mode", "turbo", "-o", o]), 1);
    assert_eq!(cli(&["sweep", &trace, "--param", "sthld", "-o", o]), 1);
    assert_eq!(cli(&["sweep", &trace, "--param", "bogus", "--values", "1", "-o", o]), 2);
    assert_eq!(cli(&["profile", &trace, "--rthld", "0", "-o", o]), 1);
}

#[test]
fn binary_exit_status() {
    let exe = env!("CARGO_BIN_EXE_rfcache");
    let status = Command::new(exe).args(["run", "/nonexistent"]).output().unwrap().status;
    assert_eq!(status.code(), Some(2));
    let status = Command::new(exe).arg("--help").output().unwrap().status;
    assert_eq!(status.code(), Some(0));
}

#[test]
fn profile_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.trace");
    fs::write(&empty, "# nothing\n").unwrap();
    let o = dir.path().join("p");
    assert_eq!(cli(&["profile", empty.to_str().unwrap(), "-o", o.to_str().unwrap()]), 0);
    let hist = read(o.join("histogram.csv"));
    assert!(hist.lines().skip(1).all(|l| l.ends_with(",0")));
    assert_eq!(read(o.join("annotations.csv")).lines().count(), 1);

    let near = gen(dir.path(), "near-reuse", "4", "200");
    assert_eq!(cli(&["profile", &near, "-o", o.to_str().unwrap()]), 0);
    let counts: Vec<u64> = read(o.join("histogram.csv"))
        .lines()
        .skip(1)
        .map(|l| l.rsplit(',').next().unwrap().parse().unwrap())
        .collect();
    assert!(counts[..10].iter().sum::<u64>() > counts[10] + counts[11]);
}

#[test]
fn annotate_then_run() {
    let dir = tempfile::tempdir().unwrap();
    let trace = gen(dir.path(), "near-reuse", "4", "50");
    let annotated = dir.path().join("a.trace");
    assert_eq!(cli(&["annotate", &trace, "-o", annotated.to_str().unwrap()]), 0);
    assert!(read(&annotated).contains("RD:"));
    let o = dir.path().join("o");
    assert_eq!(cli(&["run", annotated.to_str().unwrap(), "--mode", "malekeh_private", "-o", o.to_str().unwrap()]), 0);
}

#[test]
fn sweep_rows_and_monotone_hit_ratio() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("near.trace");
    let t = rfcache::profiler::profile_and_annotate(&gen_synthetic(SyntheticKind::NearReuse, 16, 300, 2).unwrap(), 0.05, 12);
    save_trace(&t, &trace).unwrap();
    let o = dir.path().join("s");
    let args = ["sweep", trace.to_str().unwrap(), "--param", "sthld", "--values", "0,1,2,5,10", "-o", o.to_str().unwrap()];
    assert_eq!(cli(&args), 0);
    let csv = read(o.join("sweep.csv"));
    let mut rows = csv.lines().filter(|l| !l.starts_with('#'));
    let header: Vec<&str> = rows.next().unwrap().split(',').collect();
    let col = header.iter().position(|h| *h == "hit_ratio").unwrap();
    let hits: Vec<f64> = rows.map(|l| l.split(',').nth(col).unwrap().parse().unwrap()).collect();
    assert_eq!(hits.len(), 5);
    assert!(hits.windows(2).all(|w| w[1] >= w[0]), "{hits:?}");
}

#[test]
fn sweep_rthld_reannotates() {
    let dir = tempfile::tempdir().unwrap();
    let trace = gen(dir.path(), "near-reuse", "4", "100");
    let o = dir.path().join("s");
    let args = ["sweep", &trace, "--param", "rthld", "--values", "1,12,64", "-o", o.to_str().unwrap()];
    assert_eq!(cli(&args), 0);
    let csv = read(o.join("sweep.csv"));
    let mut rows = csv.lines().filter(|l| !l.starts_with('#'));
    let header: Vec<&str> = rows.next().unwrap().split(',').collect();
    let col = header.iter().position(|h| *h == "hit_ratio").unwrap();
    let hits: Vec<f64> = rows.map(|l| l.split(',').nth(col).unwrap().parse().unwrap()).collect();
    // rthld 1 marks everything FAR, so caching is minimal.
    assert!(hits[0] < hits[1], "{hits:?}");
}

#[test]
fn compare_baseline_only_is_all_ones() {
    let dir = tempfile::tempdir().unwrap();
    let trace = gen(dir.path(), "random", "4", "40");
    let o = dir.path().join("c");
    assert_eq!(cli(&["compare", &trace, "--modes", "baseline_ocu", "-o", o.to_str().unwrap()]), 0);
    let csv = read(o.join("compare.csv"));
    let row = csv.lines().find(|l| l.starts_with("baseline_ocu,")).unwrap();
    for v in row.split(',').skip(3) {
        assert!(v == "1.000000" || v == "NA", "{row}");
    }
    let json: serde_json::Value = serde_json::from_str(&read(o.join("compare.json"))).unwrap();
    assert!(json["config"].is_object());
}

#[test]
fn compare_matches_golden_file() {
    let dir = tempfile::tempdir().unwrap();
    let trace = gen(dir.path(), "gemm-like", "8", "200");
    let o = dir.path().join("c");
    let args = ["compare", &trace, "--modes", "baseline_ocu,malekeh,naive_gto_lru", "-o", o.to_str().unwrap()];
    assert_eq!(cli(&args), 0);
    let csv = read(o.join("compare.csv"));
    let golden = read(Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/compare_gemm.csv"));
    assert_eq!(csv, golden);

    let hit = |mode: &str| -> f64 {
        let row = csv.lines().find(|l| l.starts_with(&format!("{mode},"))).unwrap();
        row.split(',').nth(1).unwrap().parse().unwrap()
    };
    assert!(hit("malekeh") > hit("naive_gto_lru"));
    assert_eq!(hit("baseline_ocu"), 0.0);
}
