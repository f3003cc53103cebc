use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_rpcpd"));
    c.env_remove("RPCPD_NULL_CACHE");
    c
}

fn run(dir: &Path, args: &[&str]) -> Output {
    bin().current_dir(dir).args(args).output().expect("spawn rpcpd")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

/// 50 x 101 noiseless step: zeros then fives after row 25.
fn write_step(dir: &Path, header: bool) -> PathBuf {
    let mut s = String::new();
    if header {
        let names: Vec<String> = (1..=101).map(|j| format!("x{j}")).collect();
        s.push_str(&names.join(","));
        s.push('\n');
    }
    for t in 0..50 {
        let v = if t < 25 { "0" } else { "5" };
        s.push_str(&vec![v; 101].join(","));
        s.push('\n');
    }
    let p = dir.join(if header { "step_h.csv" } else { "step.csv" });
    std::fs::write(&p, s).unwrap();
    p
}

fn kv(out: &str, key: &str) -> Option<String> {
    out.lines()
        .find_map(|l| l.strip_prefix(&format!("{key}=")).map(str::to_string))
}

#[test]
fn detect_strong_signal_exits_two() {
    let d = TempDir::new().unwrap();
    write_step(d.path(), false);
    let o = run(d.path(), &["detect", "step.csv", "--seed", "3"]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
    assert_eq!(kv(&stdout(&o), "z_hat").as_deref(), Some("25"));
    assert_eq!(kv(&stdout(&o), "significant").as_deref(), Some("true"));
}

#[test]
fn detect_null_exits_zero_and_csv_format() {
    let d = TempDir::new().unwrap();
    let mut s = String::new();
    for t in 0..40u64 {
        let row: Vec<String> = (0..6u64).map(|j| format!("{}", ((t * 7919 + j * 104729) % 97) as f64 / 97.0)).collect();
        s.push_str(&row.join(","));
        s.push('\n');
    }
    std::fs::write(d.path().join("noise.csv"), s).unwrap();
    let o = run(d.path(), &["detect", "noise.csv", "--alpha", "1e-9", "--format", "csv"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.starts_with("n,p,k,variant,method,p_comb"));
    assert_eq!(out.lines().count(), 2);
}

#[test]
fn header_flag_gives_identical_result() {
    let d = TempDir::new().unwrap();
    write_step(d.path(), false);
    write_step(d.path(), true);
    let a = run(d.path(), &["detect", "step.csv", "--method", "bh"]);
    let b = run(d.path(), &["detect", "step_h.csv", "--header", "--method", "bh"]);
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(code(&a), code(&b));
}

#[test]
fn empty_and_malformed_inputs_exit_one() {
    let d = TempDir::new().unwrap();
    std::fs::write(d.path().join("empty.csv"), "").unwrap();
    let o = run(d.path(), &["detect", "empty.csv"]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("no rows"), "{}", stderr(&o));

    std::fs::write(d.path().join("bad.csv"), "1,2\n3,oops\n5,6\n7,8\n").unwrap();
    let o = run(d.path(), &["detect", "bad.csv"]);
    assert_eq!(code(&o), 1);
    let e = stderr(&o);
    assert!(e.contains("row 2") && e.contains("column 2"), "{e}");

    std::fs::write(d.path().join("ragged.csv"), "1,2\n3\n5,6\n7,8\n").unwrap();
    let o = run(d.path(), &["detect", "ragged.csv"]);
    assert_eq!(code(&o), 1);

    let o = run(d.path(), &["detect", "missing.csv"]);
    assert_eq!(code(&o), 1);

    let o = run(d.path(), &["detect", "empty.csv", "--method", "nope"]);
    assert_eq!(code(&o), 1);
}

#[test]
fn repeat_mode_histogram_and_labels() {
    let d = TempDir::new().unwrap();
    write_step(d.path(), false);
    let o = run(
        d.path(),
        &["repeat", "step.csv", "--reps", "100", "--k", "20", "--labels", "1910..1959"],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let out = stdout(&o);
    assert_eq!(kv(&out, "mode").as_deref(), Some("25"));
    assert_eq!(kv(&out, "mode_count").as_deref(), Some("100"));
    assert_eq!(kv(&out, "mode_label").as_deref(), Some("1934"));
    let h = std::fs::read_to_string(d.path().join("histogram.csv")).unwrap();
    assert_eq!(h, "location,count\n25,100\n");

    let o = run(d.path(), &["repeat", "step.csv", "--reps", "1", "--histogram", "one.csv"]);
    assert_eq!(code(&o), 0);
    let h = std::fs::read_to_string(d.path().join("one.csv")).unwrap();
    assert_eq!(h.lines().count(), 2);

    let o = run(d.path(), &["repeat", "step.csv", "--reps", "3", "--labels", "1900..1910"]);
    assert_eq!(code(&o), 1);
}

fn daily(dir: &Path) -> PathBuf {
    use std::fmt::Write;
    let mut s = String::from("date,value\n");
    let mut day = 0u32;
    for year in 2019..=2022 {
        for month in 1..=12u32 {
            let days = match month {
                2 if year % 4 == 0 => 29,
                2 => 28,
                4 | 6 | 9 | 11 => 30,
                _ => 31,
            };
            for dd in 1..=days {
                day += 1;
                // 2021 loses one day
                if year == 2021 && month == 7 && dd == 4 {
                    continue;
                }
                writeln!(s, "{year}-{month:02}-{dd:02},{}", day as f64 / 10.0).unwrap();
            }
        }
    }
    let p = dir.join("station.csv");
    std::fs::write(&p, s).unwrap();
    p
}

#[test]
fn reshape_yearly_pipeline() {
    let d = TempDir::new().unwrap();
    daily(d.path());
    let o = run(d.path(), &["reshape-yearly", "station.csv", "-o", "yearly.csv"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let e = stderr(&o);
    assert!(e.contains("2021"), "{e}");
    // 2021 excluded; 2019-2020 is the longest (earliest) complete block
    assert_eq!(kv(&stdout(&o), "first_year").as_deref(), Some("2019"));
    assert_eq!(kv(&stdout(&o), "years").as_deref(), Some("2"));
    let text = std::fs::read_to_string(d.path().join("yearly.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "# station: station");
    assert_eq!(lines[1].split(',').count(), 366);
    assert!(lines[3].starts_with("2020,"));

    let o = run(d.path(), &["reshape-yearly", "station.csv", "-o", "filled.csv", "--interpolate"]);
    assert_eq!(code(&o), 0);
    assert_eq!(kv(&stdout(&o), "years").as_deref(), Some("4"));

    // yearly input feeds detect and repeat directly
    let o = run(d.path(), &["repeat", "filled.csv", "--yearly", "--reps", "5", "--k", "10"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let label: i32 = kv(&stdout(&o), "mode_label").unwrap().parse().unwrap();
    assert!((2019..=2022).contains(&label));

    let mut dup = std::fs::read_to_string(d.path().join("station.csv")).unwrap();
    dup.push_str("2019-01-01,0\n");
    std::fs::write(d.path().join("dup.csv"), dup).unwrap();
    let o = run(d.path(), &["reshape-yearly", "dup.csv", "-o", "x.csv"]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("duplicated"));
}

const SPEC: &str = r#"
name = "small"
seed = 5
replications = 30
metrics = ["size", "adj_power", "rmse"]
snr_grid = [0.0, 1.0]
k_grid = [10, 40]
methods = ["bonf", "bh"]
"#;

#[test]
fn simulate_writes_deterministic_tables() {
    let d = TempDir::new().unwrap();
    std::fs::write(d.path().join("spec.toml"), SPEC).unwrap();
    let o = run(d.path(), &["simulate", "spec.toml", "--out", "a"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let o = run(d.path(), &["simulate", "spec.toml", "--out", "b"]);
    assert_eq!(code(&o), 0);
    for f in ["small.csv", "small.json"] {
        let a = std::fs::read(d.path().join("a").join(f)).unwrap();
        let b = std::fs::read(d.path().join("b").join(f)).unwrap();
        assert_eq!(a, b, "{f} differs between runs");
    }
    let csv = std::fs::read_to_string(d.path().join("a/small.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 2 * 2 * 2);
    let json = std::fs::read_to_string(d.path().join("a/small.json")).unwrap();
    assert!(json.contains("\"master_seed\": 5"));

    // --seed overrides the spec seed
    let o = run(d.path(), &["simulate", "spec.toml", "--out", "c", "--seed", "6"]);
    assert_eq!(code(&o), 0);
    let c = std::fs::read_to_string(d.path().join("c/small.json")).unwrap();
    assert!(c.contains("\"master_seed\": 6"));
}

#[test]
fn simulate_rejects_unknown_keys_and_handles_one_replication() {
    let d = TempDir::new().unwrap();
    std::fs::write(d.path().join("typo.toml"), "replicatons = 3\nk_gird = [1]\n").unwrap();
    let o = run(d.path(), &["simulate", "typo.toml"]);
    assert_eq!(code(&o), 1);
    let e = stderr(&o);
    assert!(e.contains("replicatons") && e.contains("k_gird"), "{e}");

    std::fs::write(d.path().join("one.toml"), "name = \"one\"\nreplications = 1\nk_grid = [10]\n").unwrap();
    let o = run(d.path(), &["simulate", "one.toml"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let csv = std::fs::read_to_string(d.path().join("one.csv")).unwrap();
    let header: Vec<&str> = csv.lines().next().unwrap().split(',').collect();
    let row: Vec<&str> = csv.lines().nth(1).unwrap().split(',').collect();
    let col = header.iter().position(|h| *h == "mc_stderr").unwrap();
    assert_eq!(row[col], "0");
}

#[test]
fn shipped_null_rates_spec_parses() {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/specs/null_rates.toml");
    let spec = rpcpd::harness::ExperimentSpec::from_path(Path::new(path)).unwrap();
    assert_eq!(spec.replications, 1000);
    assert_eq!(spec.k_grid, vec![200]);
    assert_eq!(spec.settings.len(), 3);
}

#[test]
fn nulldist_cache_and_errors() {
    let d = TempDir::new().unwrap();
    let args = [
        "nulldist",
        "--replications",
        "1000",
        "--increments",
        "200",
        "--null-cache",
        "cache",
    ];
    let o = run(d.path(), &args);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let first = stdout(&o);
    assert!(first.contains("wrote"));
    let q95: f64 = kv(&first, "q0.95").unwrap().parse().unwrap();
    assert!((q95 - 1.358).abs() < 0.1, "{q95}");
    let files: Vec<_> = std::fs::read_dir(d.path().join("cache")).unwrap().collect();
    assert_eq!(files.len(), 1);
    let cached = std::fs::read(files[0].as_ref().unwrap().path()).unwrap();

    let o = run(d.path(), &args);
    assert!(stdout(&o).contains("cache hit"));
    let o = run(d.path(), &[&args[..], &["--force"]].concat());
    assert!(stdout(&o).contains("wrote"));
    let again = std::fs::read(files[0].as_ref().unwrap().path()).unwrap();
    assert_eq!(cached, again);

    let o = run(d.path(), &["nulldist", "--variant", "weighted", "--trim-fraction", "0"]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("trim"));
}

#[test]
fn generate_is_deterministic() {
    let d = TempDir::new().unwrap();
    let args = ["generate", "--snr", "1", "--seed", "8", "-o", "g.csv"];
    let o = run(d.path(), &args);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(kv(&stdout(&o), "true_z").as_deref(), Some("12"));
    let a = std::fs::read(d.path().join("g.csv")).unwrap();
    let meta = std::fs::read_to_string(d.path().join("g.csv.json")).unwrap();
    run(d.path(), &args);
    assert_eq!(a, std::fs::read(d.path().join("g.csv")).unwrap());
    assert_eq!(meta, std::fs::read_to_string(d.path().join("g.csv.json")).unwrap());
    assert!(meta.contains("\"true_z\": 12"));

    let o = run(d.path(), &["detect", "g.csv", "--seed", "1", "--per-projection", "pp.csv", "--k", "15"]);
    assert!(code(&o) == 0 || code(&o) == 2);
    let pp = std::fs::read_to_string(d.path().join("pp.csv")).unwrap();
    assert_eq!(pp.lines().count(), 16);
}
