use std::fs;

use assert_cmd::Command;
use tempfile::tempdir;

fn mmwsim() -> Command {
    Command::cargo_bin("mmwsim").unwrap()
}

#[test]
fn simulate_writes_trace_and_events() {
    let dir = tempdir().unwrap();
    mmwsim()
        .args(["simulate", "bundled:los-short", "--out"])
        .arg(dir.path())
        .assert()
        .success();
    let trace = fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    let mut lines = trace.lines();
    assert_eq!(
        lines.next().unwrap(),
        "t,x,y,z,gnb,txbeam,subarr,rxbeam,snr_db,fsnr_db,mcs,dl_mbps,ul_mbps,event"
    );
    assert_eq!(lines.count(), 501);
    let events = fs::read_to_string(dir.path().join("events.log")).unwrap();
    assert!(events.starts_with("t=0.000 Acquired from=- to=0/"), "{events}");
}

#[test]
fn simulate_is_byte_deterministic() {
    let (a, b) = (tempdir().unwrap(), tempdir().unwrap());
    for d in [&a, &b] {
        mmwsim()
            .args(["simulate", "bundled:fig6b", "--seed", "9", "--out"])
            .arg(d.path())
            .assert()
            .success();
    }
    let read = |d: &tempfile::TempDir| fs::read(d.path().join("trace.csv")).unwrap();
    assert_eq!(read(&a), read(&b));
}

#[test]
fn json_format_and_timestep_override() {
    let dir = tempdir().unwrap();
    mmwsim()
        .args(["--format", "json", "--timestep", "20", "simulate", "bundled:los-short", "--out"])
        .arg(dir.path())
        .assert()
        .success();
    let trace = fs::read_to_string(dir.path().join("trace.jsonl")).unwrap();
    assert_eq!(trace.lines().count(), 251);
    let first: serde_json::Value = serde_json::from_str(trace.lines().next().unwrap()).unwrap();
    assert_eq!(first["t"], 0.0);
    assert!(dir.path().join("events.jsonl").exists());
}

#[test]
fn coverage_rows_match_grid() {
    let dir = tempdir().unwrap();
    mmwsim()
        .args(["coverage", "bundled:indoor-floor", "--step", "5", "--out"])
        .arg(dir.path())
        .assert()
        .success();
    let text = fs::read_to_string(dir.path().join("coverage.csv")).unwrap();
    assert_eq!(text.lines().next().unwrap(), "x,y,se_bpshz,best_gnb");
    assert_eq!(text.lines().count(), 13 * 7 + 1);
}

#[test]
fn fit_recovers_synthetic_exponent() {
    let dir = tempdir().unwrap();
    mmwsim()
        .args(["fit", "--synthetic", "2000", "--use-case", "outdoor-open", "--link", "nlos", "--format", "json"])
        .arg("--out")
        .arg(dir.path())
        .assert()
        .success();
    let v: serde_json::Value =
        serde_json::from_str(fs::read_to_string(dir.path().join("fit.jsonl")).unwrap().trim()).unwrap();
    assert_eq!(v["n"], 2000);
    assert!(v["alpha"].as_f64().unwrap() > 2.0);
}

#[test]
fn fit_reads_csv_input() {
    let dir = tempdir().unwrap();
    let input = dir.path().join("pl.csv");
    // exactly 2.0 per decade above free space at 29 GHz
    let fspl = 20.0 * (4.0 * std::f64::consts::PI * 29e9 / 299_792_458.0f64).log10();
    let rows: String = [1.0f64, 10.0, 100.0]
        .iter()
        .map(|d| format!("{d},{}\n", fspl + 20.0 * d.log10()))
        .collect();
    fs::write(&input, format!("distance_m,pl_db\n{rows}")).unwrap();
    mmwsim()
        .args(["fit", "--input"])
        .arg(&input)
        .arg("--out")
        .arg(dir.path())
        .assert()
        .success()
        .stdout(predicates::str::contains("alpha = 2.0000"));
}

#[test]
fn codebook_exports_default_table() {
    let dir = tempdir().unwrap();
    mmwsim()
        .args(["codebook", "--levels", "2", "--out"])
        .arg(dir.path())
        .assert()
        .success();
    let text = fs::read_to_string(dir.path().join("codebook_default.txt")).unwrap();
    assert!(text.starts_with("# rows=8 cols=16") || text.starts_with("# rows=16 cols=8"), "{}", &text[..40]);
}

#[test]
fn validation_errors_exit_1() {
    let dir = tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "use_case = \"outdoor_open\"\nworld = { min = [0, 0, 0], max = [1, 1, 1] }\n[ue]\nwaypoints = [[0.5, 0.5, 0.5]]\n").unwrap();
    mmwsim()
        .arg("simulate")
        .arg(&bad)
        .assert()
        .code(1)
        .stderr(predicates::str::contains("gnb"));
    mmwsim().args(["simulate", "bundled:nope"]).assert().code(1);
    mmwsim().args(["simulate", "bundled:los-short", "--timestep", "-1"]).assert().code(1);
    mmwsim().args(["frobnicate"]).assert().code(1);
    mmwsim().args(["fit"]).assert().code(1);
}

#[test]
fn runtime_errors_exit_2() {
    let dir = tempdir().unwrap();
    // a regular file where the output directory should be
    let blocker = dir.path().join("occupied");
    fs::write(&blocker, "").unwrap();
    mmwsim()
        .args(["simulate", "bundled:los-short", "--out"])
        .arg(&blocker)
        .assert()
        .code(2);
    mmwsim()
        .arg("simulate")
        .arg(dir.path().join("missing.toml"))
        .assert()
        .code(2);
}

#[test]
fn help_exits_0() {
    mmwsim().arg("--help").assert().success();
}
