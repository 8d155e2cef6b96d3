use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn qlll(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qlll"))
        .args(args)
        .env_remove("QLLL_MAX_QUBITS")
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!(
            "stdout is not JSON ({e}): {}\nstderr: {}",
            String::from_utf8_lossy(&out.stdout),
            String::from_utf8_lossy(&out.stderr)
        )
    })
}

fn write(dir: &TempDir, name: &str, contents: &str) -> PathBuf {
    let path = dir.path().join(name);
    fs::write(&path, contents).unwrap();
    path
}

fn gen(dir: &TempDir, name: &str, args: &[&str]) -> PathBuf {
    let path = dir.path().join(name);
    let mut all = vec!["gen"];
    all.extend_from_slice(args);
    all.extend_from_slice(&["--out", path.to_str().unwrap()]);
    let out = qlll(&all);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const SINGLE_QUARTER: &str = r#"{"n": 2, "flaws": [{"id": "f", "support": [0, 1],
  "projector": [[[0,0],[0,0],[0,0],[0,0]],[[0,0],[0,0],[0,0],[0,0]],
                [[0,0],[0,0],[0,0],[0,0]],[[0,0],[0,0],[0,0],[1,0]]]}]}"#;

const TWO_HALVES: &str = r#"{"n": 2, "flaws": [
  {"id": "a", "support": [0], "projector": [[[0,0],[0,0]],[[0,0],[1,0]]]},
  {"id": "b", "support": [0, 1], "projector": [[[1,0],[0,0],[0,0],[0,0]],[[0,0],[1,0],[0,0],[0,0]],
                [[0,0],[0,0],[0,0],[0,0]],[[0,0],[0,0],[0,0],[0,0]]]}]}"#;

const ONE_AND_PLUS: &str = r#"{"n": 1, "flaws": [
  {"id": "one", "support": [0], "projector": [[[0,0],[0,0]],[[0,0],[1,0]]]},
  {"id": "plus", "support": [0], "projector": [[[0.5,0],[0.5,0]],[[0.5,0],[0.5,0]]]}]}"#;

#[test]
fn check_single_flaw_satisfies_everything() {
    let dir = TempDir::new().unwrap();
    let path = write(&dir, "single.json", SINGLE_QUARTER);
    let out = qlll(&["check", s(&path)]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert!(v["reports"]
        .as_array()
        .unwrap()
        .iter()
        .all(|r| r["satisfied"] == true));
    assert_eq!(v["implications_consistent"], true);
}

#[test]
fn check_two_adjacent_halves_fails_shearer() {
    let dir = TempDir::new().unwrap();
    let path = write(&dir, "halves.json", TWO_HALVES);
    let out = qlll(&["check", s(&path)]);
    assert_eq!(out.status.code(), Some(1));
    let v = json(&out);
    assert_eq!(v["shearer_satisfied"], false);
}

#[test]
fn check_appendix_e_reports_shearer() {
    let dir = TempDir::new().unwrap();
    let path = gen(&dir, "e.json", &["appendix-e"]);
    let v = json(&qlll(&["check", s(&path)]));
    assert_eq!(v["reports"][3]["condition"], "SHC");
    assert!(v["reports"][3]["q_values"].is_array());
}

#[test]
fn malformed_input_exits_with_two() {
    let dir = TempDir::new().unwrap();
    let broken = write(&dir, "broken.json", "{\"n\": 1,\n \"flaws\": [ }");
    let out = qlll(&["check", s(&broken)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));

    let not_projector = write(
        &dir,
        "bad.json",
        r#"{"n": 1, "flaws": [{"id": "x", "support": [0], "projector": [[[2,0],[0,0]],[[0,0],[0,0]]]}]}"#,
    );
    assert_eq!(qlll(&["check", s(&not_projector)]).status.code(), Some(2));
    assert_eq!(
        qlll(&["check", "/nonexistent/file.json"]).status.code(),
        Some(2)
    );
    assert_eq!(qlll(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn gap_values() {
    let dir = TempDir::new().unwrap();
    let path = write(&dir, "op.json", ONE_AND_PLUS);
    let v = json(&qlll(&["gap", s(&path)]));
    let expected = 1.0 - 1.0 / 2f64.sqrt();
    assert!((v["uniform_gap"].as_f64().unwrap() - expected).abs() < 1e-12);

    let v = json(&qlll(&["gap", s(&path), "--subset"]));
    assert_eq!(v["subsets"][0]["gap"], "inf");
    assert_eq!(v["subsets"][0]["flaws"].as_array().unwrap().len(), 0);

    let commuting = gen(
        &dir,
        "c.json",
        &["random-commuting", "--n", "3", "--seed", "2"],
    );
    let v = json(&qlll(&["gap", s(&commuting)]));
    assert!((v["uniform_gap"].as_f64().unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn bounds_report_and_mismatch() {
    let dir = TempDir::new().unwrap();
    let path = write(&dir, "single.json", SINGLE_QUARTER);
    let out = qlll(&["bounds", s(&path), "--condition", "slc"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert!(v["n_scaled"].as_f64().unwrap() > v["resampling_bound"].as_f64().unwrap());

    let halves = write(&dir, "halves.json", TWO_HALVES);
    assert_eq!(
        qlll(&["bounds", s(&halves), "--condition", "shc"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(
        qlll(&["bounds", s(&path), "--condition", "nope"])
            .status
            .code(),
        Some(2)
    );

    let witness = write(&dir, "w.json", r#"{"y": [0.5]}"#);
    let v = json(&qlll(&[
        "bounds",
        s(&path),
        "--condition",
        "cec",
        "--witness",
        s(&witness),
    ]));
    assert!((v["path_estimate"].as_f64().unwrap() - 1.5).abs() < 1e-12);
}

#[test]
fn run_is_deterministic_and_csv_aggregates_recompute() {
    let dir = TempDir::new().unwrap();
    let path = gen(
        &dir,
        "c.json",
        &[
            "random-commuting",
            "--n",
            "4",
            "--topology",
            "cycle",
            "--seed",
            "9",
        ],
    );
    let args = [
        "run",
        s(&path),
        "--mode",
        "projective",
        "--trials",
        "300",
        "--seed",
        "17",
    ];
    let first = qlll(&args);
    let second = qlll(&args);
    assert_eq!(first.status.code(), Some(0));
    assert_eq!(first.stdout, second.stdout);
    let v = json(&first);
    assert_eq!(v["rows"].as_array().unwrap().len(), 300);
    assert!(v["aggregates"]["mean_residual_energy"].as_f64().unwrap() < 1e-8);

    let csv_path = dir.path().join("run.csv");
    let mut with_out = args.to_vec();
    with_out.extend_from_slice(&["--out", s(&csv_path)]);
    assert_eq!(qlll(&with_out).status.code(), Some(0));
    let mut reader = csv::Reader::from_path(&csv_path).unwrap();
    let headers = reader.headers().unwrap().clone();
    let col = |name: &str| headers.iter().position(|h| h == name).unwrap();
    let records: Vec<csv::StringRecord> = reader.records().map(|r| r.unwrap()).collect();
    let (mean_row, trials) = records.split_last().unwrap();
    assert_eq!(&mean_row[0], "mean");
    assert_eq!(trials.len(), 300);
    for name in ["success", "resamples", "channel_uses", "ground_overlap"] {
        let c = col(name);
        let recomputed = trials
            .iter()
            .map(|r| r[c].parse::<f64>().unwrap())
            .sum::<f64>()
            / 300.0;
        let stated: f64 = mean_row[c].parse().unwrap();
        assert!(
            (recomputed - stated).abs() < 1e-9,
            "{name}: {recomputed} vs {stated}"
        );
    }
    let mean_resamples: f64 = mean_row[col("resamples")].parse().unwrap();
    assert!((mean_resamples - v["aggregates"]["mean_resamples"].as_f64().unwrap()).abs() < 1e-12);
}

#[test]
fn run_timing_is_opt_in() {
    let dir = TempDir::new().unwrap();
    let path = write(&dir, "single.json", SINGLE_QUARTER);
    let v = json(&qlll(&["run", s(&path), "--trials", "5"]));
    assert!(v.get("wall_clock_seconds").is_none());
    let v = json(&qlll(&["run", s(&path), "--trials", "5", "--timing"]));
    assert!(v["wall_clock_seconds"].as_f64().is_some());
}

#[test]
fn run_boosted_on_appendix_f() {
    let dir = TempDir::new().unwrap();
    let path = gen(&dir, "f.json", &["appendix-f", "--epsilon", "0.01"]);
    let out = qlll(&[
        "run",
        s(&path),
        "--mode",
        "boosted",
        "--trials",
        "40",
        "--seed",
        "3",
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let v = json(&out);
    assert!(v["aggregates"]["success_rate"].as_f64().unwrap() >= 0.5);
    assert!(v["parameters"]["params"]["theta"].as_f64().unwrap() < 1.0);
}

#[test]
fn run_alternative_algorithm_fails_to_progress() {
    let dir = TempDir::new().unwrap();
    let path = gen(&dir, "f.json", &["appendix-f"]);
    let out = qlll(&[
        "run",
        s(&path),
        "--mode",
        "appendix-f-alt",
        "--trials",
        "50",
        "--initial",
        "0,1",
    ]);
    let v = json(&out);
    assert_eq!(v["mode"], "appendix-f-alt");
    assert_eq!(v["rows"].as_array().unwrap().len(), 50);
}

#[test]
fn run_rejects_bad_parameters() {
    let dir = TempDir::new().unwrap();
    let path = write(&dir, "single.json", SINGLE_QUARTER);
    assert_eq!(
        qlll(&["run", s(&path), "--mode", "zeno-ideal", "--theta", "1.5"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        qlll(&["run", s(&path), "--trials", "0"]).status.code(),
        Some(2)
    );
    assert_eq!(
        qlll(&["run", s(&path), "--mode", "warp"]).status.code(),
        Some(2)
    );
}

#[test]
fn enumerate_passes_on_single_flaw() {
    let dir = TempDir::new().unwrap();
    let path = write(&dir, "single.json", SINGLE_QUARTER);
    let out = qlll(&["enumerate", s(&path), "--max-resamples", "20"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["root_violation"].as_f64().unwrap(), 0.0);
    assert!((v["expected_resamplings_truncated"].as_f64().unwrap() - 1.0 / 3.0).abs() < 1e-9);
}

#[test]
fn enumerate_flags_projective_on_noncommuting_instance() {
    let dir = TempDir::new().unwrap();
    let path = gen(&dir, "r.json", &["random", "--n", "3", "--seed", "4"]);
    let exact = qlll(&["enumerate", s(&path), "--max-resamples", "2"]);
    assert_eq!(exact.status.code(), Some(0));
    let projective = qlll(&[
        "enumerate",
        s(&path),
        "--max-resamples",
        "2",
        "--channel",
        "projective",
    ]);
    assert_eq!(projective.status.code(), Some(1));
    assert!(!json(&projective)["violations"]
        .as_array()
        .unwrap()
        .is_empty());
    let zeno = qlll(&[
        "enumerate",
        s(&path),
        "--max-resamples",
        "2",
        "--channel",
        "zeno-ideal",
    ]);
    assert_eq!(zeno.status.code(), Some(0));
}

#[test]
fn enumerate_respects_size_limits() {
    let dir = TempDir::new().unwrap();
    let path = gen(&dir, "big.json", &["random-commuting", "--n", "6"]);
    assert_eq!(qlll(&["enumerate", s(&path)]).status.code(), Some(2));
}

#[test]
fn gen_round_trips_byte_stable() {
    let dir = TempDir::new().unwrap();
    let path = gen(
        &dir,
        "r.json",
        &["random", "--n", "4", "--topology", "cycle", "--seed", "7"],
    );
    let text = fs::read_to_string(&path).unwrap();
    let again = gen(
        &dir,
        "r2.json",
        &["random", "--n", "4", "--topology", "cycle", "--seed", "7"],
    );
    assert_eq!(text, fs::read_to_string(&again).unwrap());
    let inst: qlll::Instance64 = serde_json::from_str(&text).unwrap();
    assert_eq!(serde_json::to_string_pretty(&inst).unwrap() + "\n", text);
    assert_eq!(
        qlll(&["gen", "random", "--out", s(&dir.path().join("x.csv"))])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn gen_appendix_fixtures() {
    let out = qlll(&["gen", "appendix-e"]);
    let v = json(&out);
    let c = &v["flaws"][2]["projector"];
    assert!((c[0][0][0].as_f64().unwrap() - 0.36).abs() < 1e-15);
    assert!((c[3][0][0].as_f64().unwrap() - 0.48).abs() < 1e-15);
    assert!((c[3][3][0].as_f64().unwrap() - 0.64).abs() < 1e-15);

    let v = json(&qlll(&["gen", "appendix-f", "--epsilon", "0.01"]));
    assert_eq!(v["n"], 2);
    let psi = &v["flaws"][0]["projector"];
    let trace: f64 = (0..4).map(|i| psi[i][i][0].as_f64().unwrap()).sum();
    assert!((trace - 1.0).abs() < 1e-12);
    assert_eq!(
        qlll(&["gen", "appendix-f", "--epsilon", "1.5"])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn commute_demo() {
    let dir = TempDir::new().unwrap();
    let path = gen(&dir, "e.json", &["appendix-e"]);
    let v = json(&qlll(&["commute", s(&path), "--a", "a", "--b", "b"]));
    assert!(v["distance"].as_f64().unwrap() > 0.01);
    let v = json(&qlll(&["commute", s(&path), "--a", "a", "--b", "a"]));
    assert!(v["distance"].as_f64().unwrap() <= 1e-9);

    let disjoint = gen(
        &dir,
        "d.json",
        &[
            "random-commuting",
            "--n",
            "4",
            "--topology",
            "random",
            "--m",
            "2",
            "--k",
            "1",
            "--seed",
            "1",
        ],
    );
    let inst: Value = serde_json::from_str(&fs::read_to_string(&disjoint).unwrap()).unwrap();
    let supports: Vec<&Value> = inst["flaws"]
        .as_array()
        .unwrap()
        .iter()
        .map(|f| &f["support"])
        .collect();
    if supports[0] != supports[1] {
        let v = json(&qlll(&["commute", s(&disjoint), "--a", "f0", "--b", "f1"]));
        assert!(v["distance"].as_f64().unwrap() <= 1e-9);
    }
    assert_eq!(
        qlll(&["commute", s(&path), "--a", "a", "--b", "zz"])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn max_qubits_environment_override() {
    let dir = TempDir::new().unwrap();
    let path = write(&dir, "single.json", SINGLE_QUARTER);
    let out = Command::new(env!("CARGO_BIN_EXE_qlll"))
        .args(["gap", s(&path)])
        .env("QLLL_MAX_QUBITS", "1")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let out = Command::new(env!("CARGO_BIN_EXE_qlll"))
        .args(["gap", s(&path)])
        .env("QLLL_MAX_QUBITS", "3")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
}
