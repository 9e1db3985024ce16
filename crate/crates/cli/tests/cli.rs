//! End-to-end runs of the `dicert` binary.

use std::io::Write;
use std::process::{Command, Output};

use dicert::qmodel::{behavior, bell_state_phi_plus, lab_angles, BellFamily};
use dicert::stats::{synthesize_runs, write_counts};
use serde_json::Value;

fn dicert(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dicert"))
        .args(args)
        .env_remove(dicert_cli::SOLVER_TOL_ENV)
        .output()
        .expect("binary runs")
}

fn json(args: &[&str]) -> Value {
    let mut full = vec!["--json"];
    full.extend_from_slice(args);
    let out = dicert(&full);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("JSON output")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

#[test]
fn simulate_reports_bell_values() {
    let v = json(&["simulate", "--family", "I", "--delta", "0.5"]);
    assert!((v["bell_value"].as_f64().unwrap() - 5.218).abs() < 5e-4);
    assert_eq!(v["angle_source"], "lab");
    let v = json(&["simulate", "--family", "J", "--gamma", "0", "--eta", "0.996"]);
    assert!((v["bell_value"].as_f64().unwrap() - 0.996 * 5.196152422706632).abs() < 1e-9);
    let v = json(&["simulate", "--family", "I", "--delta", "0.52", "--eta", "0"]);
    assert!(v["bell_value"].as_f64().unwrap().abs() < 1e-12);
    let v = json(&["simulate", "--family", "J", "--gamma", "pi/24"]);
    assert!((v["relative_value"].as_f64().unwrap() - 1.0).abs() < 1e-3);
}

#[test]
fn simulate_reads_angle_files() {
    let mut f = tempfile::NamedTempFile::new().unwrap();
    write!(f, "role,setting,theta_degrees\nalice,0,0\nalice,1,22.5\nbob,0,11.25\nbob,1,-11.25\n").unwrap();
    let path = f.path().to_str().unwrap();
    // Plain CHSH in I_δ form is not optimal here; only the source is checked.
    let v = json(&["simulate", "--family", "I", "--delta", "0.5", "--angles", path]);
    assert_eq!(v["angle_source"], "file");
    assert_eq!(v["angles"]["bob"].as_array().unwrap().len(), 2);
}

#[test]
fn invalid_input_exits_with_one() {
    assert_eq!(code(&dicert(&["simulate", "--family", "I", "--delta", "0.9"])), 1);
    assert_eq!(code(&dicert(&["simulate", "--family", "K", "--delta", "0.1"])), 1);
    assert_eq!(code(&dicert(&["certify", "--family", "I", "--delta", "0.5"])), 1);
    assert_eq!(code(&dicert(&["reproduce", "--table", "tab-9"])), 1);
    let out = Command::new(env!("CARGO_BIN_EXE_dicert"))
        .args(["certify", "--family", "I", "--delta", "0.5", "--bell", "5.1"])
        .env(dicert_cli::SOLVER_TOL_ENV, "tight")
        .output()
        .unwrap();
    assert_eq!(code(&out), 1);
}

#[test]
fn certify_min_entropy() {
    let v = json(&["certify", "--family", "I", "--delta", "0.52", "--bell", "5.179", "--method", "minentropy", "--rate", "675"]);
    let h = v["entropy_bits"].as_f64().unwrap();
    assert!((h - 1.50).abs() <= 0.02, "{h}");
    assert!((v["rate"]["min_entropy_bits_per_second"].as_f64().unwrap() - 675.0 * h).abs() < 1e-9);
    // No violation, no randomness.
    let v = json(&["certify", "--family", "I", "--delta", "0.52", "--bell", "5"]);
    assert_eq!(v["entropy_bits"].as_f64().unwrap(), 0.0);
}

#[test]
fn certify_von_neumann_with_pi_fraction() {
    let v = json(&["certify", "--family", "J", "--gamma", "pi/24", "--bell", "3.968", "--method", "vonneumann", "--nodes", "6"]);
    let h = v["entropy_bits"].as_f64().unwrap();
    assert!((h - 1.68).abs() <= 0.03, "{h}");
    // The node at t = 1 carries no term.
    assert_eq!(v["nodes"].as_array().unwrap().len(), 5);
}

#[test]
fn solver_failure_exits_with_two() {
    // At the exact maximum the program has no interior, so a very tight
    // tolerance cannot be met.
    let out = Command::new(env!("CARGO_BIN_EXE_dicert"))
        .args(["certify", "--family", "I", "--delta", "0.52", "--bell", "5.196687140549926"])
        .env(dicert_cli::SOLVER_TOL_ENV, "1e-14")
        .output()
        .unwrap();
    assert_eq!(code(&out), 2, "{}", String::from_utf8_lossy(&out.stdout));
}

#[test]
fn certify_accepts_task_files() {
    let mut f = tempfile::NamedTempFile::new().unwrap();
    write!(f, r#"{{"family":"J","parameter":0,"mode":"bell","value":5.174,"method":"hmin"}}"#).unwrap();
    let v = json(&["certify", "--task", f.path().to_str().unwrap()]);
    assert!((v["entropy_bits"].as_f64().unwrap() - 1.43).abs() <= 0.02);
    let mut bad = tempfile::NamedTempFile::new().unwrap();
    write!(bad, r#"{{"family":"J","parameter":0,"mode":"bell","value":5.174,"method":"hmin","extra":1}}"#).unwrap();
    assert_eq!(code(&dicert(&["certify", "--task", bad.path().to_str().unwrap()])), 1);
}

fn synthetic_counts(runs: usize, seed: u64) -> tempfile::NamedTempFile {
    let f = BellFamily::IDelta(0.52);
    let (a, b) = lab_angles(f).unwrap().observables();
    let state = bell_state_phi_plus().with_white_noise(0.9966).unwrap();
    let table = behavior(&state, &a, &b).unwrap();
    let data = synthesize_runs(&table, 675 * 250, runs, seed).unwrap();
    let file = tempfile::NamedTempFile::new().unwrap();
    write_counts(&data, file.reopen().unwrap()).unwrap();
    file
}

#[test]
fn ingest_synthetic_low_rate_run() {
    let file = synthetic_counts(180, 3);
    let v = json(&["ingest", "--counts", file.path().to_str().unwrap(), "--family", "I", "--delta", "0.52"]);
    let bell = v["bell_value"]["value"].as_f64().unwrap();
    let se = v["bell_value"]["stderr"].as_f64().unwrap();
    assert!((bell - 5.179).abs() < 0.01, "{bell}");
    // The published ± is the spread of single-run values.
    let spread = se * 180f64.sqrt();
    assert!((0.003..0.012).contains(&spread), "{spread}");
    assert_eq!(v["runs"], 180);
}

#[test]
fn ingest_modes_agree_on_identical_runs() {
    let one = synthetic_counts(1, 9);
    let text = std::fs::read_to_string(one.path()).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap();
    let body: Vec<&str> = lines.collect();
    let mut f = tempfile::NamedTempFile::new().unwrap();
    writeln!(f, "{header}").unwrap();
    for run in 0..5 {
        for line in &body {
            let (_, rest) = line.split_once(',').unwrap();
            writeln!(f, "{run},{rest}").unwrap();
        }
    }
    let path = f.path().to_str().unwrap();
    let per_run = json(&["ingest", "--counts", path, "--mode", "per-run"]);
    let pooled = json(&["ingest", "--counts", path, "--mode", "pooled"]);
    for key in ["0,0", "0,1", "1,0", "1,1"] {
        let a = per_run["correlators"][key]["value"].as_f64().unwrap();
        let b = pooled["correlators"][key]["value"].as_f64().unwrap();
        assert!((a - b).abs() < 1e-12, "{key}: {a} vs {b}");
    }
}

#[test]
fn ingest_rejects_empty_files() {
    let f = tempfile::NamedTempFile::new().unwrap();
    let out = dicert(&["ingest", "--counts", f.path().to_str().unwrap()]);
    assert_eq!(code(&out), 1);
    assert!(!out.stderr.is_empty());
    assert_eq!(code(&dicert(&["ingest", "--counts", "/nonexistent/counts.csv"])), 1);
}

#[test]
fn reproduce_passing_tables() {
    for table in ["violation-I-lowrate", "violation-J", "violation-I-highrate", "angles"] {
        let v = json(&["reproduce", "--table", table]);
        assert_eq!(v["failed"], 0, "{table}: {v}");
    }
    let v = json(&["reproduce", "--table", "entropy-J", "--min-entropy-only"]);
    assert_eq!(v["rows"].as_array().unwrap().len(), 3);
    assert_eq!(v["failed"], 0, "{v}");
}

#[test]
fn reproduction_mismatch_exits_with_three() {
    // The 780 events/s rate matches no published entry of its table.
    let out = dicert(&["reproduce", "--table", "rates"]);
    assert_eq!(code(&out), 3);
    let text = String::from_utf8_lossy(&out.stdout);
    assert_eq!(text.matches("FAIL").count(), 2, "{text}");
}
