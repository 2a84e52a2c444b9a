//! End-to-end tests of the `ghzsim` binary: documented output values,
//! file round trips, determinism, and exit codes.

use std::path::Path;
use std::process::{Command, Output};

fn ghzsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ghzsim"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn write_reference_settings(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("settings.json");
    std::fs::write(
        &path,
        r#"{"alpha1_deg": 2.52, "alpha_deg": 48.47, "beta1_deg": 163.70, "beta_deg": 83.30}"#,
    )
    .unwrap();
    path
}

#[test]
fn witness_on_ideal_state() {
    let out = ghzsim(&["witness", "--state", "ghz"]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("F = 1"), "{text}");
    assert!(text.contains("<W> = -0.5"), "{text}");
}

#[test]
fn hardy_eval_prints_reference_i() {
    let dir = tempfile::tempdir().unwrap();
    let settings = write_reference_settings(dir.path());
    let out = ghzsim(&[
        "hardy",
        "eval",
        "--state",
        "ghz",
        "--settings",
        settings.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("I = 0.0208526"), "{text}");
    assert!(text.contains("<a1 a a a> = 0.04793"), "{text}");
}

#[test]
fn hardy_threshold_value() {
    let dir = tempfile::tempdir().unwrap();
    let settings = write_reference_settings(dir.path());
    let out = ghzsim(&[
        "hardy",
        "threshold",
        "--settings",
        settings.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("p* = 0.9473"), "{text}");
    assert!(text.contains("fidelity* = 0.95061"), "{text}");
}

#[test]
fn state_outputs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    for path in [&a, &b] {
        let out = ghzsim(&[
            "state",
            "--noise-eps",
            "0.0103",
            "--noise-lambda",
            "0.98233",
            "--out",
            path.to_str().unwrap(),
        ]);
        assert!(out.status.success());
    }
    let bytes_a = std::fs::read(&a).unwrap();
    let bytes_b = std::fs::read(&b).unwrap();
    assert!(!bytes_a.is_empty());
    assert_eq!(bytes_a, bytes_b);
}

#[test]
fn seeded_simulations_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for path in [&a, &b] {
        let out = ghzsim(&[
            "tomo",
            "simulate",
            "--state",
            "ghz",
            "--noise-eps",
            "0.0103",
            "--rate",
            "2",
            "--time",
            "20",
            "--seed",
            "99",
            "--out",
            path.to_str().unwrap(),
        ]);
        assert!(out.status.success());
    }
    let bytes_a = std::fs::read(&a).unwrap();
    assert!(!bytes_a.is_empty());
    assert_eq!(bytes_a, std::fs::read(&b).unwrap());
}

#[test]
fn state_file_feeds_other_commands() {
    let dir = tempfile::tempdir().unwrap();
    let state = dir.path().join("state.json");
    assert!(ghzsim(&[
        "state",
        "--noise-eps",
        "0.0103",
        "--noise-lambda",
        "0.98233",
        "--out",
        state.to_str().unwrap(),
    ])
    .status
    .success());

    let out = ghzsim(&["witness", "--state", state.to_str().unwrap()]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("F = 0.98095"), "{text}");
}

#[test]
fn witness_simulation_requires_seed() {
    let out = ghzsim(&["witness", "--state", "ghz", "--simulate"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--seed"));
}

#[test]
fn witness_simulation_writes_counts() {
    let dir = tempfile::tempdir().unwrap();
    let counts = dir.path().join("counts.csv");
    let report = dir.path().join("report.json");
    let out = ghzsim(&[
        "witness",
        "--state",
        "ghz",
        "--simulate",
        "--seed",
        "7",
        "--time-hv",
        "500",
        "--time-mk",
        "500",
        "--resamples",
        "50",
        "--counts-out",
        counts.to_str().unwrap(),
        "--out",
        report.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let csv = std::fs::read_to_string(&counts).unwrap();
    assert!(csv.starts_with("setting_index,bases,outcome,count,time_s"));
    assert!(csv.contains("ZZZZ"));
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(json["fidelity"], serde_json::json!(1.0));
    assert!(json["uncertainties"]["fidelity"].as_f64().is_some());
}

#[test]
fn tomography_round_trip_via_files() {
    let dir = tempfile::tempdir().unwrap();
    let counts = dir.path().join("counts.csv");
    let rho_out = dir.path().join("rho.json");
    let sim = ghzsim(&[
        "tomo",
        "simulate",
        "--state",
        "ghz",
        "--rate",
        "5",
        "--time",
        "30",
        "--seed",
        "11",
        "--out",
        counts.to_str().unwrap(),
    ]);
    assert!(
        sim.status.success(),
        "{}",
        String::from_utf8_lossy(&sim.stderr)
    );

    let rec = ghzsim(&[
        "tomo",
        "reconstruct",
        "--counts",
        counts.to_str().unwrap(),
        "--out",
        rho_out.to_str().unwrap(),
    ]);
    assert!(
        rec.status.success(),
        "{}",
        String::from_utf8_lossy(&rec.stderr)
    );
    let text = stdout(&rec);
    assert!(text.contains("converged = true"), "{text}");

    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&rho_out).unwrap()).unwrap();
    assert_eq!(json["n_qubits"], serde_json::json!(4));
    assert_eq!(json["metadata"]["converged"], serde_json::json!(true));
    // the file parses back into a valid density matrix
    let rho: ghzsim::DensityMatrix =
        serde_json::from_str(&std::fs::read_to_string(&rho_out).unwrap()).unwrap();
    let f = rho.fidelity(&ghzsim::ghz_state(4).unwrap()).unwrap();
    assert!(f > 0.9, "fidelity {f}");
}

#[test]
fn tomography_nonconvergence_exits_with_code_2() {
    let dir = tempfile::tempdir().unwrap();
    let counts = dir.path().join("counts.csv");
    assert!(ghzsim(&[
        "tomo",
        "simulate",
        "--state",
        "ghz",
        "--rate",
        "5",
        "--time",
        "30",
        "--seed",
        "3",
        "--out",
        counts.to_str().unwrap(),
    ])
    .status
    .success());
    let rec = ghzsim(&[
        "tomo",
        "reconstruct",
        "--counts",
        counts.to_str().unwrap(),
        "--max-iter",
        "3",
    ]);
    assert_eq!(rec.status.code(), Some(2));
}

#[test]
fn swap_on_ideal_input() {
    let out = ghzsim(&["swap", "--state", "psi-in"]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(
        text.contains("phi+: probability = 0.25, fidelity = 1"),
        "{text}"
    );
    assert!(text.contains("average fidelity = 1"), "{text}");

    let out = ghzsim(&["swap", "--state", "psi-in", "--config", "psi"]);
    assert!(stdout(&out).contains("psi+"));
}

#[test]
fn swap_from_counts_file() {
    let dir = tempfile::tempdir().unwrap();
    let counts = dir.path().join("counts.csv");
    assert!(ghzsim(&[
        "tomo",
        "simulate",
        "--state",
        "ghz",
        "--rate",
        "20",
        "--time",
        "30",
        "--seed",
        "5",
        "--out",
        counts.to_str().unwrap(),
    ])
    .status
    .success());
    let out = ghzsim(&["swap", "--counts", counts.to_str().unwrap()]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = stdout(&out);
    assert!(text.contains("phi+"), "{text}");
    assert!(text.contains("phi-"), "{text}");
    assert!(text.contains("average fidelity = 0.9"), "{text}");
}

#[test]
fn hardy_search_writes_usable_settings() {
    let dir = tempfile::tempdir().unwrap();
    let found = dir.path().join("found.json");
    let out = ghzsim(&[
        "hardy",
        "search",
        "--state",
        "ghz",
        "--restarts",
        "1",
        "--seed",
        "7",
        "--out",
        found.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&found).unwrap()).unwrap();
    let alpha1 = json["alpha1_deg"].as_f64().unwrap();
    assert!((alpha1 - 2.5237).abs() < 0.05, "alpha1 {alpha1}");

    // the emitted file feeds the threshold command
    let thr = ghzsim(&["hardy", "threshold", "--settings", found.to_str().unwrap()]);
    assert!(thr.status.success());
    assert!(
        stdout(&thr).contains("fidelity* = 0.95"),
        "{}",
        stdout(&thr)
    );
}

#[test]
fn hardy_simulate_reports_significance() {
    let dir = tempfile::tempdir().unwrap();
    let settings = write_reference_settings(dir.path());
    let results = dir.path().join("results.json");
    let out = ghzsim(&[
        "hardy",
        "simulate",
        "--state",
        "ghz",
        "--settings",
        settings.to_str().unwrap(),
        "--seed",
        "1",
        "--resamples",
        "100",
        "--out",
        results.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&results).unwrap()).unwrap();
    assert_eq!(json["terms"].as_array().unwrap().len(), 8);
    assert!(json["i"]["significance"].as_f64().unwrap() > 3.0);
    assert!((json["i"]["theory"].as_f64().unwrap() - 0.02085).abs() < 1e-4);
}

#[test]
fn results_are_independent_of_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let settings = write_reference_settings(dir.path());
    let mut outputs = Vec::new();
    for threads in ["1", "2"] {
        let path = dir.path().join(format!("t{threads}.json"));
        let out = ghzsim(&[
            "hardy",
            "simulate",
            "--threads",
            threads,
            "--state",
            "ghz",
            "--settings",
            settings.to_str().unwrap(),
            "--time",
            "2000",
            "--seed",
            "12",
            "--resamples",
            "64",
            "--out",
            path.to_str().unwrap(),
        ]);
        assert!(out.status.success());
        outputs.push(std::fs::read(&path).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn invalid_usage_exits_with_code_1() {
    let out = ghzsim(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!String::from_utf8_lossy(&out.stderr).is_empty());

    let out = ghzsim(&["witness", "--no-such-flag"]);
    assert_eq!(out.status.code(), Some(1));

    let out = ghzsim(&["state", "--noise-eps", "2.0"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("outside"));
}

#[test]
fn help_succeeds() {
    let out = ghzsim(&["--help"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).contains("reproduce-paper"));
}
