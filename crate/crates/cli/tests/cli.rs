use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};

fn nlqd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nlqd")).args(args).output().expect("binary runs")
}

fn scenario(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(name).display().to_string()
}

fn write_scenario(dir: &Path, name: &str, v: &Value) -> String {
    let p = dir.join(name);
    fs::write(&p, v.to_string()).unwrap();
    p.display().to_string()
}

fn error_record(out: &Output) -> Value {
    let line = String::from_utf8_lossy(&out.stderr);
    serde_json::from_str(line.trim()).unwrap_or_else(|_| panic!("stderr is not a JSON record: {line}"))
}

fn column(csv: &str, name: &str) -> Vec<f64> {
    let mut lines = csv.lines();
    let idx = lines.next().unwrap().split(',').position(|h| h == name).expect("column present");
    lines.map(|l| l.split(',').nth(idx).unwrap().parse().unwrap()).collect()
}

fn qubit_spec() -> Value {
    json!({
        "H": { "dim": 2, "re": [0.2, 0.7, 0.7, -0.4], "im": [0.0, -0.3, 0.3, 0.0] },
        "t": { "family": "powerLaw", "q": 1.5 },
        "gamma": { "family": "zeroMean", "sigma": -0.5, "r": 2.0 }
    })
}

fn random_evolve(seed: u64) -> Value {
    json!({
        "schema": "nlqd/1",
        "kind": "evolve",
        "seed": seed,
        "payload": {
            "rho0": { "random": { "dim": 2 } },
            "spec": qubit_spec(),
            "config": { "dt": 0.001, "t_final": 0.5, "monitor_stride": 25 }
        }
    })
}

#[test]
fn pure_scenario_keeps_purity() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("pure.csv");
    let out = nlqd(&["run", &scenario("evolve_pure.json"), "-o", csv.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let purity = column(&fs::read_to_string(&csv).unwrap(), "purity");
    assert_eq!(purity.len(), 301);
    for p in purity {
        assert!((p - 1.0).abs() <= 1e-10, "{p}");
    }
    let summary: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(summary["passed"], true);
    assert_eq!(summary["kind"], "evolve");
}

#[test]
fn same_seed_gives_identical_csv() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_scenario(dir.path(), "r.json", &random_evolve(17));
    let a = nlqd(&["run", &path, "--dump-states"]);
    let b = nlqd(&["run", &path, "--dump-states"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let c = nlqd(&["run", &path, "--dump-states", "--seed", "18"]);
    assert_ne!(a.stdout, c.stdout);
}

#[test]
fn cp_audit_of_essential_gamma_fails_under_strict() {
    let out = nlqd(&["check", &scenario("cp-audit.json"), "--strict"]);
    assert_eq!(out.status.code(), Some(3));
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["passed"], false);
    let witness = &report["witness"];
    assert_eq!(witness["state"]["dim"], 4);
    assert!(witness["detail"]["remote_k_residual"].as_f64().unwrap() > 1e-6);

    let lenient = nlqd(&["check", &scenario("cp-audit.json")]);
    assert_eq!(lenient.status.code(), Some(0));
}

#[test]
fn non_essential_cp_audit_passes_under_strict() {
    let dir = tempfile::tempdir().unwrap();
    let v = json!({
        "schema": "nlqd/1",
        "kind": "check",
        "seed": 2,
        "payload": {
            "criterion": "cp_audit",
            "dyn": { "H": {
                "H": { "dim": 2, "re": [0.3, 0.5, 0.5, -0.7] },
                "t": { "family": "powerLaw", "q": 1.0 },
                "gamma": { "family": "nonEssential", "r": 2.0, "A": { "dim": 2, "re": [0.0, 1.0, 1.0, 0.0] } }
            } },
            "d_H": 2, "d_K": 2, "samples": 4,
            "config": { "dt": 0.001, "t_final": 0.5, "monitor_stride": 10 }
        }
    });
    let out = nlqd(&["check", &write_scenario(dir.path(), "a.json", &v), "--strict", "--jobs", "2"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
}

#[test]
fn singlet_correlation_is_perfect() {
    let dir = tempfile::tempdir().unwrap();
    let report_path = dir.path().join("report.json");
    let out = nlqd(&["run", &scenario("corr_singlet.json"), "-o", report_path.to_str().unwrap(), "--strict"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: Value = serde_json::from_str(&fs::read_to_string(report_path).unwrap()).unwrap();
    assert!((report["p_conditional"].as_f64().unwrap() - 1.0).abs() <= 1e-6);
    assert!((report["p_joint_full"].as_f64().unwrap() - 0.5).abs() <= 1e-6);
    assert!(report["route_gap"].as_f64().unwrap() <= 1e-6);
}

#[test]
fn verify_accepts_output_and_rejects_tampering() {
    let dir = tempfile::tempdir().unwrap();
    let csv: PathBuf = dir.path().join("t.csv");
    let path = write_scenario(dir.path(), "r.json", &random_evolve(3));
    assert!(nlqd(&["run", &path, "--dump-states", "-o", csv.to_str().unwrap()]).status.success());
    let ok = nlqd(&["verify", csv.to_str().unwrap()]);
    assert!(ok.status.success());
    let audit: Value = serde_json::from_slice(&ok.stdout).unwrap();
    assert_eq!(audit["states_checked"], audit["rows"]);

    // break positivity of one dumped state while leaving the summary columns intact
    let text = fs::read_to_string(&csv).unwrap();
    let header: Vec<&str> = text.lines().next().unwrap().split(',').collect();
    let col = header.iter().position(|h| *h == "rho_1_1_re").unwrap();
    let tampered: Vec<String> = text
        .lines()
        .enumerate()
        .map(|(i, l)| {
            if i != 3 {
                return l.to_string();
            }
            let mut f: Vec<String> = l.split(',').map(String::from).collect();
            f[col] = "-0.5".into();
            f.join(",")
        })
        .collect();
    fs::write(&csv, tampered.join("\n")).unwrap();
    let bad = nlqd(&["verify", csv.to_str().unwrap()]);
    assert_eq!(bad.status.code(), Some(3));
    assert_eq!(error_record(&bad)["error"], "criterion_failed");
}

#[test]
fn validation_errors_exit_one_with_record() {
    let dir = tempfile::tempdir().unwrap();
    let mut v = random_evolve(1);
    v["payload"]["spec"]["H"]["im"] = json!([0.0, 0.3, 0.3, 0.0]);
    let out = nlqd(&["run", &write_scenario(dir.path(), "bad.json", &v)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(error_record(&out)["message"].as_str().unwrap().contains("Hermitian"));

    let mut v = random_evolve(1);
    v["schema"] = json!("nlqd/0");
    let out = nlqd(&["run", &write_scenario(dir.path(), "old.json", &v)]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(error_record(&out)["error"], "schema");

    let out = nlqd(&["run", &dir.path().join("missing.json").display().to_string()]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(error_record(&out)["error"], "io");
}

#[test]
fn oversized_step_is_a_numerical_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_scenario(dir.path(), "r.json", &random_evolve(1));
    let out = nlqd(&["run", &path, "--dt", "0.25"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_record(&out)["error"], "step_size");
}

#[test]
fn mixture_is_independent_of_job_count() {
    let dir = tempfile::tempdir().unwrap();
    let sx = json!({ "dim": 2, "re": [0.0, 1.0, 1.0, 0.0] });
    let sz = json!({ "dim": 2, "re": [1.0, 0.0, 0.0, -1.0] });
    let v = json!({
        "schema": "nlqd/1",
        "kind": "mixture",
        "payload": {
            "rho0": { "ket": { "re": [1.0, 0.0] } },
            "mixture": {
                "weights": [0.5, 0.5],
                "processes": [{ "H": sx, "t": { "family": "vonNeumann" } }, { "H": sz, "t": { "family": "vonNeumann" } }]
            },
            "config": { "dt": 0.001, "t_final": 1.0, "monitor_stride": 100 }
        }
    });
    let path = write_scenario(dir.path(), "m.json", &v);
    let one = nlqd(&["run", &path, "--jobs", "1"]);
    let two = nlqd(&["run", &path, "--jobs", "2"]);
    assert!(one.status.success());
    assert_eq!(one.stdout, two.stdout);
    let purity = column(&String::from_utf8(one.stdout).unwrap(), "purity");
    // mixing two distinct unitary branches loses purity
    assert!(*purity.last().unwrap() < 1.0 - 1e-3);
}

#[test]
fn bipartite_run_reports_mutual_information() {
    let dir = tempfile::tempdir().unwrap();
    let v = json!({
        "schema": "nlqd/1",
        "kind": "evolve_bipartite",
        "seed": 9,
        "payload": {
            "rho0": { "random": { "dim": 4, "rank": 1 } },
            "d_H": 2,
            "d_K": 2,
            "dyn": { "H": qubit_spec() },
            "config": { "dt": 0.001, "t_final": 0.2, "monitor_stride": 20 }
        }
    });
    let out = nlqd(&["run", &write_scenario(dir.path(), "b.json", &v), "--strict"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = String::from_utf8(out.stdout).unwrap();
    let mi = column(&csv, "mutual_info");
    let s_h = column(&csv, "entropy_H");
    // pure global state: mutual information is twice the local entropy
    for (m, s) in mi.iter().zip(&s_h) {
        assert!((m - 2.0 * s).abs() < 1e-8, "{m} vs {s}");
    }
}

#[test]
fn schema_is_json_and_lists_every_kind() {
    let out = nlqd(&["schema"]);
    assert!(out.status.success());
    let schema: Value = serde_json::from_slice(&out.stdout).unwrap();
    let kinds = schema["properties"]["kind"]["enum"].as_array().unwrap();
    assert_eq!(kinds.len(), 5);
    assert_eq!(schema["properties"]["schema"]["const"], "nlqd/1");
}
