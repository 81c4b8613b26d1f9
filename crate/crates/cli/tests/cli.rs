use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use qfeedback_sim::output::sha256_hex;
use qfeedback_sim::{validate_config, Scenario};
use serde_json::{json, Value};

const BIN: &str = env!("CARGO_BIN_EXE_qfeedback-sim");

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn sim(scenario: &str, config: &Path, out: Option<&Path>, extra: &[&str]) -> Output {
    let mut cmd = Command::new(BIN);
    cmd.arg(scenario).arg("--config").arg(config).args(extra);
    if let Some(out) = out {
        cmd.arg("--out").arg(out);
    }
    cmd.env_remove("QFEEDBACK_OUT");
    cmd.output().expect("binary runs")
}

fn write_config(dir: &Path, name: &str, value: &Value) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, serde_json::to_vec_pretty(value).unwrap()).unwrap();
    path
}

fn read_json(path: &Path) -> Value {
    serde_json::from_slice(&fs::read(path).unwrap()).unwrap()
}

fn base_params() -> Value {
    json!({
        "delta_omega_1": 0.0, "delta_omega_2": 0.0, "delta_omega_r": 0.0,
        "gamma_1": 0.001, "gamma_2": 0.001, "kappa": 0.0015, "mu": 0.2
    })
}

fn small_excitation() -> Value {
    json!({
        "scenario": "excitation",
        "params": base_params(),
        "pulse": {"type": "gaussian", "omega": 0.004125, "t_peak": 3000.0},
        "initial_state": "g1g2_0",
        "grid": {"dt": 4.0, "t_end": 8000.0, "output_stride": 4},
        "cases": [
            {"label": "red", "set": {"delta_omega_1": 0.001, "delta_omega_2": 0.001}},
            {"label": "blue", "set": {"delta_omega_1": -0.001, "delta_omega_2": -0.001}},
            {"label": "resonance", "set": {}}
        ]
    })
}

fn stdout_stderr(o: &Output) -> String {
    format!("{}{}", String::from_utf8_lossy(&o.stdout), String::from_utf8_lossy(&o.stderr))
}

#[test]
fn every_shipped_config_validates() {
    let mut seen = 0;
    for entry in fs::read_dir(configs_dir()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().and_then(|e| e.to_str()) != Some("json") {
            continue;
        }
        let raw: Value = read_json(&path);
        let name = raw["scenario"].as_str().unwrap().to_string();
        let scenario = [
            Scenario::PulseResponse,
            Scenario::Stability,
            Scenario::Excitation,
            Scenario::SteadyState,
            Scenario::Invert,
        ]
        .into_iter()
        .find(|s| s.key() == name)
        .unwrap_or_else(|| panic!("{}: unknown scenario {name}", path.display()));
        if let Err(errs) = validate_config(&raw, scenario) {
            panic!("{}: {errs:?}", path.display());
        }
        seen += 1;
    }
    assert!(seen >= 13, "only {seen} configs found");
}

#[test]
fn run_writes_declared_files_with_matching_checksums() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "exc.json", &small_excitation());
    let out = tmp.path().join("out");
    let o = sim("excitation", &cfg, Some(&out), &[]);
    assert!(o.status.success(), "{}", stdout_stderr(&o));

    let manifest = read_json(&out.join("manifest.json"));
    assert_eq!(manifest["tool"], "qfeedback-sim");
    assert_eq!(manifest["scenario"], "excitation");
    let outputs = manifest["outputs"].as_array().unwrap();
    let names: Vec<&str> = outputs.iter().map(|f| f["file"].as_str().unwrap()).collect();
    for expected in ["red.csv", "blue.csv", "resonance.csv", "summary.json"] {
        assert!(names.contains(&expected), "{names:?}");
    }
    for f in outputs {
        let bytes = fs::read(out.join(f["file"].as_str().unwrap())).unwrap();
        assert_eq!(f["sha256"].as_str().unwrap(), sha256_hex(&bytes));
        assert_eq!(f["bytes"].as_u64().unwrap() as usize, bytes.len());
    }

    let red = fs::read_to_string(out.join("red.csv")).unwrap();
    assert_eq!(red.lines().next().unwrap(), "t,p_e1,p_e2,p_cavity,tr_rho11");
    assert!(red.lines().count() > 100);

    // mirrored detunings excite the target identically
    let summary = read_json(&out.join("summary.json"));
    let pts = summary["points"].as_array().unwrap();
    let peak = |label: &str| {
        pts.iter().find(|p| p["label"] == label).unwrap()["max_p_e1"].as_f64().unwrap()
    };
    assert!((peak("red") - peak("blue")).abs() < 1e-12);
    assert!(peak("resonance") > 0.0);
}

#[test]
fn reruns_and_worker_counts_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "exc.json", &small_excitation());
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    assert!(sim("excitation", &cfg, Some(&a), &["--workers", "1"]).status.success());
    assert!(sim("excitation", &cfg, Some(&b), &["--workers", "3"]).status.success());
    for name in ["red.csv", "blue.csv", "resonance.csv", "summary.json"] {
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap(), "{name}");
    }
    let outputs = |d: &Path| read_json(&d.join("manifest.json"))["outputs"].clone();
    assert_eq!(outputs(&a), outputs(&b));
}

#[test]
fn invalid_config_lists_every_problem_and_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let mut raw = small_excitation();
    raw["params"]["mu"] = json!(1.0);
    raw["params"].as_object_mut().unwrap().remove("kappa");
    let cfg = write_config(tmp.path(), "bad.json", &raw);
    let out = tmp.path().join("out");
    let o = sim("excitation", &cfg, Some(&out), &[]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("mu"), "{err}");
    assert!(err.contains("kappa"), "{err}");
    assert!(!out.join("manifest.json").exists());
}

#[test]
fn unreadable_or_malformed_config_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("missing.json");
    assert_eq!(sim("stability", &missing, Some(tmp.path()), &[]).status.code(), Some(2));
    let junk = tmp.path().join("junk.json");
    fs::write(&junk, "{ not json").unwrap();
    assert_eq!(sim("stability", &junk, Some(tmp.path()), &[]).status.code(), Some(2));
}

#[test]
fn scenario_mismatch_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "exc.json", &small_excitation());
    let o = sim("stability", &cfg, Some(&tmp.path().join("out")), &[]);
    assert_eq!(o.status.code(), Some(2), "{}", stdout_stderr(&o));
}

#[test]
fn step_too_coarse_for_dynamics_exits_3() {
    let tmp = tempfile::tempdir().unwrap();
    let mut raw = small_excitation();
    raw["grid"]["dt"] = json!(500.0);
    let cfg = write_config(tmp.path(), "coarse.json", &raw);
    let o = sim("excitation", &cfg, Some(&tmp.path().join("out")), &[]);
    assert_eq!(o.status.code(), Some(3), "{}", stdout_stderr(&o));
}

#[test]
fn output_directory_falls_back_to_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = configs_dir().join("stability_examples.json");
    let target = tmp.path().join("from_env");
    let o = Command::new(BIN)
        .args(["stability", "--config"])
        .arg(&cfg)
        .env("QFEEDBACK_OUT", &target)
        .current_dir(tmp.path())
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stdout_stderr(&o));
    assert!(target.join("manifest.json").exists());
    assert!(target.join("summary.json").exists());
    assert!(!tmp.path().join("out").exists());

    // --out wins over the environment
    let explicit = tmp.path().join("explicit");
    let o = Command::new(BIN)
        .args(["stability", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&explicit)
        .env("QFEEDBACK_OUT", tmp.path().join("ignored"))
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(explicit.join("summary.json").exists());
    assert!(!tmp.path().join("ignored").exists());
}

#[test]
fn stability_summary_agrees_with_oracle() {
    let tmp = tempfile::tempdir().unwrap();
    let o = sim("stability", &configs_dir().join("stability_examples.json"), Some(tmp.path()), &[]);
    assert!(o.status.success(), "{}", stdout_stderr(&o));
    let summary = read_json(&tmp.path().join("summary.json"));
    let pts = summary["points"].as_array().unwrap();
    assert!(!pts.is_empty());
    for p in pts {
        assert_eq!(p["agree"], true, "{p}");
        assert_eq!(p["eigenvalues"].as_array().unwrap().len(), 3);
    }
}

#[test]
fn vacuum_single_excitation_shares_evenly() {
    let tmp = tempfile::tempdir().unwrap();
    let o = sim("excitation", &configs_dir().join("fig07_vacuum_initial_states.json"), Some(tmp.path()), &[]);
    assert!(o.status.success(), "{}", stdout_stderr(&o));
    let summary = read_json(&tmp.path().join("summary.json"));
    let pts = summary["points"].as_array().unwrap();
    let final_p = |label: &str| {
        pts.iter().find(|p| p["label"] == label).unwrap()["final"]["p_e1"].as_f64().unwrap()
    };
    assert!((final_p("e1g2_0") - 0.25).abs() < 1e-4);
    assert!((final_p("g1e2_0") - 0.25).abs() < 1e-4);
    assert!(final_p("g1g2_1") < 1e-4);
}

#[test]
fn pulse_response_mirror_pair_is_symmetric() {
    let tmp = tempfile::tempdir().unwrap();
    let o = sim("pulse-response", &configs_dir().join("fig02_output_open.json"), Some(tmp.path()), &[]);
    assert!(o.status.success(), "{}", stdout_stderr(&o));
    let summary = read_json(&tmp.path().join("summary.json"));
    for p in summary["points"].as_array().unwrap() {
        assert!(p["allpass_max_dev"].as_f64().unwrap() < 1e-9, "{p}");
        assert!((p["output_norm"].as_f64().unwrap() - 1.0).abs() < 1e-3, "{p}");
    }
    let red = fs::read_to_string(tmp.path().join("red.csv")).unwrap();
    assert_eq!(red.lines().next().unwrap(), "t,xi_re,xi_im,eta_re,eta_im");
}
