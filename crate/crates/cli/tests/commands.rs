use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_rbsmc"))
}

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn run(args: &[&str], cfg: &Path, out: &Path) -> Output {
    bin()
        .args(args)
        .arg("--config")
        .arg(cfg)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn stdout_json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&o.stdout)))
}

fn write_config(dir: &Path, v: &Value) -> PathBuf {
    let p = dir.join("config.json");
    std::fs::write(&p, v.to_string()).unwrap();
    p
}

fn reference() -> Value {
    serde_json::from_str(&std::fs::read_to_string(config("underactuated.json")).unwrap()).unwrap()
}

#[test]
fn verify_rb_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    for (name, code) in [("triangular.json", 0), ("underactuated.json", 0), ("peirce_corner.json", 1)] {
        let o = run(&["verify-rb"], &config(name), dir.path());
        assert_eq!(o.status.code(), Some(code), "{name}: {}", String::from_utf8_lossy(&o.stderr));
    }
    let o = run(&["verify-rb"], &config("peirce_corner.json"), dir.path());
    let rep = stdout_json(&o);
    let rb = rep["properties"].as_array().unwrap().iter().find(|p| p["name"] == "rota_baxter_identity").unwrap();
    assert_eq!(rb["witness"], json!(["I", "I"]));
    assert!(String::from_utf8_lossy(&o.stderr).contains("witness I, I"));
    assert!(dir.path().join("verify_rb.json").exists());
}

#[test]
fn tolerance_scale_loosens_checks() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["verify-rb", "--tolerance-scale", "1e13"], &config("peirce_corner.json"), dir.path());
    assert_eq!(o.status.code(), Some(0));
    let o = run(&["verify-rb", "--tolerance-scale", "0"], &config("triangular.json"), dir.path());
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn design_reference_passes_every_step() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["design"], &config("underactuated.json"), dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v = stdout_json(&o);
    assert_eq!(v["step_flags"], json!([true, true, true, true, true, true]));
    assert_eq!(v["t_star"], json!(3));
    assert_eq!(v["degenerate"], json!(false));
}

#[test]
fn design_full_actuation_is_degenerate() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["design"], &config("full_actuation.json"), dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v = stdout_json(&o);
    assert_eq!(v["degenerate"], json!(true));
    assert!(v["note"].as_str().unwrap().contains("trivially stable"));
}

#[test]
fn design_failure_is_a_violation() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = reference();
    c["design"]["k"] = json!([[-10.0, -5.0]]);
    let o = run(&["design"], &write_config(dir.path(), &c), dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(stdout_json(&o)["failure"]["step"], json!(2));
}

#[test]
fn missing_gain_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = reference();
    c["design"].as_object_mut().unwrap().remove("k");
    let o = run(&["design"], &write_config(dir.path(), &c), dir.path());
    assert_eq!(o.status.code(), Some(3));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("design") && err.contains("`k`"), "{err}");
}

#[test]
fn unreadable_config_and_bad_flags_are_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["spectral"], &dir.path().join("absent.json"), dir.path());
    assert_eq!(o.status.code(), Some(3));
    let o = bin().args(["spectral", "--seed", "minus-one"]).output().unwrap();
    assert_eq!(o.status.code(), Some(3));
    let o = bin().arg("spectral").output().unwrap();
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn certify_reference() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["certify"], &config("underactuated.json"), dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v = stdout_json(&o);
    let cert = &v["certificate"];
    assert!(cert["gamma"].as_f64().unwrap() <= 0.30);
    assert!(cert["mu"].as_f64().unwrap() > 0.0);
    assert!(v["validated_max_eig"].as_f64().unwrap() < 0.0);
    // r = √(V₀/λ_min(X)) for the history [[0.5, 0.5], [0, 0]]
    let r = cert["r"].as_f64().unwrap();
    assert!(r > 0.5 && r < 1.0, "{r}");
    assert!(dir.path().join("certificate.json").exists());
}

#[test]
fn certify_unstable_reduction_is_infeasible() {
    let dir = tempfile::tempdir().unwrap();
    // Π = diag(0, 1), A_P = −½A, so Ā = diag(0, 2)
    let c = json!({
        "operator": {"kind": "scalar", "lambda": 0.5},
        "system": {
            "a": [[0.0, 0.0], [0.0, -4.0]], "a_d": [[0.0, 0.0], [0.0, 0.0]],
            "b": [[1.0], [0.0]], "c": [[1.0, 0.0]], "d": [[0.1], [0.1]],
            "tau": 1, "delta_max": 0.1
        }
    });
    let o = run(&["certify"], &write_config(dir.path(), &c), dir.path());
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn certify_zero_history_reports_l2_gain() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = reference();
    c["sim"]["initial_history"] = json!([[0.0, 0.0], [0.0, 0.0]]);
    let o = run(&["certify"], &write_config(dir.path(), &c), dir.path());
    assert_eq!(o.status.code(), Some(0));
    let v = stdout_json(&o);
    assert_eq!(v["certificate"]["v0"], json!(0.0));
    assert_eq!(v["l2_gain"], v["certificate"]["effective_gain"]);
}

#[test]
fn design_and_certify_compose_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("underactuated.json");
    assert_eq!(run(&["certify"], &cfg, dir.path()).status.code(), Some(0));
    let cert = dir.path().join("certificate.json");
    let o = run(&["design", "--certificate", cert.to_str().unwrap()], &cfg, dir.path());
    assert_eq!(o.status.code(), Some(0));
    let design = stdout_json(&o);
    let saved: Value = serde_json::from_str(&std::fs::read_to_string(&cert).unwrap()).unwrap();
    assert_eq!(design["r"], saved["r"]);

    let dpath = dir.path().join("design.json");
    let o = run(&["certify", "--design", dpath.to_str().unwrap()], &cfg, dir.path());
    assert_eq!(o.status.code(), Some(0));
    let v = stdout_json(&o);
    assert_eq!(v["design"]["step_flags"], json!([true, true, true, true, true, true]));
    assert_eq!(v["design"]["r"], v["certificate"]["r"]);
}

#[test]
fn spectral_root_counts() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["spectral"], &config("underactuated.json"), dir.path());
    assert_eq!(o.status.code(), Some(0));
    let v = stdout_json(&o);
    assert_eq!(v["roots"].as_array().unwrap().len(), 4);
    assert_eq!(v["stable"], json!(true));
    assert!(v["roots"].as_array().unwrap().iter().all(|r| r["modulus"].as_f64().unwrap() < 1.0));

    let mut c = reference();
    c["system"]["tau"] = json!(3);
    c["sim"]["initial_history"] = json!([[0.5, 0.5], [0, 0], [0, 0], [0, 0]]);
    let o = run(&["spectral"], &write_config(dir.path(), &c), dir.path());
    assert_eq!(stdout_json(&o)["roots"].as_array().unwrap().len(), 8);

    // Ā_d = 0: roots are eig(Ā) = {0, −0.4} and two zeros
    let mut c = reference();
    c["system"]["a_d"] = json!([[0.0, 0.0], [0.0, 0.0]]);
    let o = run(&["spectral"], &write_config(dir.path(), &c), dir.path());
    let mut mods: Vec<f64> = stdout_json(&o)["roots"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["modulus"].as_f64().unwrap())
        .collect();
    mods.sort_by(f64::total_cmp);
    assert!(mods[..3].iter().all(|m| *m < 1e-8), "{mods:?}");
    assert!((mods[3] - 0.4).abs() < 1e-9);
}

#[test]
fn simulate_closed_loop_enters_band() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["simulate"], &config("underactuated.json"), dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = PathBuf::from(String::from_utf8_lossy(&o.stdout).trim());
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "k,x_1,x_2,s_1,u_1,delta_1,V,norm_s");
    assert_eq!(lines.count(), 32);
    let s: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    assert!(s["band_entry_step"].as_u64().unwrap() <= 3);
}

#[test]
fn simulate_reduced_lyapunov_decreases() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = reference();
    c["sim"]["mode"] = json!("reduced");
    let o = run(&["simulate"], &write_config(dir.path(), &c), dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
    let v: Vec<f64> = text
        .lines()
        .skip(1)
        .filter_map(|l| l.split(',').nth(6).filter(|c| !c.is_empty()).map(|c| c.parse().unwrap()))
        .collect();
    assert_eq!(v.len(), 31);
    for w in v.windows(2) {
        assert!(w[1] < w[0] || w[0] < 1e-20, "{w:?}");
    }
    let s: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    assert!(s["delta_v"]["max_violation"].as_f64().unwrap() <= 1e-10);
}

#[test]
fn simulate_is_deterministic_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("full_actuation.json");
    let read = |seed: &str, sub: &str| {
        let out = dir.path().join(sub);
        let o = run(&["simulate", "--seed", seed], &cfg, &out);
        assert_eq!(o.status.code(), Some(0));
        std::fs::read_to_string(out.join("trajectory.csv")).unwrap()
    };
    assert_eq!(read("7", "a"), read("7", "b"));
    assert_ne!(read("7", "c"), read("8", "d"));
}

#[test]
fn zero_horizon_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = reference();
    c["sim"]["horizon"] = json!(0);
    let o = run(&["simulate"], &write_config(dir.path(), &c), dir.path());
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("sim.horizon"));
}

#[test]
fn json_numbers_round_trip_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["certify"], &config("underactuated.json"), dir.path());
    let text = String::from_utf8_lossy(&o.stdout);
    let mu = stdout_json(&o)["certificate"]["mu"].as_f64().unwrap();
    let printed = text.lines().find(|l| l.trim_start().starts_with("\"mu\"")).unwrap();
    let digits: String = printed.chars().filter(|c| c.is_ascii_digit()).collect();
    assert!(digits.trim_start_matches('0').len() >= 12, "{printed}");
    assert!(mu > 0.0);
}
