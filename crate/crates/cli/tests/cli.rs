//! End-to-end checks of the command line front end: exit codes, builtin
//! listing, parameter documentation, and byte-level determinism.

use std::path::PathBuf;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_cocycle-lab"))
}

fn tmp_dir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("cocycle-lab-test-{name}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    dir
}

const SMALL_SCENARIO: &str = r#"
name = "small"
[alphabet]
size = 2
[measure]
weights = [0.5, 0.5]
[family]
kind = "rotation"
window = 0
angles = [0.61803398875, 0.38196601125]
[fixed_point]
symbol = 0
[homoclinic]
core = [1]
[cocycle]
kind = "diagonal"
entries = [[2.0, 0.0], [1.0, 0.0], [0.5, 0.0]]
[[experiment]]
name = "spectrum"
op = "lyapunov_spectrum"
seed = 7
params = { n_steps = 2000, n_orbits = 3 }
[[experiment]]
name = "center"
op = "center_exponent"
seed = 8
params = { n_steps = 2000, samples = 2 }
"#;

#[test]
fn list_names_at_least_six_scenarios() {
    let out = bin().arg("list").output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().count() >= 6, "{text}");
    for name in [
        "constant-diagonal",
        "bump-simple-d2",
        "bump-simple-d3",
        "pinching-resonance-fail",
        "bunching-fail",
        "ustate-dirac",
    ] {
        assert!(text.contains(name), "missing {name}");
    }
}

#[test]
fn describe_documents_defaults() {
    let out = bin().args(["describe", "check_twisting"]).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("tol_slope"));
    assert!(text.contains("1e-2"));
}

#[test]
fn describe_unknown_op_fails() {
    let out = bin().args(["describe", "nosuchop"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn run_small_scenario_and_rerun_byte_identical() {
    let dir = tmp_dir("det");
    let cfg = dir.join("small.toml");
    std::fs::create_dir_all(&dir).unwrap();
    std::fs::write(&cfg, SMALL_SCENARIO).unwrap();

    let out1 = dir.join("a");
    let out2 = dir.join("b");
    for out in [&out1, &out2] {
        let st = bin()
            .args(["run", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()])
            .status()
            .unwrap();
        assert_eq!(st.code(), Some(0));
    }
    for file in ["spectrum.csv", "spectrum.json", "center.json"] {
        let a = std::fs::read(out1.join(file)).unwrap();
        let b = std::fs::read(out2.join(file)).unwrap();
        assert_eq!(a, b, "{file} differs between reruns");
    }
    // Closed-form content check: exponents ln 2, 0, -ln 2.
    let csv = std::fs::read_to_string(out1.join("spectrum.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("index,value,stderr"));
    let top: f64 = lines
        .next()
        .unwrap()
        .split(',')
        .nth(1)
        .unwrap()
        .parse()
        .unwrap();
    assert!((top - 2.0f64.ln()).abs() < 1e-9);
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn alphabet_of_one_symbol_exits_2() {
    let dir = tmp_dir("alpha1");
    std::fs::create_dir_all(&dir).unwrap();
    let cfg = dir.join("bad.toml");
    std::fs::write(
        &cfg,
        SMALL_SCENARIO
            .replace("size = 2", "size = 1")
            .replace("weights = [0.5, 0.5]", "weights = [1.0]")
            .replace("angles = [0.61803398875, 0.38196601125]", "angles = [0.5]"),
    )
    .unwrap();
    let st = bin()
        .args([
            "run",
            cfg.to_str().unwrap(),
            "--out",
            dir.join("out").to_str().unwrap(),
        ])
        .status()
        .unwrap();
    assert_eq!(st.code(), Some(2));
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn unknown_op_in_block_exits_2() {
    let dir = tmp_dir("unknownop");
    std::fs::create_dir_all(&dir).unwrap();
    let cfg = dir.join("bad.toml");
    std::fs::write(
        &cfg,
        SMALL_SCENARIO.replace("op = \"center_exponent\"", "op = \"nosuchop\""),
    )
    .unwrap();
    let st = bin()
        .args([
            "run",
            cfg.to_str().unwrap(),
            "--out",
            dir.join("out").to_str().unwrap(),
        ])
        .status()
        .unwrap();
    assert_eq!(st.code(), Some(2));
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn numerical_error_exits_3_with_error_json() {
    // Oseledets lines of a repeated-modulus diagonal degenerate, which the
    // gap functional needs: numerical error class, exit 3.
    let dir = tmp_dir("numerr");
    std::fs::create_dir_all(&dir).unwrap();
    let cfg = dir.join("bad.toml");
    std::fs::write(
        &cfg,
        r#"
name = "degenerate"
[alphabet]
size = 2
[measure]
weights = [0.5, 0.5]
[family]
kind = "rotation"
window = 0
angles = [0.3, 0.7]
[fixed_point]
symbol = 0
[cocycle]
kind = "diagonal"
entries = [[2.0, 0.0], [2.0, 0.0], [1.0, 0.0]]
[[experiment]]
name = "gap"
op = "gap_functional"
seed = 1
params = { l = 1, n_max = 100 }
"#,
    )
    .unwrap();
    let out = dir.join("out");
    let st = bin()
        .args(["run", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()])
        .status()
        .unwrap();
    assert_eq!(st.code(), Some(3));
    let err: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("gap.error.json")).unwrap())
            .unwrap();
    assert_eq!(err["block"], "gap");
    assert!(err["error"].as_str().unwrap().len() > 4);
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn seed_override_changes_outputs() {
    // Needs a base-dependent cocycle: constant ones have seed-independent
    // per-orbit exponents.
    let dir = tmp_dir("seeds");
    std::fs::create_dir_all(&dir).unwrap();
    let cfg = dir.join("small.toml");
    std::fs::write(
        &cfg,
        r#"
name = "seedy"
[alphabet]
size = 2
[measure]
weights = [0.5, 0.5]
[family]
kind = "rotation"
window = 0
angles = [0.61803398875, 0.38196601125]
[fixed_point]
symbol = 0
[homoclinic]
core = [1]
[cocycle]
kind = "bump"
tau = [[2.0, 0.0], [0.5, 0.0]]
perturbation = [[[0.0, 0.0], [0.05, 0.0]], [[0.05, 0.0], [0.0, 0.0]]]
radius = 0.05
[[experiment]]
name = "spectrum"
op = "lyapunov_spectrum"
seed = 7
params = { n_steps = 3000, n_orbits = 3 }
"#,
    )
    .unwrap();
    let out1 = dir.join("a");
    let out2 = dir.join("b");
    bin()
        .args([
            "run",
            cfg.to_str().unwrap(),
            "--out",
            out1.to_str().unwrap(),
        ])
        .status()
        .unwrap();
    bin()
        .args([
            "run",
            cfg.to_str().unwrap(),
            "--out",
            out2.to_str().unwrap(),
            "--seed-override",
            "999",
        ])
        .status()
        .unwrap();
    let a = std::fs::read_to_string(out1.join("spectrum.json")).unwrap();
    let b = std::fs::read_to_string(out2.join("spectrum.json")).unwrap();
    assert_ne!(a, b);
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn show_prints_builtin() {
    let out = bin().args(["show", "bunching-fail"]).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("fiber_bunching"));
}
