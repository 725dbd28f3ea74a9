use std::path::Path;
use std::process::{Command, Output};

fn compgrowth(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_compgrowth")).args(args).output().unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn validate_reports_default_laws_as_admissible() {
    let tmp = tempfile::tempdir().unwrap();
    let o = compgrowth(&["validate", "--out", path(tmp.path())]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(tmp.path().join("assumptions.json").exists());
}

#[test]
fn validate_fails_with_code_two_on_an_atom_at_zero() {
    let tmp = tempfile::tempdir().unwrap();
    let o = compgrowth(&["validate", "--law1", "zie:0.6:1", "--law2", "zie:0.6:2", "--out", path(tmp.path())]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn malformed_input_exits_with_code_two() {
    let tmp = tempfile::tempdir().unwrap();
    let o = compgrowth(&["simulate", "--law1", "gamma:2", "--out", path(tmp.path())]);
    assert_eq!(o.status.code(), Some(2));
    let cfg = tmp.path().join("bad.json");
    std::fs::write(&cfg, r#"{"kind": "single-run", "box_radius": -3}"#).unwrap();
    let o = compgrowth(&["simulate", "--config", path(&cfg), "--out", path(tmp.path())]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn no_survivors_exits_with_code_three() {
    let tmp = tempfile::tempdir().unwrap();
    let o = compgrowth(&[
        "density", "--box", "40", "--law2", "exp:20", "--replicas", "3", "--condition", "g1", "--out",
        path(tmp.path()),
    ]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stdout));
}

#[test]
fn simulate_then_replay_is_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    let o = compgrowth(&["simulate", "--box", "25", "--seed", "9", "--out", path(&a)]);
    assert_eq!(o.status.code(), Some(0));
    for f in ["trace.jsonl", "final.csv", "outcome.json", "manifest.json"] {
        assert!(a.join(f).exists(), "{f}");
    }
    let o = compgrowth(&["replay", path(&a.join("manifest.json")), "--out", path(&b), "--workers", "2"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stdout).contains("replay identical"));
    assert_eq!(std::fs::read(a.join("trace.jsonl")).unwrap(), std::fs::read(b.join("trace.jsonl")).unwrap());
}

#[test]
fn sweep_writes_interval_table() {
    let tmp = tempfile::tempdir().unwrap();
    let o = compgrowth(&[
        "sweep", "--box", "20", "--replicas", "10", "--axis", "species2", "--laws", "exp:1,exp:1.5", "--out",
        path(tmp.path()),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(tmp.path().join("sweep.csv")).unwrap();
    assert!(csv.starts_with("index,box_radius,law1,law2,replicas,g1,g2,coex,p_g1,p_g1_lo,p_g1_hi"));
    assert_eq!(csv.lines().count(), 3);
}

#[test]
fn sweep_repeats_at_each_box_size() {
    let tmp = tempfile::tempdir().unwrap();
    let o = compgrowth(&[
        "sweep", "--replicas", "6", "--axis", "species2", "--laws", "exp:1,exp:1.5", "--box-sizes", "10,20",
        "--out", path(tmp.path()),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(tmp.path().join("sweep.csv")).unwrap();
    let radii: Vec<&str> = csv.lines().skip(1).map(|l| l.split(',').nth(1).unwrap()).collect();
    assert_eq!(radii, vec!["10", "10", "20", "20"]);
}

#[test]
fn config_file_is_read_and_flags_override_it() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("spec.json");
    std::fs::write(
        &cfg,
        r#"{"kind": "single-run", "box_radius": 12, "replicas": 1, "base_seed": 4,
            "law1": {"family": "exponential", "rate": "1"},
            "law2": {"family": "uniform", "a": "0", "b": "1"}}"#,
    )
    .unwrap();
    let out = tmp.path().join("o");
    let o = compgrowth(&["simulate", "--config", path(&cfg), "--seed", "5", "--out", path(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let m = std::fs::read_to_string(out.join("manifest.json")).unwrap();
    assert!(m.contains("\"base_seed\": 5"));
    assert!(m.contains("\"box_radius\": 12"));
    assert!(m.contains("\"family\": \"uniform\""));
}
