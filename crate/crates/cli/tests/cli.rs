use std::path::Path;
use std::process::{Command, Output};

fn abundant(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_abundant")).args(args).current_dir(cwd).output().expect("run abundant")
}

fn json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).expect("JSON report on stdout")
}

fn export(name: &str, dir: &Path) -> std::path::PathBuf {
    let out = abundant(&["catalog", "export", name], dir);
    assert!(out.status.success());
    let path = dir.join(format!("{name}.toml"));
    std::fs::write(&path, &out.stdout).unwrap();
    path
}

#[test]
fn verify_exported_sw1_passes() {
    let dir = tempfile::tempdir().unwrap();
    let spec = export("sw1", dir.path());
    let out = abundant(&["verify", spec.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r = json(&out);
    assert_eq!(r["schema_version"], 1);
    assert_eq!(r["passed"], true);
    for c in r["sections"]["conditions"]["conditions"].as_array().unwrap() {
        assert!(c["max_residual"].as_f64().unwrap() < 1e-8, "{c}");
    }
}

#[test]
fn scaled_cubic_fails_naming_the_equations() {
    let dir = tempfile::tempdir().unwrap();
    let spec = export("sw1", dir.path());
    let text = std::fs::read_to_string(&spec).unwrap();
    let s_line = text.lines().find(|l| l.starts_with("s = ")).unwrap();
    let scaled: Vec<String> = s_line["s = [".len()..s_line.len() - 1]
        .split(", ")
        .map(|c| format!("\"1.1*({})\"", c.trim_matches('"')))
        .collect();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, text.replace(s_line, &format!("s = [{}]", scaled.join(", ")))).unwrap();
    let out = abundant(&["verify", bad.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(1));
    let failing: Vec<String> =
        json(&out)["failing"].as_array().unwrap().iter().map(|v| v.as_str().unwrap().to_string()).collect();
    assert!(failing.iter().any(|f| f == "conditions/DXi.2D"), "{failing:?}");
    assert!(String::from_utf8_lossy(&out.stderr).contains("DXi.2D"));
}

#[test]
fn reconstruct_oscillator_emits_mesh_on_a_quadric() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let out = abundant(
        &["reconstruct", "catalog:ho-2", "--grid", "12x12", "--step", "1e-2", "--out", out_dir.to_str().unwrap()],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r = json(&out);
    assert!(r["data"]["quadric_fit"]["ratio"].as_f64().unwrap() < 1e-8);
    let obj = std::fs::read_to_string(out_dir.join("harmonic-oscillator-2.obj")).unwrap();
    assert_eq!(obj.lines().filter(|l| l.starts_with("v ")).count(), 144);
    assert_eq!(obj.lines().filter(|l| l.starts_with("f ")).count(), 2 * 11 * 11);
    assert!(out_dir.join("report.json").exists());
}

#[test]
fn reports_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    for args in [["classify", "catalog:sw2", "--seed", "4"], ["conformal", "catalog:sw1", "--seed", "2"]] {
        let a = abundant(&args, dir.path());
        let b = abundant(&args, dir.path());
        assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
        assert_eq!(a.stdout, b.stdout);
    }
}

#[test]
fn exit_codes_for_io_and_parse_errors() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(abundant(&["verify", "missing.toml"], dir.path()).status.code(), Some(3));
    std::fs::write(dir.path().join("broken.toml"), "dimension = 2\ncoords = [\"x\"]\n").unwrap();
    assert_eq!(abundant(&["verify", "broken.toml"], dir.path()).status.code(), Some(2));
    assert_eq!(abundant(&["verify", "catalog:sw1", "--grid", "3x3x3"], dir.path()).status.code(), Some(2));
    assert_eq!(abundant(&["verify", "catalog:nothing"], dir.path()).status.code(), Some(2));
}

#[test]
fn catalog_entries_round_trip_through_toml() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["harmonic-oscillator-3", "s9-generic", "sw1-3"] {
        let spec = export(name, dir.path());
        let a = abundant(&["integrability", spec.to_str().unwrap(), "--random", "5"], dir.path());
        let b = abundant(&["integrability", &format!("catalog:{name}"), "--random", "5"], dir.path());
        assert_eq!(a.status.code(), Some(0), "{name}: {}", String::from_utf8_lossy(&a.stderr));
        assert_eq!(a.stdout, b.stdout, "{name}");
    }
}
