use std::path::Path;
use std::process::Command;

use serde_json::Value;

fn forcefree(args: &[&str], out: &Path) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_forcefree"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

/// Header counts of a legacy VTK file against the rows that follow them.
fn check_vtk(path: &Path) {
    let text = std::fs::read_to_string(path).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "# vtk DataFile Version 3.0");
    assert_eq!(lines[2], "ASCII");
    let find = |key: &str| lines.iter().position(|l| l.starts_with(key));
    let count = |i: usize| lines[i].split_whitespace().nth(1).unwrap().parse::<usize>().unwrap();
    let points = find("POINTS ").unwrap();
    let np = count(points);
    assert!(lines[points + 1..=points + np].iter().all(|l| l.split_whitespace().count() == 3));
    let cells = find("CELLS ").or_else(|| find("POLYGONS ")).unwrap();
    let nc = count(cells);
    let total: usize = lines[cells].split_whitespace().nth(2).unwrap().parse().unwrap();
    let mut seen = 0;
    for l in &lines[cells + 1..=cells + nc] {
        let v: Vec<usize> = l.split_whitespace().map(|x| x.parse().unwrap()).collect();
        assert_eq!(v.len(), v[0] + 1);
        assert!(v[1..].iter().all(|&i| i < np));
        seen += v.len();
    }
    assert_eq!(seen, total);
    if let Some(types) = find("CELL_TYPES ") {
        assert_eq!(count(types), nc);
        assert!(lines[types + 1..=types + nc].iter().all(|l| *l == "10"));
    }
    if let Some(data) = find("CELL_DATA ") {
        assert_eq!(count(data), nc);
    }
}

#[test]
fn pipeline_on_solid_torus() {
    let dir = tempfile::tempdir().unwrap();
    let out = forcefree(&["pipeline", "--geometry", "solid-torus", "--n", "2,2,8", "--k", "1"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let betti = json(&dir.path().join("betti.json"));
    assert_eq!(betti["betti"], serde_json::json!([1, 1, 0, 0]));
    assert_eq!(betti["duality_holds"], Value::Bool(true));
    let cuts = json(&dir.path().join("cuts.json"));
    assert_eq!(cuts["cocycles"][0]["crossing"], serde_json::json!([1]));
    assert_eq!(cuts["cocycles"][0]["fibration_certificate"]["certified"], Value::Bool(true));
    let spectrum = json(&dir.path().join("spectrum.json"));
    let pairs = spectrum["pairs"].as_array().unwrap();
    assert_eq!(pairs.len(), 1);
    assert!(pairs[0]["residual"].as_f64().unwrap() <= 1e-8);
    let report = json(&dir.path().join("report.json"));
    assert_eq!(report["schema"], "forcefree.field/1");
    assert!(report["identity_max_violation"].as_f64().unwrap() <= 1e-12);

    for f in ["mesh.vtk", "cut.vtk", "modes.vtk", "twist.vtk"] {
        check_vtk(&dir.path().join(f));
    }
}

#[test]
fn homology_of_three_torus() {
    let dir = tempfile::tempdir().unwrap();
    let out = forcefree(&["homology", "--geometry", "torus3", "--n", "4"], dir.path());
    assert!(out.status.success());
    let betti = json(&dir.path().join("betti.json"));
    assert_eq!(betti["betti"], serde_json::json!([1, 3, 3, 1]));
    assert!(betti["torsion"].as_array().unwrap().iter().all(|t| t.as_array().unwrap().is_empty()));
}

#[test]
fn incompatible_bc_exits_with_error_json() {
    let dir = tempfile::tempdir().unwrap();
    let out = forcefree(&["beltrami", "--geometry", "cube", "--n", "3", "--bc", "closed-mesh"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"], "IncompatibleBC");
    assert_eq!(json(&dir.path().join("error.json"))["error"], "IncompatibleBC");
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "geometry = cube\nperiodic = xy\nn = 4\n").unwrap();
    // T²×I from the file; the flag widens it to the 3-torus.
    let out = forcefree(&["homology", "--config", cfg.to_str().unwrap()], &dir.path().join("a"));
    assert!(out.status.success());
    assert_eq!(json(&dir.path().join("a/betti.json"))["betti"], serde_json::json!([1, 2, 1, 0]));
    let out = forcefree(&["homology", "--config", cfg.to_str().unwrap(), "--periodic", "xyz"], &dir.path().join("b"));
    assert!(out.status.success());
    assert_eq!(json(&dir.path().join("b/betti.json"))["betti"], serde_json::json!([1, 3, 3, 1]));
}

#[test]
fn single_thread_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["pipeline", "--geometry", "box-ring", "--n", "5", "--threads", "1"];
    for run in ["a", "b"] {
        let out = forcefree(&args, &dir.path().join(run));
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    for f in ["mesh.json", "betti.json", "cuts.json", "spectrum.json", "report.json"] {
        let a = std::fs::read(dir.path().join("a").join(f)).unwrap();
        let b = std::fs::read(dir.path().join("b").join(f)).unwrap();
        assert_eq!(a, b, "{f}");
    }
}
