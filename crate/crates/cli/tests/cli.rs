use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use sar_refocus::io::{GridFile, GridKind};
use sar_refocus::scenario::Scenario;

fn scenario(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(format!("{name}.toml"))
}

fn sarfocus(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sarfocus")).args(args).output().expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn report_value(stdout: &str, key: &str) -> f64 {
    stdout
        .lines()
        .find_map(|l| l.strip_prefix(&format!("{key}=")))
        .unwrap_or_else(|| panic!("no {key} in report"))
        .parse()
        .unwrap()
}

#[test]
fn simulate_pfa_refocus_reduces_entropy() {
    let dir = tempfile::tempdir().unwrap();
    let raw = dir.path().join("raw.grid");
    let image = dir.path().join("image.grid");
    let sub = dir.path().join("sub.grid");
    let stages = dir.path().join("stages");
    let report = dir.path().join("report.txt");
    let sc = scenario("constant_velocity");

    let out = sarfocus(&["simulate", "--scenario", s(&sc), "--out", s(&raw)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let out = sarfocus(&["pfa", "--input", s(&raw), "--scenario", s(&sc), "--out", s(&image), "--emit-stages", s(&stages)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(std::fs::read_dir(&stages).unwrap().count(), 4);

    // Region around the target found in the matched reference.
    let scen = Scenario::load(&sc).unwrap();
    let reference = scen.matched_reference(0, sar_refocus::Exec::default()).unwrap();
    let pk = sar_refocus::metrics::peak_index(&reference.data).unwrap();
    let roi = sar_refocus::refocus::RegionOfInterest::centered_on(pk, (256, 64), reference.dim()).unwrap();
    let roi = roi.to_string();

    let out = sarfocus(&["refocus", "--input", s(&image), "--roi", &roi, "--out", s(&sub), "--report", s(&report)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(report_value(&stdout, "entropy_after") < report_value(&stdout, "entropy_before"));
    assert_eq!(std::fs::read_to_string(&report).unwrap(), stdout);
    let header = sar_refocus::io::read_header(&sub).unwrap();
    assert_eq!((header.kind, header.rows, header.cols), (GridKind::Image, 256, 64));

    let out = sarfocus(&["metrics", "--input", s(&sub)]);
    assert!(out.status.success());
    assert!(String::from_utf8(out.stdout).unwrap().starts_with("entropy="));

    let png = dir.path().join("sub.png");
    assert!(sarfocus(&["export", "--input", s(&sub), "--out", s(&png)]).status.success());
    assert!(png.is_file());
}

#[test]
fn out_of_bounds_roi_fails_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let raw = dir.path().join("raw.grid");
    let image = dir.path().join("image.grid");
    let sub = dir.path().join("sub.grid");
    let sc = scenario("stationary");
    assert!(sarfocus(&["simulate", "--scenario", s(&sc), "--out", s(&raw)]).status.success());
    assert!(sarfocus(&["pfa", "--input", s(&raw), "--scenario", s(&sc), "--out", s(&image)]).status.success());
    let out = sarfocus(&["refocus", "--input", s(&image), "--roi", "480,0,64,64", "--out", s(&sub)]);
    assert_eq!(out.status.code(), Some(7));
    assert!(!out.stderr.is_empty());
    assert!(!sub.exists());
}

#[test]
fn oracle_surface_matches_library() {
    let dir = tempfile::tempdir().unwrap();
    let sc = scenario("accelerating");
    let out = sarfocus(&["oracle", "--scenario", s(&sc), "--out-dir", s(dir.path())]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let oracle = Scenario::load(&sc).unwrap().oracle(0).unwrap();
    let surface = GridFile::read(&dir.path().join("surface.grid")).unwrap().into_surface().unwrap();
    let expected = oracle.surface.values.mapv(|v| v as f32 as f64);
    assert_eq!(surface.values, expected);
    let ape = GridFile::read(&dir.path().join("ape.grid")).unwrap().into_profile().unwrap();
    let expected: Vec<f64> = oracle.ape.phi0.iter().map(|v| *v as f32 as f64).collect();
    assert_eq!(ape.phi0, expected);
}

#[test]
fn seed_controls_noise() {
    let dir = tempfile::tempdir().unwrap();
    let sc = scenario("constant_velocity");
    let paths: Vec<PathBuf> = ["a", "b", "c"].iter().map(|n| dir.path().join(format!("{n}.grid"))).collect();
    for (p, seed) in paths.iter().zip(["1", "1", "2"]) {
        assert!(sarfocus(&["simulate", "--scenario", s(&sc), "--out", s(p), "--seed", seed]).status.success());
    }
    let bytes: Vec<Vec<u8>> = paths.iter().map(|p| std::fs::read(p).unwrap()).collect();
    assert_eq!(bytes[0], bytes[1]);
    assert_ne!(bytes[0], bytes[2]);
}

#[test]
fn usage_and_file_errors_have_distinct_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(sarfocus(&["simulate", "--bogus"]).status.code(), Some(2));
    assert_eq!(sarfocus(&["inspect", "--input", "/nonexistent/x.grid"]).status.code(), Some(2));

    let bad = dir.path().join("bad.grid");
    std::fs::write(&bad, b"garbage\n").unwrap();
    assert_eq!(sarfocus(&["inspect", "--input", s(&bad)]).status.code(), Some(4));

    let raw = dir.path().join("raw.grid");
    assert!(sarfocus(&["simulate", "--scenario", s(&scenario("stationary")), "--out", s(&raw)]).status.success());
    let bytes = std::fs::read(&raw).unwrap();
    let cut = dir.path().join("cut.grid");
    std::fs::write(&cut, &bytes[..bytes.len() / 2]).unwrap();
    assert_eq!(sarfocus(&["metrics", "--input", s(&cut)]).status.code(), Some(5));

    let text = String::from_utf8_lossy(&bytes).into_owned();
    let v2 = dir.path().join("v2.grid");
    let header_end = text.find("end_header\n").unwrap();
    let mut patched = text[..header_end].replace("version=1", "version=9").into_bytes();
    patched.extend_from_slice(&bytes[header_end..]);
    std::fs::write(&v2, patched).unwrap();
    assert_eq!(sarfocus(&["inspect", "--input", s(&v2)]).status.code(), Some(6));

    let out = sarfocus(&["inspect", "--input", s(&raw)]);
    assert!(out.status.success());
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("rows=512") && stdout.contains("cols=512") && stdout.contains("stage=raw"));
}
