mod common;

use std::io::Cursor;

use common::*;
use ndarray::Array2;
use num_complex::Complex64;
use rand::Rng;
use sar_refocus::echo_sim::Stage;
use sar_refocus::io::{
    magnitude_to_gray, read_header, read_phase_history, write_phase_history, GridFile, GridFileError, GridKind,
};
use sar_refocus::pfa::{polar_format, PfaOptions};
use sar_refocus::scenario::ScenarioConfig;
use sar_refocus::{Error, Exec};

fn small_scenario() -> sar_refocus::scenario::Scenario {
    let mut cfg = ScenarioConfig::load(&scenario_path("constant_velocity")).unwrap();
    cfg.radar.num_pulses = 64;
    cfg.radar.num_range_freq_samples = 64;
    sar_refocus::scenario::Scenario::from_config(&cfg).unwrap()
}

fn f32_exact(ph: &mut Array2<Complex64>) {
    ph.mapv_inplace(|v| Complex64::new(v.re as f32 as f64, v.im as f32 as f64));
}

#[test]
fn phase_history_round_trip_is_bit_exact() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("raw.grid");
    let sc = small_scenario();
    let mut ph = sc.simulate(Exec::default()).unwrap();
    f32_exact(&mut ph.data);
    write_phase_history(&ph, &path).unwrap();
    let back = read_phase_history(&path).unwrap();
    assert_eq!(back.data, ph.data);
    assert_eq!(back.stage, Stage::Raw);
    assert_eq!(back.t_axis, ph.t_axis);
    assert_eq!(back.fr_axis, ph.fr_axis);
    assert_eq!(back.carrier_frequency, ph.carrier_frequency);

    let again = dir.path().join("again.grid");
    write_phase_history(&back, &again).unwrap();
    assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(&again).unwrap());
}

#[test]
fn random_payloads_survive_round_trip() {
    let mut rng = seeded(11);
    let sc = small_scenario();
    let raw = sc.simulate(Exec::default()).unwrap();
    let mut img = sc.form_image(&raw, &PfaOptions::default()).unwrap().image;
    img.data.mapv_inplace(|_| Complex64::new(rng.random_range(-1e3..1e3), rng.random::<f64>()));
    f32_exact(&mut img.data);
    let file = GridFile::from_image(&img);
    let back = GridFile::from_reader(Cursor::new(file.to_bytes())).unwrap();
    assert_eq!(back, file);
    assert_eq!(back.into_image().unwrap().data, img.data);
}

#[test]
fn simulation_files_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let sc = small_scenario();
    let a = dir.path().join("a.grid");
    let b = dir.path().join("b.grid");
    write_phase_history(&sc.simulate(Exec::Sequential).unwrap(), &a).unwrap();
    write_phase_history(&small_scenario().simulate(Exec::Parallel).unwrap(), &b).unwrap();
    assert_eq!(std::fs::read(a).unwrap(), std::fs::read(b).unwrap());
}

#[test]
fn truncated_payload_is_reported() {
    let sc = small_scenario();
    let bytes = GridFile::from_phase_history(&sc.simulate(Exec::default()).unwrap()).to_bytes();
    let cut = &bytes[..bytes.len() - 100];
    match GridFile::from_reader(Cursor::new(cut)) {
        Err(GridFileError::Truncated { expected, found }) => {
            assert_eq!(expected, 64 * 64 * 8);
            assert_eq!(found, expected - 100);
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn corrupt_headers_are_rejected() {
    let sc = small_scenario();
    let text = GridFile::from_phase_history(&sc.simulate(Exec::default()).unwrap()).header.to_text();
    let cases = [
        text.replace("SARGRID", "NOTGRID"),
        text.replace("rows=64", "rows=sixty"),
        text.replace("stage=raw", "stage=focused"),
        text.replace("end_header\n", ""),
        text.replace("kind=phase_history", "kind=volume"),
    ];
    for bad in cases {
        assert!(matches!(GridFile::from_reader(Cursor::new(bad.into_bytes())), Err(GridFileError::CorruptHeader(_))));
    }
}

#[test]
fn unknown_version_is_rejected() {
    let sc = small_scenario();
    let file = GridFile::from_phase_history(&sc.simulate(Exec::default()).unwrap());
    let mut bytes = file.header.to_text().replace("version=1", "version=2").into_bytes();
    bytes.extend(std::iter::repeat_n(0u8, file.header.payload_bytes()));
    assert!(matches!(GridFile::from_reader(Cursor::new(bytes)), Err(GridFileError::UnsupportedVersion(2))));
}

#[test]
fn header_can_be_inspected_alone() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("raw.grid");
    let sc = small_scenario();
    write_phase_history(&sc.simulate(Exec::default()).unwrap(), &path).unwrap();
    let h = read_header(&path).unwrap();
    assert_eq!(h.kind, GridKind::PhaseHistory);
    assert_eq!((h.rows, h.cols), (64, 64));
    assert_eq!(h.stage, Some(Stage::Raw));
    assert_eq!(h.y0, None);
    assert!(h.to_text().contains("y0=none"));
}

#[test]
fn wrong_kind_is_rejected() {
    let sc = small_scenario();
    let file = GridFile::from_phase_history(&sc.simulate(Exec::default()).unwrap());
    assert!(matches!(file.into_image(), Err(Error::Grid(GridFileError::KindMismatch { .. }))));
}

#[test]
fn loaded_stage_tag_is_enforced() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("stage.grid");
    let sc = small_scenario();
    let mut ph = sc.simulate(Exec::default()).unwrap();
    ph.stage = Stage::RangeResampled;
    write_phase_history(&ph, &path).unwrap();
    let back = read_phase_history(&path).unwrap();
    let err = polar_format(&back, &sc.params, &sc.geometry, &PfaOptions::default()).unwrap_err();
    assert!(matches!(err, Error::StageMismatch { expected: Stage::Raw, found: Stage::RangeResampled }));
}

#[test]
fn constant_magnitude_exports_white() {
    let data = Array2::from_elem((8, 12), Complex64::new(0.0, 3.0));
    let img = magnitude_to_gray(&data, 40.0).unwrap();
    assert_eq!((img.width(), img.height()), (12, 8));
    assert!(img.pixels().all(|p| p.0[0] == 255));
}

#[test]
fn impulse_exports_single_white_pixel() {
    let mut data = Array2::from_elem((8, 12), Complex64::new(0.0, 0.0));
    data[[2, 5]] = Complex64::new(1.0, 0.0);
    let img = magnitude_to_gray(&data, 40.0).unwrap();
    for (x, y, p) in img.enumerate_pixels() {
        assert_eq!(p.0[0], if (x, y) == (5, 2) { 255 } else { 0 });
    }
    assert!(matches!(magnitude_to_gray(&(data.clone() * 0.0), 40.0), Err(Error::ZeroEnergy)));
}

#[test]
fn png_export_writes_decodable_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("out.png");
    let mut data = Array2::from_elem((4, 4), Complex64::new(0.01, 0.0));
    data[[1, 1]] = Complex64::new(1.0, 0.0);
    sar_refocus::io::export_magnitude(&data, &path, 40.0).unwrap();
    let decoded = image::open(&path).unwrap().to_luma8();
    assert_eq!(decoded, magnitude_to_gray(&data, 40.0).unwrap());
}
