#![allow(dead_code)]

use std::f64::consts::PI;
use std::path::PathBuf;

use ndarray::Array2;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use sar_refocus::axis::UniformAxis;
use sar_refocus::fft::{centered_dft_2d, Direction};
use sar_refocus::geometry::RadarParams;
use sar_refocus::pfa::{ComplexImage, Provenance, SpatialFrequencyGrid};
use sar_refocus::scenario::Scenario;
use sar_refocus::Exec;

pub fn scenario_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(format!("{name}.toml"))
}

pub fn load(name: &str) -> Scenario {
    Scenario::load(&scenario_path(name)).expect("scenario loads")
}

/// Radar used by the analytic checks: 512 x 512 at 5 GHz / 1 GHz.
pub fn radar() -> RadarParams {
    RadarParams {
        carrier_frequency: 5e9,
        range_bandwidth: 1e9,
        num_range_freq_samples: 512,
        num_pulses: 512,
        pulse_interval: 6.0 / 512.0,
    }
}

pub fn analytic_grid() -> SpatialFrequencyGrid {
    SpatialFrequencyGrid::new(&radar(), 0.9601, 0.01)
}

/// Random `ξ` coefficients (orders 2..=order) in seconds, normalised by `tau`.
pub fn random_xi(rng: &mut ChaCha8Rng, order: usize) -> Vec<f64> {
    let mut c = vec![0.0; order + 1];
    for v in c.iter_mut().skip(2) {
        *v = rng.random_range(-0.1..0.1);
    }
    c
}

/// Independent evaluation of `Σ c_k (t / tau)^k`.
pub fn power_sum(c: &[f64], tau: f64, t: f64) -> f64 {
    c.iter().enumerate().map(|(k, ck)| ck * (t / tau).powi(k as i32)).sum()
}

pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Point target at the centre of an `rows x cols` subimage with azimuth
/// phase error `phase(i)` on the data-domain rows, plus white noise at
/// `snr_db` per sample.
pub fn defocused_point(rows: usize, cols: usize, phase: impl Fn(usize) -> f64, snr_db: Option<f64>, seed: u64) -> ComplexImage {
    let mut data = Array2::from_shape_fn((rows, cols), |(i, _)| Complex64::from_polar(1.0, phase(i)));
    if let Some(snr) = snr_db {
        let sigma = (10f64.powf(-snr / 10.0) / 2.0).sqrt();
        let mut rng = seeded(seed);
        for v in data.iter_mut() {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            *v += Complex64::new(re * sigma, im * sigma);
        }
    }
    centered_dft_2d(&mut data, Direction::Forward, Exec::default());
    let grid = SpatialFrequencyGrid {
        x_axis: UniformAxis::centered(0.0, 2.0, rows),
        y_axis: UniformAxis::centered(170.0, 0.07, cols),
        y0: 170.0,
        warp_slope: 0.01,
    };
    ComplexImage { data, grid, provenance: Provenance { parent_rows: rows, parent_cols: cols, ..Default::default() } }
}

pub fn rms(a: &[f64]) -> f64 {
    (a.iter().map(|v| v * v).sum::<f64>() / a.len() as f64).sqrt()
}

pub fn two_pi() -> f64 {
    2.0 * PI
}
