//! Point-target phase-history synthesis and motion compensation to the
//! scene centre.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::axis::UniformAxis;
use crate::error::{Error, Result};
use crate::geometry::{target_range, CollectionGeometry, RadarParams, Trajectory, SPEED_OF_LIGHT};
use crate::parallel::{for_each_row, Exec};

/// Processing stage of a phase-history grid. Stages only move forward.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Raw,
    MotionCompensated,
    RangeResampled,
    RcmLinearized,
    Keystoned,
}

impl Stage {
    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Raw => "raw",
            Stage::MotionCompensated => "motion_compensated",
            Stage::RangeResampled => "range_resampled",
            Stage::RcmLinearized => "rcm_linearized",
            Stage::Keystoned => "keystoned",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Stage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "raw" => Stage::Raw,
            "motion_compensated" => Stage::MotionCompensated,
            "range_resampled" => Stage::RangeResampled,
            "rcm_linearized" => Stage::RcmLinearized,
            "keystoned" => Stage::Keystoned,
            other => return Err(Error::InvalidInput(format!("unknown stage tag `{other}`"))),
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PointTarget {
    pub trajectory: Trajectory,
    pub reflectivity: Complex64,
}

impl PointTarget {
    pub fn new(trajectory: Trajectory, reflectivity: Complex64) -> Result<Self> {
        if !(reflectivity.norm() > 0.0) || !reflectivity.is_finite() {
            return Err(Error::InvalidInput("target reflectivity must be finite and nonzero".into()));
        }
        Ok(Self { trajectory, reflectivity })
    }
}

/// 2-D complex samples indexed `[pulse, range frequency]`.
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseHistory {
    pub data: Array2<Complex64>,
    /// Slow time, s.
    pub t_axis: UniformAxis,
    /// Range frequency relative to the carrier, Hz.
    pub fr_axis: UniformAxis,
    pub carrier_frequency: f64,
    pub stage: Stage,
    /// Set when simulated from an empty target list.
    pub empty_scene: bool,
    /// Fraction of samples zero-filled by resampling steps so far.
    pub invalid_fraction: f64,
}

impl PhaseHistory {
    pub fn num_pulses(&self) -> usize {
        self.data.nrows()
    }

    pub fn num_freqs(&self) -> usize {
        self.data.ncols()
    }

    pub fn expect_stage(&self, expected: Stage) -> Result<()> {
        if self.stage != expected {
            return Err(Error::StageMismatch { expected, found: self.stage });
        }
        Ok(())
    }

    pub fn energy(&self) -> f64 {
        crate::fft::energy(&self.data)
    }

    pub(crate) fn validate_shape(&self) -> Result<()> {
        if self.data.dim() != (self.t_axis.len, self.fr_axis.len) {
            return Err(Error::GridMismatch(format!(
                "data {:?} does not match axes ({}, {})",
                self.data.dim(),
                self.t_axis.len,
                self.fr_axis.len
            )));
        }
        Ok(())
    }
}

/// Optional additive complex white Gaussian noise.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    /// Per-sample SNR relative to the mean signal power, dB.
    pub snr_db: f64,
    pub seed: u64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SimOptions {
    pub noise: Option<NoiseSpec>,
    pub exec: Exec,
}

/// Two-way phase wavenumber `4π (f_c + f_r) / c`.
#[inline]
pub fn wavenumber(fc: f64, fr: f64) -> f64 {
    4.0 * PI * (fc + fr) / SPEED_OF_LIGHT
}

/// Noiseless simulation with the default execution policy.
pub fn simulate(params: &RadarParams, geometry: &CollectionGeometry, targets: &[PointTarget]) -> Result<PhaseHistory> {
    simulate_with(params, geometry, targets, &SimOptions::default())
}

/// `S(t, f_r) = Σ A exp{-j 4π (f_c + f_r) r_m(t) / c}` for every target.
pub fn simulate_with(
    params: &RadarParams,
    geometry: &CollectionGeometry,
    targets: &[PointTarget],
    opts: &SimOptions,
) -> Result<PhaseHistory> {
    params.validate()?;
    if geometry.num_pulses() != params.num_pulses {
        return Err(Error::GridMismatch(format!(
            "geometry has {} pulses, radar expects {}",
            geometry.num_pulses(),
            params.num_pulses
        )));
    }
    let histories: Vec<(Vec<f64>, Complex64)> = targets
        .iter()
        .map(|tg| Ok((target_range(&tg.trajectory, &geometry.platform)?, tg.reflectivity)))
        .collect::<Result<_>>()?;
    simulate_ranges(params, &histories, opts)
}

/// Simulate directly from per-target range histories `(r_m(t), A)`.
pub fn simulate_ranges(params: &RadarParams, histories: &[(Vec<f64>, Complex64)], opts: &SimOptions) -> Result<PhaseHistory> {
    params.validate()?;
    if let Some((r, _)) = histories.iter().find(|(r, _)| r.len() != params.num_pulses) {
        return Err(Error::GridMismatch(format!(
            "range history has {} samples, radar expects {}",
            r.len(),
            params.num_pulses
        )));
    }
    let ranges: Vec<&Vec<f64>> = histories.iter().map(|(r, _)| r).collect();
    let amps: Vec<Complex64> = histories.iter().map(|(_, a)| *a).collect();

    let fr_axis = params.fr_axis();
    let fc = params.carrier_frequency;
    let (np, nf) = (params.num_pulses, params.num_range_freq_samples);
    let mut data = Array2::<Complex64>::zeros((np, nf));
    let slice = data.as_slice_mut().expect("fresh array is contiguous");
    for_each_row(opts.exec, slice, nf, |n, row| {
        for (m, v) in row.iter_mut().enumerate() {
            let k = wavenumber(fc, fr_axis.value(m));
            *v = ranges
                .iter()
                .zip(&amps)
                .map(|(r, a)| a * Complex64::from_polar(1.0, -k * r[n]))
                .sum();
        }
    });

    if let Some(noise) = opts.noise {
        add_noise(&mut data, noise);
    }

    Ok(PhaseHistory {
        data,
        t_axis: params.t_axis(),
        fr_axis,
        carrier_frequency: fc,
        stage: Stage::Raw,
        empty_scene: histories.is_empty(),
        invalid_fraction: 0.0,
    })
}

/// Sequential, seeded noise draw so results are independent of the policy.
fn add_noise(data: &mut Array2<Complex64>, noise: NoiseSpec) {
    let n = data.len();
    if n == 0 {
        return;
    }
    let power = data.iter().map(|v| v.norm_sqr()).sum::<f64>() / n as f64;
    if power == 0.0 {
        return;
    }
    let sigma = (power / 10f64.powf(noise.snr_db / 10.0) / 2.0).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
    for v in data.iter_mut() {
        let re: f64 = StandardNormal.sample(&mut rng);
        let im: f64 = StandardNormal.sample(&mut rng);
        *v += Complex64::new(re * sigma, im * sigma);
    }
}

/// Phasor `exp{+j 4π (f_c + f_r) r / c}` that moves range `r` to zero.
pub fn compensation_phasor(fc: f64, fr: f64, range: f64) -> Complex64 {
    Complex64::from_polar(1.0, wavenumber(fc, fr) * range)
}

/// Motion-compensate a raw phase history to the scene centre.
pub fn motion_compensate(ph: &PhaseHistory, geometry: &CollectionGeometry) -> Result<PhaseHistory> {
    motion_compensate_with(ph, geometry, Exec::default())
}

pub fn motion_compensate_with(ph: &PhaseHistory, geometry: &CollectionGeometry, exec: Exec) -> Result<PhaseHistory> {
    ph.expect_stage(Stage::Raw)?;
    ph.validate_shape()?;
    if geometry.num_pulses() != ph.num_pulses() {
        return Err(Error::GridMismatch("geometry and phase history pulse counts differ".into()));
    }
    let mut out = ph.clone();
    let nf = ph.num_freqs();
    let fc = ph.carrier_frequency;
    let fr_axis = ph.fr_axis;
    let rc = &geometry.r_c;
    let slice = out.data.as_slice_mut().expect("owned array is contiguous");
    for_each_row(exec, slice, nf, |n, row| {
        for (m, v) in row.iter_mut().enumerate() {
            *v *= compensation_phasor(fc, fr_axis.value(m), rc[n]);
        }
    });
    out.stage = Stage::MotionCompensated;
    Ok(out)
}
