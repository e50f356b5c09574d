//! Polar-format image formation, decomposed into range-frequency scaling,
//! an RCM-linearising azimuth warp and the keystone transform, followed by
//! a 2-D Fourier transform over the `(X, Y)` spatial-frequency grid.
//!
//! Image convention: rows are azimuth (`X`), columns are range (`Y`). The
//! image is the centred unitary *forward* DFT over both axes, so a
//! data-domain phase `+j(a0 Y + a1 X)` appears at positive pixel offsets
//! `a1 dX Nx / 2π` (azimuth) and `a0 dY Ny / 2π` (range) from the centre
//! pixel `(Nx/2, Ny/2)`.

use std::f64::consts::PI;
use std::sync::atomic::{AtomicUsize, Ordering};

use ndarray::Array2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::axis::UniformAxis;
use crate::echo_sim::{motion_compensate_with, PhaseHistory, Stage};
use crate::error::{Error, Result};
use crate::fft::{centered_dft_2d, centered_dft_rows, Direction};
use crate::geometry::{CollectionGeometry, RadarParams, SPEED_OF_LIGHT};
use crate::interp::{lagrange4, KaiserSinc};
use crate::parallel::{for_each_row, map_indices, Exec};

/// `(X, Y)` sampling of the polar-formatted data.
///
/// `X = Y0 t` and `Y = (4π sin φ_ref / c)(f_c + f_r)`, so `X / Y0` is slow
/// time in seconds. All `t ↔ X` conversions go through this type.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpatialFrequencyGrid {
    pub x_axis: UniformAxis,
    pub y_axis: UniformAxis,
    pub y0: f64,
    /// `d(tan θ)/dt` at aperture centre; converts azimuth image units to metres.
    pub warp_slope: f64,
}

impl SpatialFrequencyGrid {
    pub fn new(params: &RadarParams, phi_ref: f64, warp_slope: f64) -> Self {
        let kr = 4.0 * PI * phi_ref.sin() / SPEED_OF_LIGHT;
        let y0 = kr * params.carrier_frequency;
        let t = params.t_axis();
        let fr = params.fr_axis();
        Self {
            x_axis: UniformAxis::new(y0 * t.start, y0 * t.step, t.len),
            y_axis: UniformAxis::new(kr * (params.carrier_frequency + fr.start), kr * fr.step, fr.len),
            y0,
            warp_slope,
        }
    }

    pub fn from_geometry(params: &RadarParams, geometry: &CollectionGeometry) -> Result<Self> {
        let warp = build_azimuth_warp(geometry)?;
        Ok(Self::new(params, geometry.phi_ref, warp.slope))
    }

    /// Slow time (s) for a given `X`.
    #[inline]
    pub fn x_to_t(&self, x: f64) -> f64 {
        x / self.y0
    }

    #[inline]
    pub fn t_to_x(&self, t: f64) -> f64 {
        t * self.y0
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.x_axis.len, self.y_axis.len)
    }

    /// Grid of an `rows x cols` crop of an image formed on this grid:
    /// same spectral span, coarser spacing.
    pub fn cropped(&self, rows: usize, cols: usize) -> Self {
        Self {
            x_axis: self.x_axis.resampled(rows),
            y_axis: self.y_axis.resampled(cols),
            ..*self
        }
    }

    /// Keep the central `cols` samples of the `Y` band.
    pub fn y_band_reduced(&self, cols: usize) -> Self {
        Self {
            y_axis: UniformAxis::centered(self.y0, self.y_axis.step, cols),
            ..*self
        }
    }

    /// Image pixel spacing in range, metres.
    pub fn range_pixel_spacing(&self) -> f64 {
        2.0 * PI / (self.y_axis.len as f64 * self.y_axis.step)
    }

    /// Image pixel spacing in azimuth, metres.
    pub fn azimuth_pixel_spacing(&self) -> f64 {
        2.0 * PI / (self.x_axis.len as f64 * self.x_axis.step * self.warp_slope)
    }
}

/// `δ_r = sin φ_ref / (sin φ cos θ)`.
pub fn range_scale_factor(theta: f64, phi: f64, phi_ref: f64) -> Result<f64> {
    let c = theta.cos();
    let s = phi.sin();
    if !(c > 0.0) || !(s > 0.0) || !(phi_ref.sin() > 0.0) {
        return Err(Error::DegenerateGeometry(format!(
            "range scale undefined for θ={theta}, φ={phi}, φ_ref={phi_ref}"
        )));
    }
    Ok(phi_ref.sin() / (s * c))
}

/// Azimuth time warp `t → ϑ_a(t)` with `tan θ(ϑ_a(t)) = K t`.
#[derive(Clone, Debug, PartialEq)]
pub struct AzimuthWarp {
    /// `ϑ_a` evaluated on the slow-time grid.
    pub times: Vec<f64>,
    /// `K = d(tan θ)/dt` at aperture centre.
    pub slope: f64,
    /// Grid points whose warped time had to be extrapolated.
    pub extrapolated: usize,
}

impl AzimuthWarp {
    pub fn identity(t_axis: &UniformAxis, slope: f64) -> Self {
        Self { times: t_axis.values(), slope, extrapolated: 0 }
    }
}

/// Central derivative of uniformly sampled `v` at index `c`.
pub(crate) fn center_derivative(v: &[f64], c: usize, h: f64) -> f64 {
    if c >= 2 && c + 2 < v.len() {
        (-v[c + 2] + 8.0 * v[c + 1] - 8.0 * v[c - 1] + v[c - 2]) / (12.0 * h)
    } else if c >= 1 && c + 1 < v.len() {
        (v[c + 1] - v[c - 1]) / (2.0 * h)
    } else {
        f64::NAN
    }
}

/// Build the RCM-linearising warp from the sampled `tan θ` history.
pub fn build_azimuth_warp(geometry: &CollectionGeometry) -> Result<AzimuthWarp> {
    let times = geometry.times();
    let tan = geometry.tan_theta();
    warp_from_samples(&times, &tan, geometry.center_index)
}

pub(crate) fn warp_from_samples(times: &[f64], tan: &[f64], center: usize) -> Result<AzimuthWarp> {
    let n = tan.len();
    if n < 3 || times.len() != n {
        return Err(Error::NonMonotoneAperture("need at least three pulses".into()));
    }
    let increasing = tan[n - 1] > tan[0];
    if !tan.windows(2).all(|w| if increasing { w[1] > w[0] } else { w[1] < w[0] }) {
        return Err(Error::NonMonotoneAperture("tan θ is not strictly monotone over the aperture".into()));
    }
    let h = times[1] - times[0];
    let slope = center_derivative(tan, center, h);
    // work on an increasing copy
    let sign = if increasing { 1.0 } else { -1.0 };
    let ys: Vec<f64> = tan.iter().map(|v| sign * v).collect();
    let mut extrapolated = 0;
    let warped = times
        .iter()
        .map(|&t| {
            let target = sign * slope * t;
            let i = ys.partition_point(|y| *y <= target);
            if i == 0 || i == n {
                extrapolated += 1;
            }
            let j = i.saturating_sub(2).min(n - 4);
            let xs = [ys[j], ys[j + 1], ys[j + 2], ys[j + 3]];
            let ts = [times[j], times[j + 1], times[j + 2], times[j + 3]];
            lagrange4(xs, ts, target)
        })
        .collect();
    Ok(AzimuthWarp { times: warped, slope, extrapolated })
}

/// Per-pulse range-frequency scaling plus the azimuth warp.
#[derive(Clone, Debug, PartialEq)]
pub struct ResampleMap {
    /// `δ_r` per pulse.
    pub scale: Vec<f64>,
    /// `f_c (δ_r - 1)` per pulse, Hz.
    pub offset: Vec<f64>,
    pub warp: AzimuthWarp,
}

impl ResampleMap {
    pub fn new(params: &RadarParams, geometry: &CollectionGeometry) -> Result<Self> {
        let scale = geometry
            .theta
            .iter()
            .zip(&geometry.phi)
            .map(|(th, ph)| range_scale_factor(*th, *ph, geometry.phi_ref))
            .collect::<Result<Vec<_>>>()?;
        let offset = scale.iter().map(|d| params.carrier_frequency * (d - 1.0)).collect();
        Ok(Self { scale, offset, warp: build_azimuth_warp(geometry)? })
    }
}

fn accumulate_invalid(prev: f64, step: f64) -> f64 {
    1.0 - (1.0 - prev) * (1.0 - step)
}

/// Evaluate each pulse row at `δ_r f_r + f_c (δ_r - 1)`.
pub fn range_resample(ph: &PhaseHistory, map: &ResampleMap) -> Result<PhaseHistory> {
    range_resample_with(ph, map, Exec::default())
}

pub fn range_resample_with(ph: &PhaseHistory, map: &ResampleMap, exec: Exec) -> Result<PhaseHistory> {
    ph.expect_stage(Stage::MotionCompensated)?;
    ph.validate_shape()?;
    if map.scale.len() != ph.num_pulses() {
        return Err(Error::GridMismatch("resample map length differs from pulse count".into()));
    }
    let kernel = KaiserSinc::default();
    let nf = ph.num_freqs();
    let fr = ph.fr_axis;
    let mut out = ph.clone();
    let invalid = AtomicUsize::new(0);
    let src = ph.data.as_slice().expect("contiguous");
    let dst = out.data.as_slice_mut().expect("contiguous");
    for_each_row(exec, dst, nf, |n, row| {
        let d = map.scale[n];
        let positions: Vec<f64> = (0..nf).map(|m| fr.position(d * fr.value(m) + map.offset[n])).collect();
        let plan = kernel.plan(&positions, nf);
        plan.apply(&src[n * nf..(n + 1) * nf], row);
        invalid.fetch_add(plan.invalid_count(), Ordering::Relaxed);
    });
    let frac = invalid.into_inner() as f64 / ph.data.len() as f64;
    out.invalid_fraction = accumulate_invalid(ph.invalid_fraction, frac);
    out.stage = Stage::RangeResampled;
    Ok(out)
}

/// Resample every column (fixed range frequency) at per-column positions.
fn resample_columns(
    ph: &PhaseHistory,
    exec: Exec,
    positions: impl Fn(usize) -> Vec<f64> + Sync + Send,
) -> (Array2<Complex64>, usize) {
    let kernel = KaiserSinc::default();
    let (np, nf) = ph.data.dim();
    let cols: Vec<(Vec<Complex64>, usize)> = map_indices(exec, nf, |m| {
        let input: Vec<Complex64> = ph.data.column(m).to_vec();
        let plan = kernel.plan(&positions(m), np);
        let mut col = vec![Complex64::new(0.0, 0.0); np];
        plan.apply(&input, &mut col);
        (col, plan.invalid_count())
    });
    let mut data = Array2::zeros((np, nf));
    let mut invalid = 0;
    for (m, (col, bad)) in cols.into_iter().enumerate() {
        invalid += bad;
        data.column_mut(m).iter_mut().zip(col).for_each(|(d, v)| *d = v);
    }
    (data, invalid)
}

/// Re-time every column to `ϑ_a(t)`.
pub fn rcm_linearize(ph: &PhaseHistory, warp: &AzimuthWarp) -> Result<PhaseHistory> {
    rcm_linearize_with(ph, warp, Exec::default())
}

pub fn rcm_linearize_with(ph: &PhaseHistory, warp: &AzimuthWarp, exec: Exec) -> Result<PhaseHistory> {
    ph.expect_stage(Stage::RangeResampled)?;
    ph.validate_shape()?;
    if warp.times.len() != ph.num_pulses() {
        return Err(Error::GridMismatch("warp length differs from pulse count".into()));
    }
    let t = ph.t_axis;
    let positions: Vec<f64> = warp.times.iter().map(|w| t.position(*w)).collect();
    let (data, invalid) = resample_columns(ph, exec, |_| positions.clone());
    let frac = invalid as f64 / ph.data.len() as f64;
    Ok(PhaseHistory {
        data,
        stage: Stage::RcmLinearized,
        invalid_fraction: accumulate_invalid(ph.invalid_fraction, frac),
        ..ph.clone()
    })
}

/// Keystone: the sample at `(t, f_r)` is read from `(f_c t / (f_c + f_r), f_r)`.
pub fn keystone_transform(ph: &PhaseHistory) -> Result<PhaseHistory> {
    keystone_transform_with(ph, Exec::default())
}

pub fn keystone_transform_with(ph: &PhaseHistory, exec: Exec) -> Result<PhaseHistory> {
    ph.expect_stage(Stage::RcmLinearized)?;
    ph.validate_shape()?;
    let (t, fr, fc) = (ph.t_axis, ph.fr_axis, ph.carrier_frequency);
    let (data, invalid) = resample_columns(ph, exec, |m| {
        let s = fc / (fc + fr.value(m));
        (0..t.len).map(|n| t.position(s * t.value(n))).collect()
    });
    let frac = invalid as f64 / ph.data.len() as f64;
    Ok(PhaseHistory {
        data,
        stage: Stage::Keystoned,
        invalid_fraction: accumulate_invalid(ph.invalid_fraction, frac),
        ..ph.clone()
    })
}

/// Where an image (or crop of one) came from.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub chain: Vec<String>,
    /// Offset of pixel (0, 0) within the top-level image.
    pub origin_row: usize,
    pub origin_col: usize,
    /// Shape of the top-level image.
    pub parent_rows: usize,
    pub parent_cols: usize,
}

/// Complex image `[azimuth, range]` together with the data-domain grid it
/// transforms back to.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexImage {
    pub data: Array2<Complex64>,
    pub grid: SpatialFrequencyGrid,
    pub provenance: Provenance,
}

impl ComplexImage {
    pub fn dim(&self) -> (usize, usize) {
        self.data.dim()
    }

    pub fn energy(&self) -> f64 {
        crate::fft::energy(&self.data)
    }

    pub fn magnitude(&self) -> Array2<f64> {
        self.data.mapv(|v| v.norm())
    }

    pub fn validate(&self) -> Result<()> {
        if self.data.dim() != self.grid.shape() {
            return Err(Error::GridMismatch(format!(
                "image {:?} does not match grid {:?}",
                self.data.dim(),
                self.grid.shape()
            )));
        }
        Ok(())
    }

    /// Same image, different pixels (used after corrections).
    pub fn with_data(&self, data: Array2<Complex64>, step: &str) -> Self {
        let mut provenance = self.provenance.clone();
        provenance.chain.push(step.to_string());
        Self { data, grid: self.grid, provenance }
    }
}

/// 2-D transform of keystoned data into an image.
pub fn form_image(ph: &PhaseHistory, grid: &SpatialFrequencyGrid) -> Result<ComplexImage> {
    form_image_with(ph, grid, Exec::default())
}

pub fn form_image_with(ph: &PhaseHistory, grid: &SpatialFrequencyGrid, exec: Exec) -> Result<ComplexImage> {
    ph.expect_stage(Stage::Keystoned)?;
    ph.validate_shape()?;
    if grid.shape() != ph.data.dim() {
        return Err(Error::GridMismatch("spatial-frequency grid does not match data".into()));
    }
    let (rows, cols) = ph.data.dim();
    let mut data = ph.data.clone();
    centered_dft_2d(&mut data, Direction::Forward, exec);
    Ok(ComplexImage {
        data,
        grid: *grid,
        provenance: Provenance {
            chain: vec!["form_image".into()],
            origin_row: 0,
            origin_col: 0,
            parent_rows: rows,
            parent_cols: cols,
        },
    })
}

/// Exact inverse of the imaging transform: image pixels back to `(X, Y)` samples.
pub fn image_to_data(image: &ComplexImage, exec: Exec) -> Array2<Complex64> {
    let mut data = image.data.clone();
    centered_dft_2d(&mut data, Direction::Inverse, exec);
    data
}

/// `(X, Y)` samples to image pixels.
pub fn data_to_image(data: &Array2<Complex64>, exec: Exec) -> Array2<Complex64> {
    let mut out = data.clone();
    centered_dft_2d(&mut out, Direction::Forward, exec);
    out
}

/// Range-compressed view of a phase history: `[pulse, range pixel]`.
pub fn range_compress(ph: &PhaseHistory) -> Array2<Complex64> {
    let mut data = ph.data.clone();
    centered_dft_rows(&mut data, Direction::Forward, Exec::default());
    data
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PfaOptions {
    /// Keep every intermediate phase history in the output.
    pub keep_stages: bool,
    pub exec: Exec,
}

#[derive(Clone, Debug)]
pub struct PfaProducts {
    pub image: ComplexImage,
    pub grid: SpatialFrequencyGrid,
    pub map: ResampleMap,
    /// Keystoned phase history (input of the 2-D transform).
    pub keystoned: PhaseHistory,
    /// Intermediate stages, in order, when requested.
    pub stages: Vec<PhaseHistory>,
}

/// Full chain: motion compensation, range resampling, RCM linearisation,
/// keystone, imaging.
pub fn polar_format(
    raw: &PhaseHistory,
    params: &RadarParams,
    geometry: &CollectionGeometry,
    opts: &PfaOptions,
) -> Result<PfaProducts> {
    let exec = opts.exec;
    let map = ResampleMap::new(params, geometry)?;
    if map.warp.extrapolated > 0 {
        log::warn!("azimuth warp extrapolated at {} pulses", map.warp.extrapolated);
    }
    let grid = SpatialFrequencyGrid::new(params, geometry.phi_ref, map.warp.slope);
    let mc = motion_compensate_with(raw, geometry, exec)?;
    let rr = range_resample_with(&mc, &map, exec)?;
    let rl = rcm_linearize_with(&rr, &map.warp, exec)?;
    let ks = keystone_transform_with(&rl, exec)?;
    let mut image = form_image_with(&ks, &grid, exec)?;
    image.provenance.chain = ["motion_compensate", "range_resample", "rcm_linearize", "keystone", "form_image"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let stages = if opts.keep_stages { vec![mc, rr, rl, ks.clone()] } else { Vec::new() };
    Ok(PfaProducts { image, grid, map, keystoned: ks, stages })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn range_scale_examples() {
        let pr = 0.9;
        assert!((range_scale_factor(0.0, pr, pr).unwrap() - 1.0).abs() < 1e-15);
        assert!((range_scale_factor(PI / 3.0, pr, pr).unwrap() - 2.0).abs() < 1e-12);
        let phi = (pr.sin() / 2.0).asin();
        assert!((range_scale_factor(0.0, phi, pr).unwrap() - 2.0).abs() < 1e-12);
        assert!(range_scale_factor(PI / 2.0 + 0.1, pr, pr).is_err());
        assert!(range_scale_factor(0.0, 0.0, pr).is_err());
    }

    #[test]
    fn warp_of_tan_alpha_t_matches_closed_form() {
        let alpha = 0.02;
        let axis = UniformAxis::centered(0.0, 0.01, 301);
        let times = axis.values();
        let tan: Vec<f64> = times.iter().map(|t| (alpha * t).tan()).collect();
        let w = warp_from_samples(&times, &tan, axis.center_index()).unwrap();
        let c = axis.center_index();
        let fd = (tan[c + 1] - tan[c - 1]) / (2.0 * axis.step);
        assert!(((w.slope - fd) / fd).abs() < 1e-6);
        assert!(w.times[c].abs() < 1e-15);
        for (t, v) in times.iter().zip(&w.times) {
            let want = (w.slope * t).atan() / alpha;
            assert!((v - want).abs() < 1e-9, "t={t}: {v} vs {want}");
        }
    }

    #[test]
    fn non_monotone_tan_rejected() {
        let times: Vec<f64> = (0..11).map(|i| i as f64 - 5.0).collect();
        let tan: Vec<f64> = times.iter().map(|t| t * t).collect();
        assert!(matches!(warp_from_samples(&times, &tan, 5), Err(Error::NonMonotoneAperture(_))));
    }

    #[test]
    fn grid_constants() {
        let params = RadarParams {
            carrier_frequency: 10e9,
            range_bandwidth: 500e6,
            num_range_freq_samples: 64,
            num_pulses: 65,
            pulse_interval: 1e-2,
        };
        let phi_ref: f64 = 0.8;
        let g = SpatialFrequencyGrid::new(&params, phi_ref, 0.01);
        let y0 = 4.0 * PI * phi_ref.sin() * 10e9 / SPEED_OF_LIGHT;
        assert!((g.y0 - y0).abs() < 1e-9);
        assert!((g.y_axis.value(32) - y0).abs() < 1e-9);
        assert_eq!(g.x_axis.value(32), 0.0);
        assert!((g.x_to_t(g.x_axis.value(40)) - 0.08).abs() < 1e-12);
        let c = g.cropped(16, 8);
        assert!((c.y_axis.value(4) - y0).abs() < 1e-9);
        assert!((c.x_axis.step - g.x_axis.step * 65.0 / 16.0).abs() < 1e-12);
    }
}
