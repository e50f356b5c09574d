//! Azimuth phase error estimation on (reduced-resolution) subimages.
//!
//! Estimates are the phase present in the azimuth data domain, so the
//! correcting multiply is `exp(-j φ0)`.

use ndarray::Array2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::axis::UniformAxis;
use crate::error::{Error, Result};
use crate::error_model::{ApeProfile, DEFAULT_APE_ORDER};
use crate::fft::{centered_dft_cols, centered_dft_rows, Direction};
use crate::metrics::entropy;
use crate::parallel::{map_indices, Exec};
use crate::pfa::ComplexImage;
use crate::poly::Polynomial;

/// Fewest range cells a reduced image may keep.
pub const MIN_REDUCED_CELLS: usize = 8;
/// A-priori residual RCM bound (cells) when none is configured.
pub const DEFAULT_RCM_BOUND: f64 = 3.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ApeEstimate {
    pub x_axis: UniformAxis,
    /// rad
    pub phi0_hat: Vec<f64>,
    /// RMS phase update per iteration (PGA) or entropy per sweep (minimum entropy).
    pub history: Vec<f64>,
    /// Range bins that passed the gate on the last iteration.
    pub bins_used: usize,
    pub iterations: usize,
    pub converged: bool,
    pub flags: Vec<String>,
}

impl ApeEstimate {
    fn zero(x_axis: UniformAxis) -> Self {
        Self {
            x_axis,
            phi0_hat: vec![0.0; x_axis.len],
            history: Vec::new(),
            bins_used: 0,
            iterations: 0,
            converged: true,
            flags: Vec::new(),
        }
    }

    pub fn profile(&self) -> Result<ApeProfile> {
        ApeProfile::from_samples(self.x_axis, self.phi0_hat.clone())
    }

    /// Order-`order` polynomial fit in Taylor form (no constant or linear term).
    pub fn fitted_profile(&self, order: usize) -> Result<ApeProfile> {
        self.profile()?.fitted(order)?.taylor_form()
    }

    pub fn default_fit(&self) -> Result<ApeProfile> {
        self.fitted_profile(DEFAULT_APE_ORDER)
    }
}

/// Remove the least-squares constant + linear part of `p` over `x`.
pub fn detrend_profile(x: &[f64], p: &[f64]) -> Vec<f64> {
    let n = x.len() as f64;
    if x.is_empty() {
        return Vec::new();
    }
    let mx = x.iter().sum::<f64>() / n;
    let mp = p.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxp: f64 = x.iter().zip(p).map(|(a, b)| (a - mx) * (b - mp)).sum();
    let slope = if sxx > 0.0 { sxp / sxx } else { 0.0 };
    x.iter().zip(p).map(|(a, b)| b - mp - slope * (a - mx)).collect()
}

pub fn detrend(ape: &ApeEstimate) -> ApeEstimate {
    ApeEstimate {
        phi0_hat: detrend_profile(&ape.x_axis.values(), &ape.phi0_hat),
        ..ape.clone()
    }
}

/// Smallest power of two that confines `rcm_bound` cells to one coarse cell.
pub fn reduction_factor_for(rcm_bound: f64) -> usize {
    let mut f = 1usize;
    while (f as f64) < rcm_bound && f < 1 << 20 {
        f *= 2;
    }
    f
}

/// Keep the central `1/factor` of the `Y` band; azimuth is untouched.
pub fn reduce_range_resolution(sub: &ComplexImage, factor: usize) -> Result<ComplexImage> {
    sub.validate()?;
    let (rows, cols) = sub.dim();
    if factor == 0 {
        return Err(Error::InvalidInput("reduction factor must be >= 1".into()));
    }
    let keep = cols / factor;
    if factor > cols / 4 || keep < MIN_REDUCED_CELLS {
        return Err(Error::InvalidInput(format!(
            "reduction factor {factor} leaves {keep} of {cols} range cells (need >= {MIN_REDUCED_CELLS})"
        )));
    }
    if factor == 1 {
        return Ok(sub.with_data(sub.data.clone(), "reduce_range_resolution(1)"));
    }
    let mut spec = sub.data.clone();
    centered_dft_rows(&mut spec, Direction::Inverse, Exec::default());
    let start = cols / 2 - keep / 2;
    let mut out = Array2::from_shape_fn((rows, keep), |(r, c)| spec[[r, start + c]]);
    centered_dft_rows(&mut out, Direction::Forward, Exec::default());
    let mut reduced = sub.with_data(out, &format!("reduce_range_resolution({factor})"));
    reduced.grid = sub.grid.y_band_reduced(keep);
    Ok(reduced)
}

/// Azimuth-only transforms between image rows and `X` samples.
fn az_to_data(img: &Array2<Complex64>, exec: Exec) -> Array2<Complex64> {
    let mut d = img.clone();
    centered_dft_cols(&mut d, Direction::Inverse, exec);
    d
}

fn az_to_image(data: &Array2<Complex64>, exec: Exec) -> Array2<Complex64> {
    let mut d = data.clone();
    centered_dft_cols(&mut d, Direction::Forward, exec);
    d
}

/// Multiply every azimuth line by `exp(-j φ(X))` in the data domain.
pub fn apply_azimuth_phase(img: &Array2<Complex64>, phase: &[f64], exec: Exec) -> Array2<Complex64> {
    let mut d = az_to_data(img, exec);
    for (mut row, p) in d.rows_mut().into_iter().zip(phase) {
        let w = Complex64::from_polar(1.0, -p);
        row.iter_mut().for_each(|v| *v *= w);
    }
    az_to_image(&d, exec)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PgaConfig {
    pub max_iterations: usize,
    /// Stop once the RMS phase update falls below this, rad.
    pub rms_tolerance: f64,
    /// Initial window as a fraction of the azimuth extent.
    pub window_start: f64,
    pub window_shrink: f64,
    pub window_floor: f64,
    /// Range bins whose peak power is below this fraction of the brightest bin are skipped.
    pub bin_gate: f64,
    #[serde(skip)]
    pub exec: Exec,
}

impl Default for PgaConfig {
    fn default() -> Self {
        Self {
            max_iterations: 10,
            rms_tolerance: 0.1,
            window_start: 1.0,
            window_shrink: 0.7,
            window_floor: 0.05,
            bin_gate: 0.01,
            exec: Exec::default(),
        }
    }
}

/// Phase gradient autofocus.
pub fn pga_estimate(sub: &ComplexImage, config: &PgaConfig) -> Result<ApeEstimate> {
    sub.validate()?;
    let (na, nr) = sub.dim();
    if na < 4 || nr == 0 {
        return Err(Error::InvalidInput("subimage too small for PGA".into()));
    }
    let exec = config.exec;
    let ctr = na / 2;
    let xs: Vec<f64> = (0..na).map(|i| i as f64 - ctr as f64).collect();
    let floor = ((config.window_floor * na as f64) as usize).max(3);
    let mut window = ((config.window_start * na as f64) as usize).clamp(floor, na);
    let mut img = sub.data.clone();
    let mut total = vec![0.0; na];
    let mut est = ApeEstimate::zero(sub.grid.x_axis);
    for it in 0..config.max_iterations {
        let bin_peaks: Vec<(usize, f64)> = (0..nr)
            .map(|b| {
                img.column(b)
                    .iter()
                    .enumerate()
                    .fold((0, 0.0), |(bi, bv), (i, v)| if v.norm_sqr() > bv { (i, v.norm_sqr()) } else { (bi, bv) })
            })
            .collect();
        let strongest = bin_peaks.iter().fold(0.0f64, |m, (_, p)| m.max(*p));
        let selected: Vec<usize> = (0..nr)
            .filter(|b| strongest > 0.0 && bin_peaks[*b].1 >= config.bin_gate * strongest)
            .collect();
        if selected.is_empty() {
            return Err(Error::EstimationFailed(format!(
                "no range bin passed the contrast gate (iteration {it}, peak power {strongest:.3e})"
            )));
        }
        let half = window as f64 / 2.0;
        let columns: Vec<Vec<Complex64>> = map_indices(exec, selected.len(), |s| {
            let b = selected[s];
            let (k, _) = bin_peaks[b];
            let mut col: Vec<Complex64> = img.column(b).to_vec();
            col.rotate_left(k);
            col.rotate_right(ctr);
            for (i, v) in col.iter_mut().enumerate() {
                if (i as f64 - ctr as f64).abs() > half {
                    *v = Complex64::new(0.0, 0.0);
                }
            }
            crate::fft::centered_dft_1d(&mut col, Direction::Inverse);
            col
        });
        let mut phase = vec![0.0; na];
        for n in 1..na {
            let s: Complex64 = columns.iter().map(|g| g[n] * g[n - 1].conj()).sum();
            phase[n] = phase[n - 1] + s.arg();
        }
        let phase = detrend_profile(&xs, &phase);
        let rms = (phase.iter().map(|p| p * p).sum::<f64>() / na as f64).sqrt();
        total.iter_mut().zip(&phase).for_each(|(t, p)| *t += p);
        img = apply_azimuth_phase(&img, &phase, exec);
        est.history.push(rms);
        est.bins_used = selected.len();
        est.iterations = it + 1;
        if rms < config.rms_tolerance {
            est.converged = true;
            break;
        }
        est.converged = false;
        window = ((window as f64 * config.window_shrink) as usize).max(floor);
    }
    if !est.converged {
        est.flags.push("pga_iteration_cap".into());
    }
    est.phi0_hat = detrend_profile(&xs, &total);
    Ok(est)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MinEntropyConfig {
    /// Highest polynomial order of the APE basis (orders 2..=basis_order).
    pub basis_order: usize,
    pub min_sweeps: usize,
    pub max_sweeps: usize,
    /// Stop when a sweep improves entropy by less than this (nats).
    pub tolerance: f64,
    /// Points in the first-sweep coarse scan of each coefficient.
    pub scan_points: usize,
    #[serde(skip)]
    pub exec: Exec,
}

impl Default for MinEntropyConfig {
    fn default() -> Self {
        Self { basis_order: 6, min_sweeps: 2, max_sweeps: 8, tolerance: 1e-4, scan_points: 81, exec: Exec::default() }
    }
}

const GOLDEN: f64 = 0.618_033_988_749_894_8;

fn golden_section(f: &mut impl FnMut(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let mut c = b - GOLDEN * (b - a);
    let mut d = a + GOLDEN * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - GOLDEN * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + GOLDEN * (b - a);
            fd = f(d);
        }
    }
    if fc < fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Minimum-entropy estimate with the default search settings.
pub fn minentropy_estimate(sub: &ComplexImage, basis_order: usize) -> Result<ApeEstimate> {
    minentropy_estimate_with(sub, &MinEntropyConfig { basis_order, ..Default::default() })
}

/// Coordinate descent over normalised polynomial coefficients of `φ0`,
/// minimising image entropy.
pub fn minentropy_estimate_with(sub: &ComplexImage, config: &MinEntropyConfig) -> Result<ApeEstimate> {
    sub.validate()?;
    let (na, _) = sub.dim();
    if config.basis_order < 2 {
        return Err(Error::InvalidInput("basis order must be >= 2".into()));
    }
    if na < 4 {
        return Err(Error::InvalidInput("subimage too small".into()));
    }
    let exec = config.exec;
    let ctr = na / 2;
    let scale = (ctr as f64).max(1.0);
    let xs: Vec<f64> = (0..na).map(|i| i as f64 - ctr as f64).collect();
    let data = az_to_data(&sub.data, exec);
    let orders: Vec<usize> = (2..=config.basis_order).collect();
    let mut coeffs = vec![0.0; config.basis_order + 1];
    let profile = |c: &[f64]| -> Vec<f64> {
        let p = Polynomial::new(c.to_vec(), scale);
        xs.iter().map(|x| p.eval(*x)).collect()
    };
    let cost = |c: &[f64]| -> f64 {
        let phase = profile(c);
        let mut d = data.clone();
        for (mut row, p) in d.rows_mut().into_iter().zip(&phase) {
            let w = Complex64::from_polar(1.0, -p);
            row.iter_mut().for_each(|v| *v *= w);
        }
        centered_dft_cols(&mut d, Direction::Forward, exec);
        entropy(&d).unwrap_or(f64::INFINITY)
    };
    let start = cost(&coeffs);
    if !start.is_finite() {
        return Err(Error::ZeroEnergy);
    }
    let mut est = ApeEstimate::zero(sub.grid.x_axis);
    est.history.push(start);
    let mut current = start;
    // Largest coefficient whose phase slope stays below π per sample.
    let limit = |k: usize| std::f64::consts::PI * scale / k as f64;
    let mut step: Vec<f64> = vec![0.0; coeffs.len()];
    for sweep in 0..config.max_sweeps {
        let before = current;
        for &k in &orders {
            let mut f = |v: f64| {
                let mut c = coeffs.clone();
                c[k] = v;
                cost(&c)
            };
            let (lo, hi) = if sweep == 0 {
                let r = limit(k);
                let n = config.scan_points.max(3);
                let h = 2.0 * r / (n - 1) as f64;
                step[k] = h;
                let samples: Vec<f64> = map_indices(Exec::Sequential, n, |i| -r + i as f64 * h);
                let (best, _) = samples
                    .iter()
                    .map(|v| (*v, f(*v)))
                    .fold((0.0, current), |(bv, bf), (v, fv)| if fv < bf { (v, fv) } else { (bv, bf) });
                (best - h, best + h)
            } else {
                let h = step[k].max(1e-6);
                (coeffs[k] - h, coeffs[k] + h)
            };
            let tol = 1e-4 * (hi - lo).abs().max(1e-9);
            let (v, fv) = golden_section(&mut f, lo, hi, tol);
            if fv < current {
                coeffs[k] = v;
                current = fv;
            }
            if sweep > 0 {
                step[k] *= 0.5;
            }
        }
        est.history.push(current);
        est.iterations = sweep + 1;
        if sweep + 1 >= config.min_sweeps && before - current < config.tolerance {
            break;
        }
    }
    if !(current < start) {
        est.flags.push("entropy_not_improved".into());
        est.converged = false;
        return Ok(est);
    }
    est.converged = true;
    est.bins_used = sub.dim().1;
    est.phi0_hat = detrend_profile(&xs, &profile(&coeffs));
    Ok(est)
}
