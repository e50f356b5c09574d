//! Analytic structure of the residual 2-D phase error of a moving target
//! after polar formatting.
//!
//! The effective range error `η(t)` splits into `a0 + a1 t + ξ(t)`. Only
//! `ξ` (quadratic and higher) defocuses: after keystoning it appears as
//! `Φ_e(X, Y) = Y ξ(X / Y)`. At band centre this is the azimuth phase error
//! `φ0(X) = Y0 ξ(X / Y0)`, and the whole surface follows from it:
//! `Φ_e(X, Y) = (Y / Y0) φ0(Y0 X / Y)`. The Taylor coefficients in
//! `(Y - Y0)` give the residual RCM term `φ1 = (φ0 - X φ0') / Y0` and the
//! range-defocus term `φ2 = X² ξ''(X / Y0) / (2 Y0³)`.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::axis::UniformAxis;
use crate::error::{Error, Result};
use crate::geometry::CollectionGeometry;
use crate::interp::lagrange_cubic;
use crate::parallel::{for_each_row, Exec};
use crate::pfa::{center_derivative, AzimuthWarp, SpatialFrequencyGrid};
use crate::poly::Polynomial;

/// Default polynomial order for `ξ(t)`.
pub const DEFAULT_XI_ORDER: usize = 6;
/// Default polynomial order for fitted APE profiles.
pub const DEFAULT_APE_ORDER: usize = 8;
/// Detrending tolerance on the constant / edge-linear APE content, rad.
pub const DETREND_TOLERANCE: f64 = 0.05;

#[derive(Clone, Debug, PartialEq)]
pub struct PhaseErrorModel {
    pub t_axis: UniformAxis,
    /// `ϖ(t) = (r_c - r_m) / (sin φ cos θ)`, m.
    pub varpi: Vec<f64>,
    /// `η(t) = ϖ(ϑ_a(t))`, m.
    pub eta: Vec<f64>,
    /// m
    pub a0: f64,
    /// m/s
    pub a1: f64,
    /// Quadratic-and-higher part, argument in seconds.
    pub xi: Option<Polynomial>,
    /// `η - a0 - a1 t - ξ_fit(t)` per sample.
    pub xi_residual: Vec<f64>,
    pub fit_rms: f64,
    /// Set when the fit residual exceeds tolerance (order too low).
    pub fit_flagged: bool,
}

impl PhaseErrorModel {
    /// Model carrying only a given `ξ(t)` (no sampled histories).
    pub fn from_xi(t_axis: UniformAxis, xi: Polynomial) -> Result<Self> {
        if xi.coeff(0) != 0.0 || xi.coeff(1) != 0.0 {
            return Err(Error::InvalidInput("ξ must have no constant or linear term".into()));
        }
        Ok(Self {
            t_axis,
            varpi: Vec::new(),
            eta: Vec::new(),
            a0: 0.0,
            a1: 0.0,
            xi: Some(xi),
            xi_residual: Vec::new(),
            fit_rms: 0.0,
            fit_flagged: false,
        })
    }

    pub fn xi(&self) -> Result<&Polynomial> {
        self.xi
            .as_ref()
            .ok_or_else(|| Error::InvalidInput("ξ(t) has not been fitted; call decompose_eta".into()))
    }

    /// Linear (imaging) part `a0 + a1 t`.
    pub fn linear_part(&self, t: f64) -> f64 {
        self.a0 + self.a1 * t
    }
}

fn uniform_time_axis(times: &[f64]) -> Result<UniformAxis> {
    if times.len() < 2 {
        return Err(Error::InvalidInput("need at least two pulses".into()));
    }
    let step = times[1] - times[0];
    let uniform = times
        .iter()
        .enumerate()
        .all(|(i, t)| (t - (times[0] + i as f64 * step)).abs() <= 1e-9 * step.abs().max(1e-300) * (i as f64 + 1.0));
    if !uniform || !(step > 0.0) {
        return Err(Error::InvalidInput("slow-time grid must be uniform".into()));
    }
    Ok(UniformAxis::new(times[0], step, times.len()))
}

/// `ϖ(t)` and `η(t) = ϖ(ϑ_a(t))` for a target range history.
pub fn eta_from_geometry(geometry: &CollectionGeometry, r_m: &[f64], warp: &AzimuthWarp) -> Result<PhaseErrorModel> {
    let n = geometry.num_pulses();
    if r_m.len() != n || warp.times.len() != n {
        return Err(Error::GridMismatch("range history, warp and geometry lengths differ".into()));
    }
    let t_axis = uniform_time_axis(&geometry.times())?;
    let varpi = (0..n)
        .map(|i| {
            let denom = geometry.phi[i].sin() * geometry.theta[i].cos();
            if !(denom > 0.0) {
                return Err(Error::DegenerateGeometry(format!("sin φ cos θ <= 0 at pulse {i}")));
            }
            Ok((geometry.r_c[i] - r_m[i]) / denom)
        })
        .collect::<Result<Vec<_>>>()?;
    let eta = warp
        .times
        .iter()
        .map(|w| lagrange_cubic(&varpi, t_axis.position(*w)))
        .collect();
    Ok(PhaseErrorModel {
        t_axis,
        varpi,
        eta,
        a0: 0.0,
        a1: 0.0,
        xi: None,
        xi_residual: Vec::new(),
        fit_rms: 0.0,
        fit_flagged: false,
    })
}

/// Split `η` into `a0 + a1 t + ξ(t)` about aperture centre and fit `ξ`
/// with orders `2..=order`.
pub fn decompose_eta(model: &PhaseErrorModel, order: usize) -> Result<PhaseErrorModel> {
    if order < 2 {
        return Err(Error::InvalidInput("ξ order must be >= 2".into()));
    }
    let t = model.t_axis;
    let c = t.center_index();
    if t.value(c).abs() > 1e-9 * t.step {
        return Err(Error::InvalidInput("slow-time grid must have t = 0 at the central pulse".into()));
    }
    let a0 = model.eta[c];
    let a1 = center_derivative(&model.eta, c, t.step);
    let times = t.values();
    let xi_samples: Vec<f64> = times.iter().zip(&model.eta).map(|(tt, e)| e - a0 - a1 * tt).collect();
    let (xi, rms) = Polynomial::fit(&times, &xi_samples, 2, order, t.max_abs())?;
    let xi_residual: Vec<f64> = times.iter().zip(&xi_samples).map(|(tt, s)| s - xi.eval(*tt)).collect();
    let scale = model.eta.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let fit_flagged = rms > 1e-6 * scale + 1e-12;
    if fit_flagged {
        log::warn!("ξ fit residual {rms:.3e} m exceeds tolerance; order {order} may be insufficient");
    }
    Ok(PhaseErrorModel {
        a0,
        a1,
        xi: Some(xi),
        xi_residual,
        fit_rms: rms,
        fit_flagged,
        ..model.clone()
    })
}

/// Real 2-D phase surface over a spatial-frequency grid, `[X, Y]`.
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseErrorSurface {
    pub values: Array2<f64>,
    pub grid: SpatialFrequencyGrid,
}

impl PhaseErrorSurface {
    fn from_fn(grid: &SpatialFrequencyGrid, exec: Exec, f: impl Fn(f64, f64) -> f64 + Sync + Send) -> Self {
        let (nx, ny) = grid.shape();
        let mut values = Array2::<f64>::zeros((nx, ny));
        let (xa, ya) = (grid.x_axis, grid.y_axis);
        let slice = values.as_slice_mut().expect("contiguous");
        for_each_row(exec, slice, ny, |i, row| {
            let x = xa.value(i);
            for (j, v) in row.iter_mut().enumerate() {
                *v = f(x, ya.value(j));
            }
        });
        Self { values, grid: *grid }
    }

    /// The `Y = Y0` row, interpolated if `Y0` falls between samples.
    pub fn center_row(&self) -> Vec<f64> {
        let pos = self.grid.y_axis.position(self.grid.y0);
        (0..self.values.nrows())
            .map(|i| {
                let row: Vec<f64> = self.values.row(i).to_vec();
                lagrange_cubic(&row, pos)
            })
            .collect()
    }
}

/// `Φ_e(X, Y) = Y ξ(X / Y)` evaluated directly from the fitted `ξ`.
pub fn exact_surface(model: &PhaseErrorModel, grid: &SpatialFrequencyGrid) -> Result<PhaseErrorSurface> {
    let xi = model.xi()?;
    Ok(PhaseErrorSurface::from_fn(grid, Exec::default(), |x, y| y * xi.eval(x / y)))
}

/// Azimuth phase error `φ0(X)` on an `X` axis, optionally carried as a
/// polynomial in `X`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ApeProfile {
    pub x_axis: UniformAxis,
    pub phi0: Vec<f64>,
    pub poly: Option<Polynomial>,
}

impl ApeProfile {
    pub fn from_samples(x_axis: UniformAxis, phi0: Vec<f64>) -> Result<Self> {
        if phi0.len() != x_axis.len {
            return Err(Error::GridMismatch("profile length differs from axis".into()));
        }
        if phi0.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("APE profile contains non-finite samples".into()));
        }
        Ok(Self { x_axis, phi0, poly: None })
    }

    pub fn from_polynomial(x_axis: UniformAxis, poly: Polynomial) -> Self {
        let phi0 = x_axis.values().iter().map(|x| poly.eval(*x)).collect();
        Self { x_axis, phi0, poly: Some(poly) }
    }

    /// Least-squares polynomial fit (orders `0..=order`) of the samples.
    pub fn fitted(&self, order: usize) -> Result<Self> {
        let xs = self.x_axis.values();
        let (poly, _) = Polynomial::fit(&xs, &self.phi0, 0, order, self.x_axis.max_abs())?;
        Ok(Self::from_polynomial(self.x_axis, poly))
    }

    /// Drop the constant and linear Taylor terms about `X = 0`. These only
    /// move the target in the image; `ξ` carries no such terms.
    pub fn taylor_form(&self) -> Result<Self> {
        let poly = self
            .poly
            .as_ref()
            .ok_or_else(|| Error::InvalidInput("taylor_form needs a polynomial fit".into()))?;
        Ok(Self::from_polynomial(self.x_axis, poly.without_affine()))
    }

    pub fn eval(&self, x: f64) -> f64 {
        match &self.poly {
            Some(p) => p.eval(x),
            None => lagrange_cubic(&self.phi0, self.x_axis.position(x)),
        }
    }

    /// `(φ0(0), φ0'(0) X_max)`, the content the detrending contract forbids.
    pub fn affine_content(&self) -> (f64, f64) {
        let xmax = self.x_axis.max_abs();
        match &self.poly {
            Some(p) => (p.coeff(0), p.coeff(1) * xmax / p.scale),
            None => {
                let c = self.x_axis.position(0.0);
                let h = 1e-3;
                let d = (lagrange_cubic(&self.phi0, c + h) - lagrange_cubic(&self.phi0, c - h))
                    / (2.0 * h * self.x_axis.step);
                (lagrange_cubic(&self.phi0, c), d * xmax)
            }
        }
    }

    pub fn check_detrended(&self) -> Result<()> {
        let (constant, linear) = self.affine_content();
        if constant.abs() >= DETREND_TOLERANCE || linear.abs() >= DETREND_TOLERANCE {
            return Err(Error::NotDetrended { constant, linear });
        }
        Ok(())
    }
}

/// `φ0(X) = Y0 ξ(X / Y0)`, exact polynomial image of the fitted `ξ`.
pub fn ape_profile(model: &PhaseErrorModel, grid: &SpatialFrequencyGrid) -> Result<ApeProfile> {
    let xi = model.xi()?;
    let poly = Polynomial::new(xi.coeffs.iter().map(|b| grid.y0 * b).collect(), grid.y0 * xi.scale);
    Ok(ApeProfile::from_polynomial(grid.x_axis, poly))
}

#[derive(Clone, Debug, PartialEq)]
pub struct TaylorCoefficients {
    pub x_axis: UniformAxis,
    /// rad
    pub phi0: Vec<f64>,
    /// rad per unit `Y`
    pub phi1: Vec<f64>,
    /// rad per unit `Y²`
    pub phi2: Vec<f64>,
}

impl TaylorCoefficients {
    /// Second-order reconstruction of `Φ_e` at `(x_index, Y)`.
    pub fn reconstruct(&self, i: usize, y: f64, y0: f64) -> f64 {
        let dy = y - y0;
        self.phi0[i] + self.phi1[i] * dy + self.phi2[i] * dy * dy
    }
}

/// Expansion of `Φ_e` in powers of `(Y - Y0)` up to second order.
pub fn taylor_coefficients(model: &PhaseErrorModel, grid: &SpatialFrequencyGrid) -> Result<TaylorCoefficients> {
    let xi = model.xi()?;
    let d1 = xi.derivative();
    let d2 = d1.derivative();
    let y0 = grid.y0;
    let xs = grid.x_axis.values();
    let mut phi0 = Vec::with_capacity(xs.len());
    let mut phi1 = Vec::with_capacity(xs.len());
    let mut phi2 = Vec::with_capacity(xs.len());
    for &x in &xs {
        let tau = x / y0;
        phi0.push(y0 * xi.eval(tau));
        phi1.push(xi.eval(tau) - tau * d1.eval(tau));
        phi2.push(x * x * d2.eval(tau) / (2.0 * y0.powi(3)));
    }
    Ok(TaylorCoefficients { x_axis: grid.x_axis, phi0, phi1, phi2 })
}

/// Noise level (std) of a sampled profile from its fourth differences.
fn roughness(v: &[f64]) -> f64 {
    if v.len() < 6 {
        return 0.0;
    }
    let d4: Vec<f64> = v
        .windows(5)
        .map(|w| w[0] - 4.0 * w[1] + 6.0 * w[2] - 4.0 * w[3] + w[4])
        .collect();
    let ms = d4.iter().map(|d| d * d).sum::<f64>() / d4.len() as f64;
    (ms / 70.0).sqrt()
}

/// Residual-RCM coefficient `φ1(X) = (φ0(X) - X φ0'(X)) / Y0`.
///
/// Uses the analytic derivative when `ape` carries a polynomial. For
/// sample-only profiles a fourth-order central difference is used, unless
/// the profile is noisy, in which case it is first smoothed by a
/// least-squares polynomial of order [`DEFAULT_APE_ORDER`].
pub fn rcm_from_ape(ape: &ApeProfile, y0: f64) -> Result<Vec<f64>> {
    if !(y0 > 0.0) {
        return Err(Error::InvalidInput("Y0 must be positive".into()));
    }
    let xs = ape.x_axis.values();
    if let Some(p) = &ape.poly {
        let d = p.derivative();
        return Ok(xs.iter().map(|x| (p.eval(*x) - x * d.eval(*x)) / y0).collect());
    }
    let scale = ape.phi0.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let noise = roughness(&ape.phi0);
    if noise > 1e-3 * scale.max(1.0) && ape.phi0.len() > DEFAULT_APE_ORDER + 1 {
        log::warn!("APE samples look noisy (σ ≈ {noise:.2e} rad); smoothing before differentiation");
        return rcm_from_ape(&ape.fitted(DEFAULT_APE_ORDER)?, y0);
    }
    let h = ape.x_axis.step;
    let v = &ape.phi0;
    let n = v.len();
    let deriv = |i: usize| -> f64 {
        if i >= 2 && i + 2 < n {
            (-v[i + 2] + 8.0 * v[i + 1] - 8.0 * v[i - 1] + v[i - 2]) / (12.0 * h)
        } else {
            let u = i as f64;
            let e = 1e-3;
            (lagrange_cubic(v, u + e) - lagrange_cubic(v, u - e)) / (2.0 * e * h)
        }
    };
    Ok((0..n).map(|i| (v[i] - xs[i] * deriv(i)) / y0).collect())
}

/// Output of [`surface_from_ape`].
#[derive(Clone, Debug, PartialEq)]
pub struct ApeSurface {
    pub surface: PhaseErrorSurface,
    /// Fraction of grid points whose argument `Y0 X / Y` lies more than 10 %
    /// beyond the profile's `X` range.
    pub extrapolated_fraction: f64,
}

/// `Φ_e(X, Y) = (Y / Y0) φ0(Y0 X / Y)` from a detrended APE profile.
pub fn surface_from_ape(ape: &ApeProfile, grid: &SpatialFrequencyGrid) -> Result<ApeSurface> {
    ape.check_detrended()?;
    let y0 = grid.y0;
    let limit = 1.1 * ape.x_axis.max_abs();
    let surface = PhaseErrorSurface::from_fn(grid, Exec::default(), |x, y| (y / y0) * ape.eval(y0 * x / y));
    let (xa, ya) = (grid.x_axis, grid.y_axis);
    let mut beyond = 0usize;
    for i in 0..xa.len {
        for j in 0..ya.len {
            if (y0 * xa.value(i) / ya.value(j)).abs() > limit {
                beyond += 1;
            }
        }
    }
    let total = (xa.len * ya.len).max(1);
    let extrapolated_fraction = beyond as f64 / total as f64;
    if extrapolated_fraction > 0.0 {
        log::debug!("APE surface extrapolated at {:.2} % of grid points", 100.0 * extrapolated_fraction);
    }
    Ok(ApeSurface { surface, extrapolated_fraction })
}
