//! Moving-target refocusing: crop, estimate the azimuth phase error on a
//! reduced-resolution copy, map it to the full 2-D phase error surface and
//! correct at full resolution.

use std::fmt::Write as _;
use std::str::FromStr;

use ndarray::{s, Array2};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::autofocus::{
    detrend, minentropy_estimate_with, pga_estimate, reduce_range_resolution, reduction_factor_for, ApeEstimate,
    MinEntropyConfig, PgaConfig, DEFAULT_RCM_BOUND, MIN_REDUCED_CELLS,
};
use crate::error::{Error, Result};
use crate::error_model::{surface_from_ape, ApeProfile, PhaseErrorSurface, DEFAULT_APE_ORDER};
use crate::metrics::{azimuth_width_3db, contrast, entropy, residual_rcm};
use crate::parallel::{for_each_row, Exec};
use crate::pfa::{data_to_image, image_to_data, ComplexImage, Provenance, SpatialFrequencyGrid};

pub const MIN_ROI_EXTENT: usize = 32;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegionOfInterest {
    pub az_offset: usize,
    pub rg_offset: usize,
    pub az_extent: usize,
    pub rg_extent: usize,
}

impl RegionOfInterest {
    pub fn new(az_offset: usize, rg_offset: usize, az_extent: usize, rg_extent: usize) -> Self {
        Self { az_offset, rg_offset, az_extent, rg_extent }
    }

    /// Whole-image region.
    pub fn full(dim: (usize, usize)) -> Self {
        Self::new(0, 0, dim.0, dim.1)
    }

    /// Region of the given extents centred on a pixel, shifted to fit.
    pub fn centered_on(pixel: (usize, usize), extents: (usize, usize), dim: (usize, usize)) -> Result<Self> {
        if extents.0 > dim.0 || extents.1 > dim.1 {
            return Err(Error::OutOfBounds(format!("extents {extents:?} exceed image {dim:?}")));
        }
        let place = |p: usize, e: usize, n: usize| p.saturating_sub(e / 2).min(n - e);
        let roi = Self::new(place(pixel.0, extents.0, dim.0), place(pixel.1, extents.1, dim.1), extents.0, extents.1);
        roi.validate(dim)?;
        Ok(roi)
    }

    pub fn validate(&self, dim: (usize, usize)) -> Result<()> {
        if self.az_extent < MIN_ROI_EXTENT || self.rg_extent < MIN_ROI_EXTENT {
            return Err(Error::OutOfBounds(format!(
                "extents {}x{} below the minimum of {MIN_ROI_EXTENT}",
                self.az_extent, self.rg_extent
            )));
        }
        let fits = |o: usize, e: usize, n: usize| o.checked_add(e).is_some_and(|end| end <= n);
        if !fits(self.az_offset, self.az_extent, dim.0) || !fits(self.rg_offset, self.rg_extent, dim.1) {
            return Err(Error::OutOfBounds(format!("{self} outside image of {}x{}", dim.0, dim.1)));
        }
        Ok(())
    }
}

impl std::fmt::Display for RegionOfInterest {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{},{},{},{}", self.az_offset, self.rg_offset, self.az_extent, self.rg_extent)
    }
}

/// Parses `az_offset,rg_offset,az_extent,rg_extent`.
impl FromStr for RegionOfInterest {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let v: Vec<usize> = s
            .split(',')
            .map(|p| p.trim().parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::InvalidInput(format!("bad region `{s}`; expected az,rg,naz,nrg")))?;
        match v.as_slice() {
            [a, r, na, nr] => Ok(Self::new(*a, *r, *na, *nr)),
            _ => Err(Error::InvalidInput(format!("bad region `{s}`; expected four integers"))),
        }
    }
}

/// Complex crop. The crop's grid spans the same spectral extent with
/// proportionally coarser sampling.
pub fn extract_subimage(image: &ComplexImage, roi: &RegionOfInterest) -> Result<ComplexImage> {
    image.validate()?;
    roi.validate(image.dim())?;
    let data = image
        .data
        .slice(s![roi.az_offset..roi.az_offset + roi.az_extent, roi.rg_offset..roi.rg_offset + roi.rg_extent])
        .to_owned();
    let mut provenance = image.provenance.clone();
    provenance.origin_row += roi.az_offset;
    provenance.origin_col += roi.rg_offset;
    provenance.chain.push(format!("extract_subimage({roi})"));
    Ok(ComplexImage { data, grid: image.grid.cropped(roi.az_extent, roi.rg_extent), provenance })
}

/// Write a subimage back into `image` at the offsets recorded in its provenance.
pub fn embed(image: &ComplexImage, sub: &ComplexImage) -> Result<ComplexImage> {
    let r0 = sub.provenance.origin_row.checked_sub(image.provenance.origin_row);
    let c0 = sub.provenance.origin_col.checked_sub(image.provenance.origin_col);
    let (Some(r0), Some(c0)) = (r0, c0) else {
        return Err(Error::OutOfBounds("subimage origin precedes image origin".into()));
    };
    let (rows, cols) = sub.dim();
    let (nr, nc) = image.dim();
    if r0 + rows > nr || c0 + cols > nc {
        return Err(Error::OutOfBounds("subimage does not fit the image".into()));
    }
    let mut data = image.data.clone();
    data.slice_mut(s![r0..r0 + rows, c0..c0 + cols]).assign(&sub.data);
    Ok(image.with_data(data, "embed"))
}

/// Complex `(X, Y)` samples of an image.
#[derive(Clone, Debug, PartialEq)]
pub struct Spectrum {
    pub data: Array2<Complex64>,
    pub grid: SpatialFrequencyGrid,
    pub provenance: Provenance,
}

impl Spectrum {
    pub fn energy(&self) -> f64 {
        crate::fft::energy(&self.data)
    }
}

pub fn to_data_domain(sub: &ComplexImage) -> Result<Spectrum> {
    to_data_domain_with(sub, Exec::default())
}

pub fn to_data_domain_with(sub: &ComplexImage, exec: Exec) -> Result<Spectrum> {
    sub.validate()?;
    Ok(Spectrum { data: image_to_data(sub, exec), grid: sub.grid, provenance: sub.provenance.clone() })
}

pub fn from_data_domain(spec: &Spectrum) -> ComplexImage {
    from_data_domain_with(spec, Exec::default())
}

pub fn from_data_domain_with(spec: &Spectrum, exec: Exec) -> ComplexImage {
    ComplexImage { data: data_to_image(&spec.data, exec), grid: spec.grid, provenance: spec.provenance.clone() }
}

fn axes_match(a: &SpatialFrequencyGrid, b: &SpatialFrequencyGrid) -> bool {
    let close = |x: f64, y: f64| (x - y).abs() <= 1e-9 * x.abs().max(y.abs()).max(1e-12);
    a.shape() == b.shape()
        && close(a.x_axis.start, b.x_axis.start)
        && close(a.x_axis.step, b.x_axis.step)
        && close(a.y_axis.start, b.y_axis.start)
        && close(a.y_axis.step, b.y_axis.step)
        && close(a.y0, b.y0)
}

/// Multiply by `exp(-j Φ_e)` sample by sample.
pub fn apply_correction(spec: &Spectrum, surface: &PhaseErrorSurface) -> Result<Spectrum> {
    apply_correction_with(spec, surface, Exec::default())
}

pub fn apply_correction_with(spec: &Spectrum, surface: &PhaseErrorSurface, exec: Exec) -> Result<Spectrum> {
    if spec.data.dim() != surface.values.dim() || !axes_match(&spec.grid, &surface.grid) {
        return Err(Error::GridMismatch("correction surface grid differs from spectrum grid".into()));
    }
    let cols = spec.data.ncols();
    let mut data = spec.data.as_standard_layout().into_owned();
    let values = surface.values.as_standard_layout();
    let phases = values.as_slice().expect("standard layout");
    for_each_row(exec, data.as_slice_mut().expect("standard layout"), cols, |i, row| {
        for (j, v) in row.iter_mut().enumerate() {
            *v *= Complex64::from_polar(1.0, -phases[i * cols + j]);
        }
    });
    let mut provenance = spec.provenance.clone();
    provenance.chain.push("apply_correction".into());
    Ok(Spectrum { data, grid: spec.grid, provenance })
}

/// Correct a subimage with a given azimuth phase error profile.
pub fn correct_with_profile(sub: &ComplexImage, ape: &ApeProfile, exec: Exec) -> Result<(ComplexImage, f64)> {
    let mapped = surface_from_ape(ape, &sub.grid)?;
    let spec = apply_correction_with(&to_data_domain_with(sub, exec)?, &mapped.surface, exec)?;
    Ok((from_data_domain_with(&spec, exec), mapped.extrapolated_fraction))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    #[default]
    Pga,
    MinEntropy,
}

impl FromStr for Estimator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pga" => Ok(Estimator::Pga),
            "minentropy" | "min_entropy" => Ok(Estimator::MinEntropy),
            _ => Err(Error::InvalidInput(format!("unknown estimator `{s}` (pga, minentropy)"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RefocusConfig {
    pub estimator: Estimator,
    pub pga: PgaConfig,
    pub minentropy: MinEntropyConfig,
    /// Range-resolution reduction factor; derived from `rcm_bound` when absent.
    pub reduction_factor: Option<usize>,
    /// A-priori residual RCM bound, cells.
    pub rcm_bound: f64,
    /// Polynomial order of the fitted APE.
    pub ape_order: usize,
    /// Allow one re-estimation pass on the corrected subimage.
    pub refine: bool,
    /// Relative entropy improvement that triggers the refinement pass.
    pub refine_threshold: f64,
    pub exec: Exec,
}

impl Default for RefocusConfig {
    fn default() -> Self {
        Self {
            estimator: Estimator::Pga,
            pga: PgaConfig::default(),
            minentropy: MinEntropyConfig::default(),
            reduction_factor: None,
            rcm_bound: DEFAULT_RCM_BOUND,
            ape_order: DEFAULT_APE_ORDER,
            refine: true,
            refine_threshold: 0.01,
            exec: Exec::default(),
        }
    }
}

impl RefocusConfig {
    /// Effective reduction factor for a subimage with `cols` range cells.
    pub fn factor_for(&self, cols: usize) -> usize {
        let f = self.reduction_factor.unwrap_or_else(|| reduction_factor_for(self.rcm_bound));
        let max = (cols / MIN_REDUCED_CELLS).min(cols / 4).max(1);
        f.clamp(1, max)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RefocusReport {
    pub roi: RegionOfInterest,
    pub estimator: Estimator,
    pub reduction_factor: usize,
    pub entropy_before: f64,
    pub entropy_after: f64,
    pub contrast_before: f64,
    pub contrast_after: f64,
    /// pixels
    pub width_before: f64,
    /// pixels
    pub width_after: f64,
    /// range cells
    pub rcm_before: Option<f64>,
    /// range cells
    pub rcm_after: Option<f64>,
    /// Estimator iterations summed over passes.
    pub iterations: usize,
    pub passes: usize,
    pub energy_change: f64,
    pub extrapolated_fraction: f64,
    pub success: bool,
    pub flags: Vec<String>,
}

impl RefocusReport {
    /// One `key=value` pair per line.
    pub fn to_key_value(&self) -> String {
        let opt = |v: Option<f64>| v.map_or_else(|| "none".to_string(), |x| format!("{x:.6}"));
        let mut s = String::new();
        let _ = writeln!(s, "roi={}", self.roi);
        let _ = writeln!(s, "estimator={}", match self.estimator {
            Estimator::Pga => "pga",
            Estimator::MinEntropy => "minentropy",
        });
        let _ = writeln!(s, "reduction_factor={}", self.reduction_factor);
        let _ = writeln!(s, "entropy_before={:.6}", self.entropy_before);
        let _ = writeln!(s, "entropy_after={:.6}", self.entropy_after);
        let _ = writeln!(s, "contrast_before={:.6}", self.contrast_before);
        let _ = writeln!(s, "contrast_after={:.6}", self.contrast_after);
        let _ = writeln!(s, "width_before={:.6}", self.width_before);
        let _ = writeln!(s, "width_after={:.6}", self.width_after);
        let _ = writeln!(s, "rcm_before={}", opt(self.rcm_before));
        let _ = writeln!(s, "rcm_after={}", opt(self.rcm_after));
        let _ = writeln!(s, "iterations={}", self.iterations);
        let _ = writeln!(s, "passes={}", self.passes);
        let _ = writeln!(s, "energy_change={:.3e}", self.energy_change);
        let _ = writeln!(s, "extrapolated_fraction={:.6}", self.extrapolated_fraction);
        let _ = writeln!(s, "success={}", self.success);
        let _ = writeln!(s, "flags={}", self.flags.join(","));
        s
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises")
    }
}

/// Everything the pipeline produced.
#[derive(Clone, Debug)]
pub struct RefocusOutcome {
    pub image: ComplexImage,
    pub report: RefocusReport,
    /// Total APE applied (Taylor form), when estimation succeeded.
    pub ape: Option<ApeProfile>,
    pub estimates: Vec<ApeEstimate>,
}

fn estimate(sub: &ComplexImage, config: &RefocusConfig, factor: usize) -> Result<ApeEstimate> {
    let reduced = reduce_range_resolution(sub, factor)?;
    let est = match config.estimator {
        Estimator::Pga => pga_estimate(&reduced, &PgaConfig { exec: config.exec, ..config.pga })?,
        Estimator::MinEntropy => minentropy_estimate_with(&reduced, &MinEntropyConfig { exec: config.exec, ..config.minentropy })?,
    };
    Ok(detrend(&est))
}

fn sum_profiles(a: &ApeProfile, b: &ApeProfile) -> ApeProfile {
    match (&a.poly, &b.poly) {
        (Some(p), Some(q)) => ApeProfile::from_polynomial(a.x_axis, p.add(q)),
        _ => ApeProfile { x_axis: a.x_axis, phi0: a.phi0.iter().zip(&b.phi0).map(|(x, y)| x + y).collect(), poly: None },
    }
}

/// Extract, estimate, map and correct one moving target.
pub fn refocus_pipeline(image: &ComplexImage, roi: &RegionOfInterest, config: &RefocusConfig) -> Result<RefocusOutcome> {
    let sub = extract_subimage(image, roi)?;
    refocus_subimage(&sub, roi, config)
}

/// Pipeline on an already extracted subimage.
pub fn refocus_subimage(sub: &ComplexImage, roi: &RegionOfInterest, config: &RefocusConfig) -> Result<RefocusOutcome> {
    let exec = config.exec;
    let factor = config.factor_for(sub.dim().1);
    let entropy_before = entropy(&sub.data)?;
    let contrast_before = contrast(&sub.data)?;
    let width_before = azimuth_width_3db(&sub.data)?;
    let rcm_before = residual_rcm(sub).ok().map(|t| t.span);
    let mut flags = Vec::new();
    if rcm_before.is_none() {
        flags.push("rcm_before_untracked".to_string());
    }

    let mut estimates = Vec::new();
    let mut current = sub.clone();
    let mut current_entropy = entropy_before;
    let mut total_ape: Option<ApeProfile> = None;
    let mut extrapolated_fraction = 0.0;
    let mut passes = 0;
    let max_passes = if config.refine { 2 } else { 1 };
    for pass in 0..max_passes {
        let attempt = estimate(&current, config, factor).and_then(|est| {
            let ape = est.fitted_profile(config.ape_order)?;
            let (corrected, extra) = correct_with_profile(&current, &ape, exec)?;
            Ok((est, ape, corrected, extra))
        });
        let (est, ape, corrected, extra) = match attempt {
            Ok(v) => v,
            Err(e @ (Error::EstimationFailed(_) | Error::ZeroEnergy | Error::NotDetrended { .. } | Error::InvalidInput(_))) => {
                log::warn!("pass {}: {e}", pass + 1);
                flags.push(format!("estimation_failed_pass{}", pass + 1));
                break;
            }
            Err(e) => return Err(e),
        };
        flags.extend(est.flags.iter().cloned());
        let e_after = entropy(&corrected.data)?;
        if pass > 0 && !(e_after < current_entropy) {
            flags.push("refinement_rejected".into());
            estimates.push(est);
            break;
        }
        let improvement = (current_entropy - e_after) / current_entropy.abs().max(f64::MIN_POSITIVE);
        estimates.push(est);
        total_ape = Some(match &total_ape {
            Some(prev) => sum_profiles(prev, &ape),
            None => ape,
        });
        extrapolated_fraction = f64::max(extrapolated_fraction, extra);
        current = corrected;
        current_entropy = e_after;
        passes += 1;
        if improvement <= config.refine_threshold {
            break;
        }
    }

    let success = passes > 0;
    if !success {
        current = sub.clone();
    } else {
        current.provenance.chain.push(format!("refocus({passes} pass)"));
    }
    let iterations = estimates.iter().map(|e| e.iterations).sum();
    let energy_change = (current.energy() - sub.energy()) / sub.energy();
    let report = RefocusReport {
        roi: *roi,
        estimator: config.estimator,
        reduction_factor: factor,
        entropy_before,
        entropy_after: current_entropy,
        contrast_before,
        contrast_after: contrast(&current.data)?,
        width_before,
        width_after: azimuth_width_3db(&current.data)?,
        rcm_before,
        rcm_after: residual_rcm(&current).ok().map(|t| t.span),
        iterations,
        passes,
        energy_change,
        extrapolated_fraction,
        success,
        flags,
    };
    Ok(RefocusOutcome { image: current, report, ape: total_ape, estimates })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::axis::UniformAxis;

    fn image(rows: usize, cols: usize) -> ComplexImage {
        let data = Array2::from_shape_fn((rows, cols), |(i, j)| Complex64::new(i as f64 * 0.1, j as f64 - 3.0));
        let grid = SpatialFrequencyGrid {
            x_axis: UniformAxis::centered(0.0, 0.5, rows),
            y_axis: UniformAxis::centered(170.0, 0.1, cols),
            y0: 170.0,
            warp_slope: 0.01,
        };
        ComplexImage { data, grid, provenance: Provenance { parent_rows: rows, parent_cols: cols, ..Default::default() } }
    }

    #[test]
    fn roi_parsing_and_bounds() {
        let r: RegionOfInterest = "10, 20, 64, 32".parse().unwrap();
        assert_eq!(r, RegionOfInterest::new(10, 20, 64, 32));
        assert!("1,2,3".parse::<RegionOfInterest>().is_err());
        assert!(r.validate((74, 52)).is_ok());
        assert!(r.validate((73, 52)).is_err());
        assert!(RegionOfInterest::new(0, 0, 31, 64).validate((100, 100)).is_err());
        let c = RegionOfInterest::centered_on((2, 99), (32, 32), (100, 100)).unwrap();
        assert_eq!((c.az_offset, c.rg_offset), (0, 68));
    }

    #[test]
    fn crop_and_embed_round_trip() {
        let img = image(64, 48);
        let full = extract_subimage(&img, &RegionOfInterest::full((64, 48))).unwrap();
        assert_eq!(full.data, img.data);
        assert_eq!(full.grid, img.grid);
        let roi = RegionOfInterest::new(5, 9, 40, 32);
        let sub = extract_subimage(&img, &roi).unwrap();
        assert!(sub.energy() <= img.energy());
        let mut blank = img.clone();
        blank.data.fill(Complex64::new(0.0, 0.0));
        let back = embed(&blank, &sub).unwrap();
        assert_eq!(back.data.slice(s![5..45, 9..41]), img.data.slice(s![5..45, 9..41]));
        assert!(extract_subimage(&img, &RegionOfInterest::new(30, 0, 40, 32)).is_err());
    }

    #[test]
    fn correction_involution_and_energy() {
        let img = image(32, 32);
        let spec = to_data_domain(&img).unwrap();
        let values = Array2::from_shape_fn((32, 32), |(i, j)| ((i * 7 + j * 3) as f64).sin() * 5.0);
        let s = PhaseErrorSurface { values: values.clone(), grid: img.grid };
        let neg = PhaseErrorSurface { values: -values, grid: img.grid };
        let once = apply_correction(&spec, &s).unwrap();
        let back = apply_correction(&once, &neg).unwrap();
        for (a, b) in back.data.iter().zip(&spec.data) {
            assert!((a - b).norm() < 1e-12 * (1.0 + b.norm()));
        }
        assert!(((once.energy() - spec.energy()) / spec.energy()).abs() < 1e-12);
        let zero = PhaseErrorSurface { values: Array2::zeros((32, 32)), grid: img.grid };
        assert_eq!(apply_correction(&spec, &zero).unwrap().data, spec.data);
        let other = PhaseErrorSurface { values: Array2::zeros((32, 32)), grid: img.grid.cropped(32, 16) };
        assert!(apply_correction(&spec, &other).is_err());
    }
}
