//! Focus-quality metrics.

use ndarray::Array2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft::{centered_dft_1d, centered_dft_cols, Direction};
use crate::parallel::Exec;
use crate::pfa::ComplexImage;

/// −3 dB width of an unweighted sinc, in samples.
pub const THEORETICAL_WIDTH_3DB: f64 = 0.886;
/// Upsampling factor used when measuring mainlobe widths.
pub const WIDTH_UPSAMPLE: usize = 16;
/// Rows whose peak is below this fraction of the strongest row are not tracked.
pub const TRACK_THRESHOLD: f64 = 0.3;
pub const MEDIAN_LENGTH: usize = 5;

fn total_energy(data: &Array2<Complex64>) -> Result<f64> {
    let e: f64 = data.iter().map(|v| v.norm_sqr()).sum();
    if !(e > 0.0) || !e.is_finite() {
        return Err(Error::ZeroEnergy);
    }
    Ok(e)
}

/// Shannon entropy (nats) of the normalised intensity distribution.
pub fn entropy(data: &Array2<Complex64>) -> Result<f64> {
    let total = total_energy(data)?;
    Ok(data
        .iter()
        .map(|v| v.norm_sqr() / total)
        .filter(|p| *p > 0.0)
        .map(|p| -p * p.ln())
        .sum())
}

/// Intensity standard deviation over mean.
pub fn contrast(data: &Array2<Complex64>) -> Result<f64> {
    let total = total_energy(data)?;
    let n = data.len() as f64;
    let mean = total / n;
    let var = data.iter().map(|v| (v.norm_sqr() - mean).powi(2)).sum::<f64>() / n;
    Ok(var.sqrt() / mean)
}

/// Index of the brightest pixel (first one on ties).
pub fn peak_index(data: &Array2<Complex64>) -> Option<(usize, usize)> {
    let mut best: Option<((usize, usize), f64)> = None;
    for (idx, v) in data.indexed_iter() {
        let m = v.norm_sqr();
        if best.is_none_or(|(_, b)| m > b) {
            best = Some((idx, m));
        }
    }
    best.filter(|(_, m)| *m > 0.0).map(|(i, _)| i)
}

/// Zero-pad the spectrum of `line` by `factor` and return the magnitude.
pub fn upsample_magnitude(line: &[Complex64], factor: usize) -> Vec<f64> {
    let n = line.len();
    let m = n * factor;
    let mut spec = line.to_vec();
    centered_dft_1d(&mut spec, Direction::Inverse);
    let mut padded = vec![Complex64::new(0.0, 0.0); m];
    for (k, v) in spec.into_iter().enumerate() {
        padded[k + m / 2 - n / 2] = v;
    }
    centered_dft_1d(&mut padded, Direction::Forward);
    padded.iter().map(|v| v.norm()).collect()
}

/// −3 dB mainlobe width of a line, in input samples, measured about the
/// global maximum.
pub fn width_3db(line: &[Complex64]) -> Result<f64> {
    if line.iter().all(|v| v.norm_sqr() == 0.0) {
        return Err(Error::ZeroEnergy);
    }
    let mag = upsample_magnitude(line, WIDTH_UPSAMPLE);
    let m = mag.len();
    let (k, peak) = mag
        .iter()
        .enumerate()
        .fold((0, 0.0), |(bi, bv), (i, v)| if *v > bv { (i, *v) } else { (bi, bv) });
    let level = peak / 2f64.sqrt();
    let at = |i: isize| mag[i.rem_euclid(m as isize) as usize];
    let crossing = |dir: isize| -> Result<f64> {
        let mut i = k as isize;
        for _ in 0..m {
            let next = i + dir;
            if at(next) < level {
                let (a, b) = (at(i), at(next));
                let frac = (a - level) / (a - b);
                return Ok((i - k as isize) as f64 + dir as f64 * frac);
            }
            i = next;
        }
        Err(Error::InvalidInput("no -3 dB crossing".into()))
    };
    let w = crossing(1)? - crossing(-1)?;
    Ok(w / WIDTH_UPSAMPLE as f64)
}

/// Azimuth −3 dB width (pixels) along the column through the peak.
pub fn azimuth_width_3db(data: &Array2<Complex64>) -> Result<f64> {
    let (_, col) = peak_index(data).ok_or(Error::ZeroEnergy)?;
    width_3db(&data.column(col).to_vec())
}

/// Per-row range-peak track.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RangeTrack {
    /// Sub-pixel peak position per row; `None` where the row was too weak.
    pub positions: Vec<Option<f64>>,
    /// Median-filtered positions of the tracked rows.
    pub smoothed: Vec<f64>,
    /// `max - min` of the smoothed track, cells.
    pub span: f64,
}

impl RangeTrack {
    pub fn rows_used(&self) -> usize {
        self.smoothed.len()
    }
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Running median with a window that shrinks at the ends.
pub fn median_filter(v: &[f64], len: usize) -> Vec<f64> {
    let h = len / 2;
    (0..v.len())
        .map(|i| {
            let lo = i.saturating_sub(h);
            let hi = (i + h + 1).min(v.len());
            median(&mut v[lo..hi].to_vec())
        })
        .collect()
}

/// Track the peak column of every row of a magnitude grid `[row, cell]`.
pub fn track_peaks(mag: &Array2<f64>) -> Result<RangeTrack> {
    let (rows, cols) = mag.dim();
    let peaks: Vec<(usize, f64)> = (0..rows)
        .map(|r| {
            mag.row(r)
                .iter()
                .enumerate()
                .fold((0, 0.0), |(bi, bv), (i, v)| if *v > bv { (i, *v) } else { (bi, bv) })
        })
        .collect();
    let strongest = peaks.iter().fold(0.0f64, |m, (_, v)| m.max(*v));
    if !(strongest > 0.0) {
        return Err(Error::EstimationFailed("no trackable peak".into()));
    }
    let positions: Vec<Option<f64>> = peaks
        .iter()
        .enumerate()
        .map(|(r, &(k, v))| {
            if v < TRACK_THRESHOLD * strongest {
                return None;
            }
            let l = mag[[r, (k + cols - 1) % cols]];
            let c = mag[[r, k]];
            let rr = mag[[r, (k + 1) % cols]];
            let denom = l - 2.0 * c + rr;
            let off = if denom.abs() > 0.0 { (0.5 * (l - rr) / denom).clamp(-0.5, 0.5) } else { 0.0 };
            Some(k as f64 + off)
        })
        .collect();
    let tracked: Vec<f64> = positions.iter().flatten().copied().collect();
    if tracked.len() < 2 {
        return Err(Error::EstimationFailed("fewer than two trackable rows".into()));
    }
    let smoothed = median_filter(&tracked, MEDIAN_LENGTH);
    let (lo, hi) = smoothed
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(*v), b.max(*v)));
    Ok(RangeTrack { positions, smoothed, span: hi - lo })
}

/// Range-compressed view of an image: azimuth back to the `X` domain,
/// range left in pixels. Returns magnitudes `[X sample, range pixel]`.
pub fn range_compressed_view(data: &Array2<Complex64>) -> Array2<f64> {
    let mut d = data.clone();
    centered_dft_cols(&mut d, Direction::Inverse, Exec::default());
    d.mapv(|v| v.norm())
}

/// Residual range migration of the dominant scatterer, in range cells.
pub fn residual_rcm(image: &ComplexImage) -> Result<RangeTrack> {
    track_peaks(&range_compressed_view(&image.data))
}

/// All focus metrics at once.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FocusMetrics {
    pub entropy: f64,
    pub contrast: f64,
    pub azimuth_width_3db: f64,
    pub residual_rcm: Option<f64>,
    pub peak_row: usize,
    pub peak_col: usize,
}

pub fn focus_metrics(image: &ComplexImage) -> Result<FocusMetrics> {
    let (peak_row, peak_col) = peak_index(&image.data).ok_or(Error::ZeroEnergy)?;
    Ok(FocusMetrics {
        entropy: entropy(&image.data)?,
        contrast: contrast(&image.data)?,
        azimuth_width_3db: azimuth_width_3db(&image.data)?,
        residual_rcm: residual_rcm(image).ok().map(|t| t.span),
        peak_row,
        peak_col,
    })
}
