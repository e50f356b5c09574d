//! Centred, unitary discrete Fourier transforms over 2-D grids.
//!
//! Sample `n` of a length-`N` line sits at offset `n - N/2` (integer
//! division) in both domains, so
//! `forward[q] = N^{-1/2} Σ_n x[n] exp(-j2π (n - N/2)(q - N/2) / N)`.
//! A data-domain phase `+j ω (n - N/2)` lands at output offset `+ω N / 2π`.

use std::sync::Arc;

use ndarray::Array2;
use num_complex::Complex64;
use rustfft::{Fft, FftDirection, FftPlanner};

use crate::parallel::{for_each_row, map_indices, Exec};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    /// Data domain to image domain.
    Forward,
    /// Image domain to data domain.
    Inverse,
}

impl From<Direction> for FftDirection {
    fn from(d: Direction) -> Self {
        match d {
            Direction::Forward => FftDirection::Forward,
            Direction::Inverse => FftDirection::Inverse,
        }
    }
}

fn plan(len: usize, dir: Direction) -> Arc<dyn Fft<f64>> {
    FftPlanner::new().plan_fft(len, dir.into())
}

fn centered_line(fft: &dyn Fft<f64>, line: &mut [Complex64], scratch: &mut Vec<Complex64>) {
    let n = line.len();
    let c = n / 2;
    scratch.resize(fft.get_inplace_scratch_len(), Complex64::new(0.0, 0.0));
    line.rotate_left(c);
    fft.process_with_scratch(line, scratch);
    line.rotate_right(c);
    let norm = 1.0 / (n as f64).sqrt();
    line.iter_mut().for_each(|v| *v *= norm);
}

/// Centred unitary DFT of a single line, in place.
pub fn centered_dft_1d(line: &mut [Complex64], dir: Direction) {
    if line.is_empty() {
        return;
    }
    let fft = plan(line.len(), dir);
    let mut scratch = Vec::new();
    centered_line(fft.as_ref(), line, &mut scratch);
}

/// Transform along each row (axis 1) of a standard-layout grid.
pub fn centered_dft_rows(data: &mut Array2<Complex64>, dir: Direction, exec: Exec) {
    let (_, cols) = data.dim();
    if cols == 0 {
        return;
    }
    let fft = plan(cols, dir);
    let slice = data
        .as_slice_mut()
        .expect("grid must be in standard layout");
    for_each_row(exec, slice, cols, |_, row| {
        let mut scratch = Vec::new();
        centered_line(fft.as_ref(), row, &mut scratch);
    });
}

/// Transform along each column (axis 0) of a grid.
pub fn centered_dft_cols(data: &mut Array2<Complex64>, dir: Direction, exec: Exec) {
    let (rows, cols) = data.dim();
    if rows == 0 {
        return;
    }
    let fft = plan(rows, dir);
    let columns: Vec<Vec<Complex64>> = map_indices(exec, cols, |j| {
        let mut col: Vec<Complex64> = data.column(j).to_vec();
        let mut scratch = Vec::new();
        centered_line(fft.as_ref(), &mut col, &mut scratch);
        col
    });
    for (j, col) in columns.into_iter().enumerate() {
        data.column_mut(j).iter_mut().zip(col).for_each(|(d, v)| *d = v);
    }
}

/// Full 2-D centred unitary DFT.
pub fn centered_dft_2d(data: &mut Array2<Complex64>, dir: Direction, exec: Exec) {
    centered_dft_rows(data, dir, exec);
    centered_dft_cols(data, dir, exec);
}

pub fn energy(data: &Array2<Complex64>) -> f64 {
    data.iter().map(|v| v.norm_sqr()).sum()
}
