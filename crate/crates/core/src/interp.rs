//! Band-limited resampling with a Kaiser-windowed sinc kernel, plus a
//! cubic Lagrange interpolator for smooth real-valued histories.

use num_complex::Complex64;
use std::f64::consts::PI;

pub const DEFAULT_TAPS: usize = 16;
pub const DEFAULT_BETA: f64 = 8.0;

/// Zeroth-order modified Bessel function of the first kind.
pub fn bessel_i0(x: f64) -> f64 {
    let q = 0.25 * x * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut k = 1.0;
    while term > 1e-17 * sum {
        term *= q / (k * k);
        sum += term;
        k += 1.0;
    }
    sum
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KaiserSinc {
    taps: usize,
    beta: f64,
    i0_beta: f64,
}

impl Default for KaiserSinc {
    fn default() -> Self {
        Self::new(DEFAULT_TAPS, DEFAULT_BETA)
    }
}

impl KaiserSinc {
    pub fn new(taps: usize, beta: f64) -> Self {
        assert!(taps >= 2 && taps.is_multiple_of(2), "tap count must be even and >= 2");
        Self {
            taps,
            beta,
            i0_beta: bessel_i0(beta),
        }
    }

    pub fn taps(&self) -> usize {
        self.taps
    }

    /// Kernel weight at offset `x` samples from the output point.
    pub fn weight(&self, x: f64) -> f64 {
        let half = self.taps as f64 / 2.0;
        if x.abs() >= half {
            return 0.0;
        }
        let r = x / half;
        let window = bessel_i0(self.beta * (1.0 - r * r).sqrt()) / self.i0_beta;
        let sinc = if x == 0.0 { 1.0 } else { (PI * x).sin() / (PI * x) };
        sinc * window
    }

    /// Precompute taps for reading a line of `len` samples at fractional
    /// positions `positions` (in sample units).
    pub fn plan(&self, positions: &[f64], len: usize) -> InterpPlan {
        let taps = self.taps;
        let half = (taps / 2) as isize;
        let mut base = Vec::with_capacity(positions.len());
        let mut weights = Vec::with_capacity(positions.len() * taps);
        let mut valid = Vec::with_capacity(positions.len());
        let last = len as f64 - 1.0;
        for &u in positions {
            let ok = u.is_finite() && u >= -1e-9 && u <= last + 1e-9;
            valid.push(ok);
            if !ok {
                base.push(0);
                weights.extend(std::iter::repeat_n(0.0, taps));
                continue;
            }
            let b = u.floor() as isize;
            let frac = u - b as f64;
            base.push(b - half + 1);
            if frac == 0.0 {
                for k in 0..taps as isize {
                    weights.push(if k == half - 1 { 1.0 } else { 0.0 });
                }
            } else {
                for k in 0..taps as isize {
                    let idx = b - half + 1 + k;
                    weights.push(self.weight(u - idx as f64));
                }
            }
        }
        InterpPlan {
            taps,
            len,
            base,
            weights,
            valid,
        }
    }
}

/// Precomputed interpolation taps for a fixed set of output positions.
#[derive(Clone, Debug)]
pub struct InterpPlan {
    taps: usize,
    len: usize,
    base: Vec<isize>,
    weights: Vec<f64>,
    valid: Vec<bool>,
}

impl InterpPlan {
    pub fn output_len(&self) -> usize {
        self.base.len()
    }

    pub fn invalid_count(&self) -> usize {
        self.valid.iter().filter(|v| !**v).count()
    }

    /// Resample `input` (length must equal the planned line length) into `out`.
    /// Taps that fall outside the line contribute zero; invalid outputs are zero.
    pub fn apply(&self, input: &[Complex64], out: &mut [Complex64]) {
        debug_assert_eq!(input.len(), self.len);
        debug_assert_eq!(out.len(), self.base.len());
        let n = self.len as isize;
        for (i, o) in out.iter_mut().enumerate() {
            if !self.valid[i] {
                *o = Complex64::new(0.0, 0.0);
                continue;
            }
            let b = self.base[i];
            let w = &self.weights[i * self.taps..(i + 1) * self.taps];
            let mut acc = Complex64::new(0.0, 0.0);
            if b >= 0 && b + self.taps as isize <= n {
                let seg = &input[b as usize..b as usize + self.taps];
                for (s, wk) in seg.iter().zip(w) {
                    acc += s * *wk;
                }
            } else {
                for (k, wk) in w.iter().enumerate() {
                    let idx = b + k as isize;
                    if idx >= 0 && idx < n {
                        acc += input[idx as usize] * *wk;
                    }
                }
            }
            *o = acc;
        }
    }
}

/// Four-point Lagrange interpolation of uniformly sampled `values` at
/// fractional position `u`. Outside the samples the end cubic is extrapolated.
pub fn lagrange_cubic(values: &[f64], u: f64) -> f64 {
    let n = values.len();
    match n {
        0 => return f64::NAN,
        1 => return values[0],
        2 | 3 => {
            let i = (u.floor().max(0.0) as usize).min(n - 2);
            let f = u - i as f64;
            return values[i] * (1.0 - f) + values[i + 1] * f;
        }
        _ => {}
    }
    let i = (u.floor() as isize).clamp(1, n as isize - 3) as usize;
    let x = u - i as f64;
    let (p0, p1, p2, p3) = (values[i - 1], values[i], values[i + 1], values[i + 2]);
    // nodes at -1, 0, 1, 2
    let l0 = -x * (x - 1.0) * (x - 2.0) / 6.0;
    let l1 = (x + 1.0) * (x - 1.0) * (x - 2.0) / 2.0;
    let l2 = -(x + 1.0) * x * (x - 2.0) / 2.0;
    let l3 = (x + 1.0) * x * (x - 1.0) / 6.0;
    p0 * l0 + p1 * l1 + p2 * l2 + p3 * l3
}

/// Cubic Lagrange interpolation through four arbitrary nodes.
pub(crate) fn lagrange4(xs: [f64; 4], ys: [f64; 4], x: f64) -> f64 {
    let mut acc = 0.0;
    for i in 0..4 {
        let mut l = 1.0;
        for j in 0..4 {
            if i != j {
                l *= (x - xs[j]) / (xs[i] - xs[j]);
            }
        }
        acc += ys[i] * l;
    }
    acc
}
