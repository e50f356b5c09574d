use serde::{Deserialize, Serialize};

/// Uniformly sampled coordinate axis: `value(i) = start + i * step`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UniformAxis {
    pub start: f64,
    pub step: f64,
    pub len: usize,
}

impl UniformAxis {
    pub fn new(start: f64, step: f64, len: usize) -> Self {
        Self { start, step, len }
    }

    /// Axis with the zero (or `origin`) sample at index `len / 2`.
    pub fn centered(origin: f64, step: f64, len: usize) -> Self {
        Self {
            start: origin - (len / 2) as f64 * step,
            step,
            len,
        }
    }

    #[inline]
    pub fn value(&self, i: usize) -> f64 {
        self.start + i as f64 * self.step
    }

    #[inline]
    pub fn center_index(&self) -> usize {
        self.len / 2
    }

    /// Continuous (fractional) sample position of coordinate `v`.
    #[inline]
    pub fn position(&self, v: f64) -> f64 {
        (v - self.start) / self.step
    }

    pub fn end(&self) -> f64 {
        self.value(self.len.saturating_sub(1))
    }

    /// Largest absolute coordinate on the axis.
    pub fn max_abs(&self) -> f64 {
        self.start.abs().max(self.end().abs())
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.len).map(|i| self.value(i)).collect()
    }

    /// Same span sampled with `len` points, keeping the centre sample fixed.
    pub fn resampled(&self, len: usize) -> Self {
        if len == self.len {
            return *self;
        }
        let origin = self.value(self.center_index());
        let step = self.step * self.len as f64 / len as f64;
        Self::centered(origin, step, len)
    }
}
