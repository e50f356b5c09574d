//! Execution policy for the data-parallel inner loops.
//!
//! Every heavy kernel (echo synthesis, resampling, 2-D transforms) runs its
//! independent rows or columns through the helpers here. With the `parallel`
//! feature enabled, [`Exec::Parallel`] dispatches to rayon; otherwise it falls
//! back to the sequential path. Results never depend on the policy.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Exec {
    Sequential,
    Parallel,
}

impl Default for Exec {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Exec::Parallel
        } else {
            Exec::Sequential
        }
    }
}

impl Exec {
    /// True when this policy will actually fan out over threads.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Exec::Parallel
    }
}

/// Apply `f(row_index, row)` to every `width`-sized chunk of `data`.
pub(crate) fn for_each_row<T, F>(exec: Exec, data: &mut [T], width: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync + Send,
{
    if width == 0 {
        return;
    }
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        data.par_chunks_mut(width)
            .enumerate()
            .for_each(|(i, row)| f(i, row));
        return;
    }
    let _ = exec;
    data.chunks_mut(width)
        .enumerate()
        .for_each(|(i, row)| f(i, row));
}

/// Evaluate `f` over `0..n` and collect in index order.
pub(crate) fn map_indices<T, F>(exec: Exec, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        return (0..n).into_par_iter().map(f).collect();
    }
    let _ = exec;
    (0..n).map(f).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn policies_agree() {
        let seq = map_indices(Exec::Sequential, 100, |i| (i as f64).sqrt());
        let par = map_indices(Exec::Parallel, 100, |i| (i as f64).sqrt());
        assert_eq!(seq, par);

        let mut a = vec![1.0f64; 60];
        let mut b = a.clone();
        for_each_row(Exec::Sequential, &mut a, 6, |i, r| r.iter_mut().for_each(|v| *v *= i as f64));
        for_each_row(Exec::Parallel, &mut b, 6, |i, r| r.iter_mut().for_each(|v| *v *= i as f64));
        assert_eq!(a, b);
    }
}
