//! Multidimensional complex FFT built from 1-d passes along each axis.

use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

/// Planned forward and inverse transforms for a fixed row-major shape.
///
/// Neither direction is normalized; `inverse(forward(x)) = N x` with `N` the
/// total number of points.
#[derive(Clone)]
pub struct NdFft {
    shape: Vec<usize>,
    forward: Vec<Arc<dyn Fft<f64>>>,
    inverse: Vec<Arc<dyn Fft<f64>>>,
}

impl std::fmt::Debug for NdFft {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("NdFft").field("shape", &self.shape).finish()
    }
}

impl NdFft {
    pub fn new(shape: &[usize]) -> Self {
        let mut planner = FftPlanner::new();
        let forward = shape.iter().map(|&n| planner.plan_fft_forward(n)).collect();
        let inverse = shape.iter().map(|&n| planner.plan_fft_inverse(n)).collect();
        Self {
            shape: shape.to_vec(),
            forward,
            inverse,
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn forward(&self, data: &mut [Complex64]) {
        for axis in 0..self.shape.len() {
            self.pass(data, axis, &self.forward, usize::MAX);
        }
    }

    pub fn inverse(&self, data: &mut [Complex64]) {
        for axis in 0..self.shape.len() {
            self.pass(data, axis, &self.inverse, usize::MAX);
        }
    }

    /// Forward transform of data supported on `[0, keep)^d`.
    ///
    /// Axes are processed last to first, so when an axis is reached every
    /// earlier axis is still in the spatial domain and lanes with an earlier
    /// index `≥ keep` are known to be zero and skipped.
    pub fn forward_pruned(&self, data: &mut [Complex64], keep: usize) {
        for axis in (0..self.shape.len()).rev() {
            self.pass(data, axis, &self.forward, keep);
        }
    }

    /// Inverse transform where only the block `[0, keep)^d` of the result is
    /// needed; entries outside it are left unspecified.
    pub fn inverse_pruned(&self, data: &mut [Complex64], keep: usize) {
        for axis in 0..self.shape.len() {
            self.pass(data, axis, &self.inverse, keep);
        }
    }

    fn pass(&self, data: &mut [Complex64], axis: usize, plans: &[Arc<dyn Fft<f64>>], keep: usize) {
        assert_eq!(data.len(), self.len(), "buffer does not match FFT shape");
        transform_axis(data, &self.shape, axis, plans[axis].as_ref(), keep);
    }
}

/// Columns gathered per batch for strided lanes.
const BATCH: usize = 16;

/// Applies `plan` along `axis` to every lane whose indices on the preceding
/// axes are all below `keep`.
fn transform_axis(data: &mut [Complex64], shape: &[usize], axis: usize, plan: &dyn Fft<f64>, keep: usize) {
    let n = shape[axis];
    let inner: usize = shape[axis + 1..].iter().product();
    let lead = &shape[..axis];
    let active = |mut o: usize| {
        for &s in lead.iter().rev() {
            if o % s >= keep {
                return false;
            }
            o /= s;
        }
        true
    };
    let scratch_len = plan.get_inplace_scratch_len();
    if inner == 1 {
        data.par_chunks_mut(n).enumerate().for_each_init(
            || vec![Complex64::default(); scratch_len],
            |scratch, (o, lane)| {
                if active(o) {
                    plan.process_with_scratch(lane, scratch)
                }
            },
        );
        return;
    }
    data.par_chunks_mut(n * inner).enumerate().for_each_init(
        || {
            (
                vec![Complex64::default(); n * BATCH],
                vec![Complex64::default(); scratch_len],
            )
        },
        |(lanes, scratch), (o, block)| {
            if !active(o) {
                return;
            }
            for c0 in (0..inner).step_by(BATCH) {
                let width = BATCH.min(inner - c0);
                for k in 0..n {
                    let row = &block[k * inner + c0..k * inner + c0 + width];
                    for (b, v) in row.iter().enumerate() {
                        lanes[b * n + k] = *v;
                    }
                }
                plan.process_with_scratch(&mut lanes[..width * n], scratch);
                for k in 0..n {
                    let row = &mut block[k * inner + c0..k * inner + c0 + width];
                    for (b, v) in row.iter_mut().enumerate() {
                        *v = lanes[b * n + k];
                    }
                }
            }
        },
    );
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive_dft(data: &[Complex64], shape: &[usize]) -> Vec<Complex64> {
        let total: usize = shape.iter().product();
        let unravel = |mut i: usize| {
            let mut idx = vec![0; shape.len()];
            for a in (0..shape.len()).rev() {
                idx[a] = i % shape[a];
                i /= shape[a];
            }
            idx
        };
        (0..total)
            .map(|k| {
                let kk = unravel(k);
                let mut acc = Complex64::default();
                for (r, v) in data.iter().enumerate() {
                    let rr = unravel(r);
                    let phase: f64 = (0..shape.len())
                        .map(|a| (kk[a] * rr[a]) as f64 / shape[a] as f64)
                        .sum();
                    acc += v * Complex64::from_polar(1.0, -2.0 * std::f64::consts::PI * phase);
                }
                acc
            })
            .collect()
    }

    #[test]
    fn matches_naive_dft_in_three_dimensions() {
        let shape = [3, 4, 5];
        let data: Vec<Complex64> = (0..60)
            .map(|i| Complex64::new((i as f64 * 0.37).sin(), (i as f64 * 0.11).cos()))
            .collect();
        let mut fast = data.clone();
        let fft = NdFft::new(&shape);
        fft.forward(&mut fast);
        let slow = naive_dft(&data, &shape);
        for (a, b) in fast.iter().zip(&slow) {
            assert!((a - b).norm() < 1e-12);
        }
        fft.inverse(&mut fast);
        for (a, b) in fast.iter().zip(&data) {
            assert!((a / 60.0 - b).norm() < 1e-14);
        }
    }
}
