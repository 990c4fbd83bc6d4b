//! Minimal 2-D complex FFT on square arrays, built on rustfft.
//!
//! Rows are transformed in place, the array is transposed, rows are
//! transformed again, and the array is transposed back. Row transforms are
//! independent, so the parallel path is bitwise deterministic.

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

pub struct Fft2 {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl Fft2 {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Fft2 {
            n,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    fn rows(&self, data: &mut [Complex64], plan: &Arc<dyn Fft<f64>>) {
        let n = self.n;
        let scratch = plan.get_inplace_scratch_len();
        crate::par::for_each_chunk_mut(data, n, |_, row| {
            let mut s = vec![Complex64::default(); scratch];
            plan.process_with_scratch(row, &mut s);
        });
    }

    fn transpose(&self, data: &mut [Complex64]) {
        let n = self.n;
        for i in 0..n {
            for j in (i + 1)..n {
                data.swap(i * n + j, j * n + i);
            }
        }
    }

    /// Unnormalized forward transform of a row-major `n x n` array.
    pub fn forward(&self, data: &mut [Complex64]) {
        assert_eq!(data.len(), self.n * self.n);
        self.rows(data, &self.forward.clone());
        self.transpose(data);
        self.rows(data, &self.forward.clone());
        self.transpose(data);
    }

    /// Inverse transform scaled by `1/n^2` (round trip is the identity).
    pub fn inverse(&self, data: &mut [Complex64]) {
        assert_eq!(data.len(), self.n * self.n);
        self.rows(data, &self.inverse.clone());
        self.transpose(data);
        self.rows(data, &self.inverse.clone());
        self.transpose(data);
        let scale = 1.0 / (self.n * self.n) as f64;
        for v in data.iter_mut() {
            *v *= scale;
        }
    }
}
