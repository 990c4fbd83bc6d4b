//! Chebyshev interpolation on an interval.

use serde::{Deserialize, Serialize};

/// Chebyshev interpolant built from samples at first-kind nodes, evaluated by
/// Clenshaw recurrence on the mapped variable.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Chebyshev {
    lo: f64,
    hi: f64,
    coeffs: Vec<f64>,
}

impl Chebyshev {
    /// Fit `f` with `n` first-kind Chebyshev nodes on `[lo, hi]`.
    pub fn fit<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, n: usize) -> Self {
        assert!(n >= 2 && hi > lo);
        let nf = n as f64;
        let samples: Vec<f64> = (0..n)
            .map(|k| {
                let theta = std::f64::consts::PI * (k as f64 + 0.5) / nf;
                let x = 0.5 * (lo + hi) + 0.5 * (hi - lo) * theta.cos();
                f(x)
            })
            .collect();
        let mut coeffs = vec![0.0; n];
        for (j, c) in coeffs.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (k, s) in samples.iter().enumerate() {
                let theta = std::f64::consts::PI * (k as f64 + 0.5) / nf;
                acc += s * (j as f64 * theta).cos();
            }
            *c = 2.0 * acc / nf;
        }
        coeffs[0] *= 0.5;
        Chebyshev { lo, hi, coeffs }
    }

    pub fn eval(&self, x: f64) -> f64 {
        let t = (2.0 * x - self.lo - self.hi) / (self.hi - self.lo);
        let mut b1 = 0.0;
        let mut b2 = 0.0;
        for &c in self.coeffs.iter().skip(1).rev() {
            let b0 = 2.0 * t * b1 - b2 + c;
            b2 = b1;
            b1 = b0;
        }
        t * b1 - b2 + self.coeffs[0]
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }
}
