//! Small geometry and numerics helpers used throughout the crate.

use serde::{Deserialize, Serialize};

/// A point or vector in the plane.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub fn new(x: f64, y: f64) -> Self {
        Vec2 { x, y }
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn norm_sq(self) -> f64 {
        self.x * self.x + self.y * self.y
    }

    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    /// Counterclockwise perpendicular `(-y, x)`.
    pub fn perp(self) -> Vec2 {
        Vec2::new(-self.y, self.x)
    }

    pub fn scale(self, s: f64) -> Vec2 {
        Vec2::new(self.x * s, self.y * s)
    }
}

impl std::ops::Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl std::ops::Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl std::ops::Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

impl std::ops::Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, s: f64) -> Vec2 {
        self.scale(s)
    }
}

/// A 2x2 matrix in row-major order.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Mat2 {
    pub a: f64, // (0,0)
    pub b: f64, // (0,1)
    pub c: f64, // (1,0)
    pub d: f64, // (1,1)
}

impl Mat2 {
    pub fn new(a: f64, b: f64, c: f64, d: f64) -> Self {
        Mat2 { a, b, c, d }
    }

    pub fn apply(self, v: Vec2) -> Vec2 {
        Vec2::new(self.a * v.x + self.b * v.y, self.c * v.x + self.d * v.y)
    }

    pub fn trace(self) -> f64 {
        self.a + self.d
    }

    /// Spectral (operator 2-) norm.
    pub fn op_norm(self) -> f64 {
        // Singular values of a 2x2 matrix from the closed form.
        let q = self.a * self.a + self.b * self.b + self.c * self.c + self.d * self.d;
        let det = self.a * self.d - self.b * self.c;
        let disc = (q * q - 4.0 * det * det).max(0.0).sqrt();
        (0.5 * (q + disc)).sqrt()
    }
}

impl std::ops::Add for Mat2 {
    type Output = Mat2;
    fn add(self, o: Mat2) -> Mat2 {
        Mat2::new(self.a + o.a, self.b + o.b, self.c + o.c, self.d + o.d)
    }
}

/// Sum of a slice in fixed pairwise order. Deterministic for a given input
/// ordering and far more accurate than a running sum on long cancellative
/// series.
pub fn pairwise_sum(v: &[f64]) -> f64 {
    match v.len() {
        0 => 0.0,
        1 => v[0],
        2 => v[0] + v[1],
        3 => (v[0] + v[1]) + v[2],
        n => {
            let mid = n / 2;
            pairwise_sum(&v[..mid]) + pairwise_sum(&v[mid..])
        }
    }
}

/// Neumaier compensated accumulator for long single-pass sums.
#[derive(Debug, Clone, Copy, Default)]
pub struct Accumulator {
    sum: f64,
    comp: f64,
}

impl Accumulator {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// `count` logarithmically spaced values from `a` to `b` inclusive.
pub fn logspace(a: f64, b: f64, count: usize) -> Vec<f64> {
    assert!(a > 0.0 && b > 0.0 && count >= 2);
    let (la, lb) = (a.ln(), b.ln());
    (0..count)
        .map(|i| (la + (lb - la) * i as f64 / (count - 1) as f64).exp())
        .collect()
}

/// Least-squares affine fit `y ~ a + b x`; returns `(a, b)`.
pub fn affine_fit(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len() as f64;
    if xs.len() < 2 {
        return (ys.first().copied().unwrap_or(0.0), 0.0);
    }
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (&x, &y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    if sxx == 0.0 {
        return (my, 0.0);
    }
    let b = sxy / sxx;
    (my - b * mx, b)
}

/// Composite Simpson over uniformly spaced samples; the final interval falls
/// back to trapezoid when the sample count is even.
pub fn simpson_uniform(dt: f64, values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let mut total = 0.0;
    let mut i = 0;
    while i + 2 < n {
        total += dt / 3.0 * (values[i] + 4.0 * values[i + 1] + values[i + 2]);
        i += 2;
    }
    if i + 1 < n {
        total += 0.5 * dt * (values[i] + values[i + 1]);
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn pairwise_sum_matches_exact_on_cancellative_series() {
        // 1 + eps added 1e6 times minus 1: naive summation loses digits.
        let mut v = vec![1.0];
        v.extend(std::iter::repeat(1e-16).take(1_000_000));
        v.push(-1.0);
        let s = pairwise_sum(&v);
        assert_relative_eq!(s, 1e-10, max_relative = 1e-6);
    }

    #[test]
    fn accumulator_compensates() {
        let mut acc = Accumulator::default();
        acc.add(1.0);
        for _ in 0..1_000_000 {
            acc.add(1e-16);
        }
        acc.add(-1.0);
        assert_relative_eq!(acc.value(), 1e-10, max_relative = 1e-9);
    }

    #[test]
    fn op_norm_of_rotation_and_strain() {
        let rot = Mat2::new(0.0, -2.0, 2.0, 0.0);
        assert_relative_eq!(rot.op_norm(), 2.0, epsilon = 1e-12);
        let strain = Mat2::new(3.0, 0.0, 0.0, -1.0);
        assert_relative_eq!(strain.op_norm(), 3.0, epsilon = 1e-12);
    }

    #[test]
    fn affine_fit_recovers_line() {
        let xs: Vec<f64> = (0..20).map(|i| i as f64 * 0.1).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 2.5 - 0.7 * x).collect();
        let (a, b) = affine_fit(&xs, &ys);
        assert_relative_eq!(a, 2.5, epsilon = 1e-12);
        assert_relative_eq!(b, -0.7, epsilon = 1e-12);
    }

    #[test]
    fn simpson_integrates_cubic_exactly() {
        // Simpson is exact on cubics over paired intervals.
        let n = 101;
        let dt = 1.0 / (n as f64 - 1.0);
        let vals: Vec<f64> = (0..n)
            .map(|i| {
                let t = i as f64 * dt;
                t * t * t - 2.0 * t
            })
            .collect();
        assert_relative_eq!(simpson_uniform(dt, &vals), 0.25 - 1.0, epsilon = 1e-12);
    }
}
