//! The radial singular vortex: piecewise profile, induced velocity, and
//! velocity gradient.
//!
//! The profile equals `loglog(1/r)` below `e^{-2}`, a quintic bridge with C^2
//! contact on `[e^{-2}, e^{-1}]`, and zero outside. The tangential speed is
//! `G(rho) = (1/rho) \int_0^rho r w_s(r) dr`, evaluated from a Chebyshev fit
//! in the variable `xi = log(1/rho)` on the singular segment, an exact
//! polynomial antiderivative on the bridge, and the circulation law outside.

use crate::cheby::Chebyshev;
use crate::error::Error;
use crate::quad;
use crate::util::{Mat2, Vec2};
use crate::Result;
use serde::{Deserialize, Serialize};

/// Inner cutoff `e^{-2}`: below it the profile is exactly `loglog(1/r)`.
pub const INNER_CUTOFF: f64 = 0.1353352832366127;
/// Outer cutoff `e^{-1}`: beyond it the profile vanishes.
pub const OUTER_CUTOFF: f64 = 0.36787944117144233;

/// Radius below which the Chebyshev fit hands off to direct quadrature.
const RHO_MIN: f64 = 1e-12;
/// Truncation of the exponential tail in `psi`; the remainder is ~1e-36.
const PSI_TAIL: f64 = 40.0;

/// `psi(xi) = \int_0^inf e^{-2 tau} ln(xi + tau) d tau`, which equals
/// `G(rho)/rho` at `xi = log(1/rho)` for `rho <= e^{-2}`.
fn psi(xi: f64) -> f64 {
    quad::integrate(|tau| (-2.0 * tau).exp() * (xi + tau).ln(), 0.0, PSI_TAIL, 1e-15)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RadialVortexProfile {
    pub inner_cutoff: f64,
    pub outer_cutoff: f64,
    /// Monomial coefficients of the bridge in `t = (r - inner)/(outer - inner)`.
    pub bridge: [f64; 6],
    /// Chebyshev fit of `G(rho)/rho` in `xi = log(1/rho)` on the singular segment.
    pub g_interpolant: Chebyshev,
    /// `\int_0^{e^{-2}} r w_s(r) dr`.
    pub integral_inner: f64,
    /// `\int_0^{e^{-1}} r w_s(r) dr`; the circulation is `2 pi` times this.
    pub integral_total: f64,
}

impl Default for RadialVortexProfile {
    fn default() -> Self {
        Self::new()
    }
}

impl RadialVortexProfile {
    pub fn new() -> Self {
        let a = INNER_CUTOFF;
        let b = OUTER_CUTOFF;
        let h = b - a;

        // C^2 contact with loglog(1/r) at r = a, zero contact at r = b.
        let l: f64 = 2.0; // log(1/a)
        let f0 = l.ln();
        let f1 = -1.0 / (a * l);
        let f2 = (l - 1.0) / (a * a * l * l);
        let c0 = f0;
        let c1 = h * f1;
        let c2 = 0.5 * h * h * f2;
        let s0 = c0 + c1 + c2;
        let s1 = c1 + 2.0 * c2;
        let s2 = 2.0 * c2;
        let c3 = -10.0 * s0 + 4.0 * s1 - 0.5 * s2;
        let c4 = 15.0 * s0 - 7.0 * s1 + s2;
        let c5 = -6.0 * s0 + 3.0 * s1 - 0.5 * s2;
        let bridge = [c0, c1, c2, c3, c4, c5];

        let xi_max = (1.0 / RHO_MIN).ln();
        let g_interpolant = Chebyshev::fit(psi, 2.0, xi_max, 64);

        let integral_inner = (-4.0f64).exp() * psi(2.0);
        let integral_total = integral_inner + bridge_moment(&bridge, a, h, 1.0);

        RadialVortexProfile {
            inner_cutoff: a,
            outer_cutoff: b,
            bridge,
            g_interpolant,
            integral_inner,
            integral_total,
        }
    }

    fn bridge_t(&self, r: f64) -> f64 {
        (r - self.inner_cutoff) / (self.outer_cutoff - self.inner_cutoff)
    }

    fn bridge_eval(&self, t: f64) -> f64 {
        let c = &self.bridge;
        ((((c[5] * t + c[4]) * t + c[3]) * t + c[2]) * t + c[1]) * t + c[0]
    }

    fn bridge_deriv(&self, t: f64) -> f64 {
        let c = &self.bridge;
        (((5.0 * c[5] * t + 4.0 * c[4]) * t + 3.0 * c[3]) * t + 2.0 * c[2]) * t + c[1]
    }

    fn bridge_second(&self, t: f64) -> f64 {
        let c = &self.bridge;
        ((20.0 * c[5] * t + 12.0 * c[4]) * t + 6.0 * c[3]) * t + 2.0 * c[2]
    }

    /// Profile value at radius `r > 0`.
    pub fn ws_value(&self, r: f64) -> Result<f64> {
        if !(r > 0.0) {
            return Err(Error::domain(format!("ws_value requires r > 0, got {r}")));
        }
        Ok(self.ws_raw(r))
    }

    /// Same as [`ws_value`](Self::ws_value) for callers that already hold `r > 0`.
    pub fn ws_raw(&self, r: f64) -> f64 {
        if r < self.inner_cutoff {
            ((1.0 / r).ln()).ln()
        } else if r <= self.outer_cutoff {
            self.bridge_eval(self.bridge_t(r))
        } else {
            0.0
        }
    }

    /// Radial derivative `w_s'(r)` for `r > 0`.
    pub fn ws_prime(&self, r: f64) -> f64 {
        if r < self.inner_cutoff {
            let l = (1.0 / r).ln();
            -1.0 / (r * l)
        } else if r <= self.outer_cutoff {
            self.bridge_deriv(self.bridge_t(r)) / (self.outer_cutoff - self.inner_cutoff)
        } else {
            0.0
        }
    }

    /// Radial second derivative `w_s''(r)` for `r > 0`.
    pub fn ws_second(&self, r: f64) -> f64 {
        if r < self.inner_cutoff {
            let l = (1.0 / r).ln();
            (l - 1.0) / (r * r * l * l)
        } else if r <= self.outer_cutoff {
            let h = self.outer_cutoff - self.inner_cutoff;
            self.bridge_second(self.bridge_t(r)) / (h * h)
        } else {
            0.0
        }
    }

    /// `grad w_s` at a point away from the origin.
    pub fn ws_gradient(&self, x: Vec2) -> Result<Vec2> {
        let rho = x.norm();
        if rho == 0.0 {
            return Err(Error::domain("ws_gradient is singular at the origin"));
        }
        Ok(x.scale(self.ws_prime(rho) / rho))
    }

    /// Tangential speed `G(rho)`; zero at the origin.
    pub fn g_value(&self, rho: f64) -> f64 {
        if rho <= 0.0 {
            return 0.0;
        }
        if rho > self.outer_cutoff {
            return self.integral_total / rho;
        }
        if rho >= self.inner_cutoff {
            let t = self.bridge_t(rho);
            return (self.integral_inner
                + bridge_moment(
                    &self.bridge,
                    self.inner_cutoff,
                    self.outer_cutoff - self.inner_cutoff,
                    t,
                ))
                / rho;
        }
        let xi = (1.0 / rho).ln();
        if rho < RHO_MIN {
            rho * psi(xi)
        } else {
            rho * self.g_interpolant.eval(xi)
        }
    }

    /// `G'(rho) = w_s(rho) - G(rho)/rho`.
    pub fn g_prime(&self, rho: f64) -> f64 {
        self.ws_raw(rho) - self.g_value(rho) / rho
    }

    /// Velocity of the singular vortex, `G(|x|) e_theta`; zero at the origin.
    pub fn us_velocity(&self, x: Vec2) -> Vec2 {
        let rho = x.norm();
        if rho == 0.0 {
            return Vec2::ZERO;
        }
        x.perp().scale(self.g_value(rho) / rho)
    }

    /// Velocity gradient of the singular vortex away from the origin.
    pub fn us_gradient(&self, x: Vec2) -> Result<Mat2> {
        let rho = x.norm();
        if rho == 0.0 {
            return Err(Error::domain("us_gradient is singular at the origin"));
        }
        let g_over = self.g_value(rho) / rho;
        let d = self.g_prime(rho) - g_over;
        let (cx, cy) = (x.x / rho, x.y / rho);
        // G/rho * [[0,-1],[1,0]] + (G' - G/rho) * e_theta e_r^T
        Ok(Mat2::new(
            -d * cx * cy,
            -g_over - d * cy * cy,
            g_over + d * cx * cx,
            d * cx * cy,
        ))
    }

    /// Total circulation `2 pi \int_0^{e^{-1}} r w_s dr`.
    pub fn circulation(&self) -> f64 {
        2.0 * std::f64::consts::PI * self.integral_total
    }

    /// Largest radii (velocity bound, gradient bound) below which
    /// `|u_s| <= |x| loglog(1/|x|)` and `|grad u_s| <= 3 loglog(1/|x|)`
    /// hold on a 400-point log scan of `[1e-10, e^{-1})`.
    pub fn empirical_bound_radii(&self) -> (f64, f64) {
        let radii = crate::util::logspace(1e-10, self.outer_cutoff * 0.999, 400);
        let mut r_vel = 0.0;
        let mut r_grad = 0.0;
        for &rho in &radii {
            let llog = ((1.0 / rho).ln()).ln();
            if llog <= 0.0 {
                break;
            }
            let vel_ok = self.g_value(rho) <= rho * llog;
            let grad_ok = self
                .us_gradient(Vec2::new(rho, 0.0))
                .map(|m| m.op_norm() <= 3.0 * llog)
                .unwrap_or(false);
            if vel_ok {
                r_vel = rho;
            }
            if grad_ok {
                r_grad = rho;
            }
            if !vel_ok && !grad_ok {
                break;
            }
        }
        (r_vel, r_grad)
    }
}

/// `\int_{a}^{a + h t} r s(r) dr` for the bridge polynomial in `t`-form.
fn bridge_moment(c: &[f64; 6], a: f64, h: f64, t: f64) -> f64 {
    let mut acc = 0.0;
    let mut tk1 = t; // t^{k+1}
    for (k, &ck) in c.iter().enumerate() {
        let tk2 = tk1 * t;
        acc += ck * (a * tk1 / (k as f64 + 1.0) + h * tk2 / (k as f64 + 2.0));
        tk1 = tk2;
    }
    h * acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn profile() -> RadialVortexProfile {
        RadialVortexProfile::new()
    }

    #[test]
    fn ws_closed_form_cases() {
        let p = profile();
        // loglog(1/e^{-e}) = log(e) = 1
        assert_relative_eq!(p.ws_value((-std::f64::consts::E).exp()).unwrap(), 1.0, epsilon = 1e-14);
        // support ends at e^{-1}
        assert_eq!(p.ws_value(0.5).unwrap(), 0.0);
        // continuity at the inner cutoff: both sides give log 2
        let a = INNER_CUTOFF;
        let left = p.ws_value(a * (1.0 - 1e-13)).unwrap();
        let right = p.ws_value(a).unwrap();
        assert_relative_eq!(left, 2.0f64.ln(), epsilon = 1e-10);
        assert_relative_eq!(right, 2.0f64.ln(), epsilon = 1e-10);
    }

    #[test]
    fn ws_rejects_nonpositive_radius() {
        let p = profile();
        assert!(p.ws_value(0.0).is_err());
        assert!(p.ws_value(-1.0).is_err());
    }

    #[test]
    fn bridge_has_c2_contact() {
        let p = profile();
        let a = INNER_CUTOFF;
        let b = OUTER_CUTOFF;
        let h = b - a;
        let l: f64 = 2.0;
        // left contact vs loglog closed forms
        assert_relative_eq!(p.bridge_eval(0.0), l.ln(), max_relative = 1e-12);
        assert_relative_eq!(p.bridge_deriv(0.0) / h, -1.0 / (a * l), max_relative = 1e-12);
        assert_relative_eq!(
            p.bridge_second(0.0) / (h * h),
            (l - 1.0) / (a * a * l * l),
            max_relative = 1e-12
        );
        // right contact: value, slope, curvature all vanish
        assert_abs_diff_eq!(p.bridge_eval(1.0), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p.bridge_deriv(1.0) / h, 0.0, epsilon = 1e-10);
        assert_abs_diff_eq!(p.bridge_second(1.0) / (h * h), 0.0, epsilon = 1e-9);
    }

    #[test]
    fn ws_gradient_closed_form() {
        let p = profile();
        let r = (-std::f64::consts::E).exp();
        let g = p.ws_gradient(Vec2::new(0.0, r)).unwrap();
        // -x/(|x|^2 log(1/|x|)) at (0, e^{-e}) is (0, -e^{e-1})
        assert_abs_diff_eq!(g.x, 0.0, epsilon = 1e-14);
        assert_relative_eq!(g.y, -(std::f64::consts::E - 1.0).exp(), max_relative = 1e-13);
        // vanishes outside the support
        let far = p.ws_gradient(Vec2::new(0.5, 0.0)).unwrap();
        assert_eq!((far.x, far.y), (0.0, 0.0));
        assert!(p.ws_gradient(Vec2::ZERO).is_err());
    }

    #[test]
    fn ws_gradient_orthogonal_to_velocity() {
        let p = profile();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let rho = 10f64.powf(rng.gen_range(-8.0..-0.5));
            let th = rng.gen_range(0.0..std::f64::consts::TAU);
            let x = Vec2::new(rho * th.cos(), rho * th.sin());
            let dot = p.ws_gradient(x).unwrap().dot(p.us_velocity(x));
            assert!(dot.abs() <= 1e-12, "dot = {dot}");
        }
    }

    #[test]
    fn us_vanishes_at_origin_and_ratio_tends_to_half() {
        let p = profile();
        assert_eq!(p.us_velocity(Vec2::ZERO), Vec2::ZERO);
        let mut prev = f64::INFINITY;
        for &rho in &[1e-4, 1e-6, 1e-8] {
            let speed = p.us_velocity(Vec2::new(0.0, rho)).norm();
            let ratio = speed / (rho * ((1.0f64 / rho).ln()).ln());
            assert!(ratio > 0.45 && ratio < 0.55, "ratio {ratio} at rho {rho}");
            assert!((ratio - 0.5).abs() < (prev - 0.5).abs());
            prev = ratio;
        }
    }

    #[test]
    fn g_matches_adaptive_quadrature_oracle() {
        let p = profile();
        // Independent route: integrate r*w_s directly, split at the cutoff.
        let oracle = |rho: f64| {
            let split = rho.min(INNER_CUTOFF);
            let mut total = quad::integrate(|r| r * p.ws_raw(r), 0.0, split, 1e-15);
            if rho > INNER_CUTOFF {
                total += quad::integrate(|r| r * p.ws_raw(r), INNER_CUTOFF, rho, 1e-15);
            }
            total / rho
        };
        for &rho in &[0.2, 0.05, INNER_CUTOFF, 1e-3, 1e-7, 1e-11] {
            assert_relative_eq!(p.g_value(rho), oracle(rho), max_relative = 1e-10);
        }
        // below the interpolant floor the quadrature fallback takes over
        assert_relative_eq!(p.g_value(1e-13), oracle(1e-13), max_relative = 1e-10);
    }

    #[test]
    fn far_field_matches_circulation_law() {
        let p = profile();
        let gamma0 = quad::integrate(|r| r * p.ws_raw(r), 0.0, INNER_CUTOFF, 1e-15)
            + quad::integrate(|r| r * p.ws_raw(r), INNER_CUTOFF, OUTER_CUTOFF, 1e-15);
        for &rho in &[1.0, 2.0, 5.0] {
            let speed = p.us_velocity(Vec2::new(rho, 0.0)).norm();
            assert_relative_eq!(speed, gamma0 / rho, max_relative = 1e-8);
        }
    }

    #[test]
    fn us_gradient_finite_difference_oracle() {
        let p = profile();
        let x = Vec2::new(0.01, 0.02);
        let m = p.us_gradient(x).unwrap();
        let d = 1e-6;
        let fd = |dir: Vec2| {
            let up = p.us_velocity(x + dir.scale(d));
            let dn = p.us_velocity(x - dir.scale(d));
            (up - dn).scale(1.0 / (2.0 * d))
        };
        let col_x = fd(Vec2::new(1.0, 0.0));
        let col_y = fd(Vec2::new(0.0, 1.0));
        assert_abs_diff_eq!(m.a, col_x.x, epsilon = 1e-5);
        assert_abs_diff_eq!(m.c, col_x.y, epsilon = 1e-5);
        assert_abs_diff_eq!(m.b, col_y.x, epsilon = 1e-5);
        assert_abs_diff_eq!(m.d, col_y.y, epsilon = 1e-5);
    }

    #[test]
    fn us_gradient_trace_free_and_bounded() {
        let p = profile();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let rho = 10f64.powf(rng.gen_range(-8.0..-2.0)); // below R = 1e-2
            let th = rng.gen_range(0.0..std::f64::consts::TAU);
            let x = Vec2::new(rho * th.cos(), rho * th.sin());
            let m = p.us_gradient(x).unwrap();
            assert_abs_diff_eq!(m.trace(), 0.0, epsilon = 1e-12 * m.op_norm().max(1.0));
            let llog = ((1.0 / rho).ln()).ln();
            assert!(m.op_norm() <= 3.0 * llog, "norm {} vs {llog}", m.op_norm());
            assert!(p.us_velocity(x).norm() <= rho * llog);
        }
    }

    #[test]
    fn piecewise_consistency_with_finite_differences() {
        let p = profile();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut checked = 0;
        while checked < 1000 {
            let rho = 10f64.powf(rng.gen_range(-6.0..0.0));
            // stay away from the two cutoffs
            if (rho - INNER_CUTOFF).abs() < 1e-3 || (rho - OUTER_CUTOFF).abs() < 1e-3 {
                continue;
            }
            let th = rng.gen_range(0.0..std::f64::consts::TAU);
            let x = Vec2::new(rho * th.cos(), rho * th.sin());
            let h = 1e-3 * rho;
            // 4th-order FD of ws along e_r vs the analytic gradient
            let f = |s: f64| p.ws_raw(rho + s);
            let fd = (-f(2.0 * h) + 8.0 * f(h) - 8.0 * f(-h) + f(-2.0 * h)) / (12.0 * h);
            let grad = p.ws_gradient(x).unwrap().norm() * p.ws_prime(rho).signum();
            if fd.abs() > 1e-12 {
                assert_relative_eq!(fd, grad, max_relative = 1e-5);
            }
            checked += 1;
        }
    }

    #[test]
    fn empirical_bound_radii_cover_r() {
        let (r_vel, r_grad) = profile().empirical_bound_radii();
        // both bounds hold comfortably past R = 1e-2
        assert!(r_vel > 1e-2, "velocity bound radius {r_vel}");
        assert!(r_grad > 1e-2, "gradient bound radius {r_grad}");
    }

    #[test]
    fn profile_serializes_to_json() {
        let p = profile();
        let text = serde_json::to_string(&p).unwrap();
        let back: RadialVortexProfile = serde_json::from_str(&text).unwrap();
        assert_eq!(back.bridge, p.bridge);
        assert_eq!(back.integral_total, p.integral_total);
    }
}
