//! The four-block mollified initial perturbation and its hyperbolicity
//! certificate.
//!
//! `g_0 = eta_eps * c_0` where `c_0` is +1 on `[21,23]^2` and its mirror,
//! -1 on the two off-diagonal blocks, and `eta_eps` is the standard radial
//! bump mollifier. Grid values are *exact* block integrals of the mollifier
//! (adaptive quadrature on the band where a cell sees a block edge), so the
//! even symmetry and support statements hold to quadrature precision, and the
//! field is then symmetrized to make the mirror identity exact.

use crate::biot::BiotSavart;
use crate::error::Error;
use crate::field::{Grid2D, ScalarField};
use crate::quad;
use crate::util::Vec2;
use crate::Result;
use serde::{Deserialize, Serialize};
use std::sync::OnceLock;

/// One signed axis-aligned square of the initial pattern.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Block {
    pub lo: Vec2,
    pub hi: Vec2,
    pub sign: f64,
}

/// The four-block pattern: +1 on the diagonal squares, -1 off-diagonal.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BlockPattern {
    pub blocks: Vec<Block>,
}

impl BlockPattern {
    pub fn standard() -> Self {
        let b = |x0: f64, x1: f64, y0: f64, y1: f64, sign: f64| Block {
            lo: Vec2::new(x0, y0),
            hi: Vec2::new(x1, y1),
            sign,
        };
        BlockPattern {
            blocks: vec![
                b(21.0, 23.0, 21.0, 23.0, 1.0),
                b(-23.0, -21.0, -23.0, -21.0, 1.0),
                b(-23.0, -21.0, 21.0, 23.0, -1.0),
                b(21.0, 23.0, -23.0, -21.0, -1.0),
            ],
        }
    }

    /// Indicator value of the unmollified pattern.
    pub fn value(&self, p: Vec2) -> f64 {
        self.blocks
            .iter()
            .filter(|b| p.x >= b.lo.x && p.x <= b.hi.x && p.y >= b.lo.y && p.y <= b.hi.y)
            .map(|b| b.sign)
            .sum()
    }

    /// Outer radius of the mollified support.
    pub fn support_radius(&self, epsilon: f64) -> f64 {
        self.blocks
            .iter()
            .map(|b| {
                let corners = [
                    Vec2::new(b.lo.x, b.lo.y),
                    Vec2::new(b.hi.x, b.lo.y),
                    Vec2::new(b.lo.x, b.hi.y),
                    Vec2::new(b.hi.x, b.hi.y),
                ];
                corners.iter().map(|c| c.norm()).fold(0.0, f64::max)
            })
            .fold(0.0, f64::max)
            + epsilon
    }
}

/// Unnormalized bump `exp(-1/(1-r^2))` on the unit disk.
#[inline]
fn bump(rsq: f64) -> f64 {
    if rsq >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - rsq)).exp()
    }
}

/// Mass of the unnormalized bump over the plane.
fn bump_mass() -> f64 {
    static MASS: OnceLock<f64> = OnceLock::new();
    *MASS.get_or_init(|| {
        2.0 * std::f64::consts::PI
            * quad::integrate(|r| r * bump(r * r), 0.0, 1.0, 1e-15)
    })
}

/// `\int_R eta` over an axis-aligned rectangle in mollifier coordinates
/// (already divided by epsilon), normalized to unit total mass.
fn bump_box_integral(mut lx: f64, mut ux: f64, mut ly: f64, mut uy: f64) -> f64 {
    lx = lx.max(-1.0);
    ux = ux.min(1.0);
    ly = ly.max(-1.0);
    uy = uy.min(1.0);
    if lx >= ux || ly >= uy {
        return 0.0;
    }
    let inner = |x: f64| {
        let s2 = 1.0 - x * x;
        if s2 <= 0.0 {
            return 0.0;
        }
        let s = s2.sqrt();
        let (a, b) = (ly.max(-s), uy.min(s));
        if a >= b {
            return 0.0;
        }
        quad::integrate(|y| bump(x * x + y * y), a, b, 1e-14)
    };
    quad::integrate(inner, lx, ux, 1e-13) / bump_mass()
}

/// Mollified pattern value at a point: `(eta_eps * c_0)(x)`.
pub fn g0_value(pattern: &BlockPattern, epsilon: f64, x: Vec2) -> f64 {
    let mut total = 0.0;
    for b in &pattern.blocks {
        // rectangle of displacement (x - y)/eps as y ranges over the block
        let lx = (x.x - b.hi.x) / epsilon;
        let ux = (x.x - b.lo.x) / epsilon;
        let ly = (x.y - b.hi.y) / epsilon;
        let uy = (x.y - b.lo.y) / epsilon;
        if lx >= 1.0 || ux <= -1.0 || ly >= 1.0 || uy <= -1.0 {
            continue;
        }
        if lx <= -1.0 && ux >= 1.0 && ly <= -1.0 && uy >= 1.0 {
            total += b.sign; // the whole mollifier disk sits inside the block
            continue;
        }
        total += b.sign * bump_box_integral(lx, ux, ly, uy);
    }
    total
}

/// Build the mollified four-block field on a grid and symmetrize it.
pub fn build_g0(grid: Grid2D, epsilon: f64) -> Result<ScalarField> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::invalid(format!(
            "mollification scale {epsilon} must lie in (0, 1)"
        )));
    }
    let pattern = BlockPattern::standard();
    let needed = pattern.support_radius(epsilon)
        + (crate::biot::SUPPORT_MARGIN as f64 + 2.0) * grid.spacing();
    if grid.half_width() < needed {
        return Err(Error::invalid(format!(
            "grid half width {} cannot hold the block pattern (needs {needed:.1})",
            grid.half_width()
        )));
    }
    let mut g0 = ScalarField::from_fn(grid, |p| g0_value(&pattern, epsilon, p));
    g0.symmetrize_even();
    Ok(g0)
}

/// Second velocity component along the vertical axis, `u^2_{g0}(0, r)`,
/// by direct quadrature (paired for even fields).
pub fn axis_velocity_profile(
    g0: &ScalarField,
    bs: &BiotSavart,
    radii: &[f64],
) -> Vec<(f64, f64)> {
    radii
        .iter()
        .map(|&r| (r, bs.direct_velocity_at(g0, Vec2::new(0.0, r)).y))
        .collect()
}

/// Certified hyperbolic band for the axial velocity slope.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HyperbolicityFit {
    /// Lower slope bound: `-(K+1) r <= u^2(0,r) <= -K r` on `(0, delta]`.
    pub k: f64,
    /// Largest certified radius.
    pub delta: f64,
    /// Mollification scale the field was built with.
    pub epsilon: f64,
    /// Max distance of any tested slope outside the band (0 when certified).
    pub residual: f64,
}

/// Safety margin subtracted from the observed slope floor.
const K_MARGIN: f64 = 1e-3;

/// Fit the hyperbolicity band from axis-profile samples `(r, u^2(0,r))`.
pub fn fit_hyperbolicity(profile: &[(f64, f64)], epsilon: f64) -> Result<HyperbolicityFit> {
    if profile.len() < 4 {
        return Err(Error::invalid("hyperbolicity fit needs at least 4 radii"));
    }
    let rmin = profile.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let rmax = profile.iter().map(|p| p.0).fold(0.0f64, f64::max);
    if rmax / rmin < 1e3 {
        return Err(Error::invalid(format!(
            "profile must cover at least 3 decades of r (got {rmin:.2e}..{rmax:.2e})"
        )));
    }
    for &(r, u2) in profile {
        if u2 >= 0.0 {
            return Err(Error::Construction(format!(
                "axial velocity is not inward at r = {r:.3e} (u2 = {u2:.3e}); \
                 adjust the mollification scale epsilon"
            )));
        }
    }
    let slopes: Vec<(f64, f64)> = profile.iter().map(|&(r, u2)| (r, u2 / r)).collect();
    let k = slopes.iter().map(|&(_, s)| -s).fold(f64::INFINITY, f64::min) - K_MARGIN;
    if k <= 0.0 {
        return Err(Error::Construction(format!(
            "slope floor {k:.3e} after the safety margin is not positive"
        )));
    }
    // largest radius such that every tested slope below it stays in the band
    let mut sorted = slopes.clone();
    sorted.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let in_band = |s: f64| -(k + 1.0) <= s && s <= -k;
    let mut delta = 0.0;
    let mut residual: f64 = 0.0;
    for &(r, s) in &sorted {
        if in_band(s) {
            delta = r;
            residual = residual.max(0.0);
        } else {
            residual = residual.max((s - (-k)).max(-(k + 1.0) - s));
            break;
        }
    }
    if delta == 0.0 {
        return Err(Error::Construction("no radius satisfies the band".into()));
    }
    Ok(HyperbolicityFit { k, delta, epsilon, residual })
}

/// Build the axis profile and certify the band in one step; rejects fields
/// that are not even-symmetric.
pub fn certify_hyperbolicity(
    g0: &ScalarField,
    bs: &BiotSavart,
    radii: &[f64],
    epsilon: f64,
) -> Result<HyperbolicityFit> {
    let defect = g0.even_defect();
    let scale = g0.max_abs().max(1e-300);
    if defect > 1e-10 * scale {
        return Err(Error::invalid(format!(
            "hyperbolicity certificate requires an even field (defect {defect:.3e})"
        )));
    }
    let profile = axis_velocity_profile(g0, bs, radii);
    fit_hyperbolicity(&profile, epsilon)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use crate::util::logspace;

    fn small_grid() -> Grid2D {
        Grid2D::new(256, 48.0).unwrap()
    }

    #[test]
    fn mollifier_mass_is_one() {
        // full-disk box covers the support
        assert_relative_eq!(bump_box_integral(-1.0, 1.0, -1.0, 1.0), 1.0, epsilon = 1e-10);
    }

    #[test]
    fn pattern_is_even_with_zero_integral() {
        let p = BlockPattern::standard();
        for &pt in &[Vec2::new(22.0, 22.0), Vec2::new(-22.0, 22.0), Vec2::new(21.5, -22.5)] {
            assert_eq!(p.value(pt), p.value(-pt) * 1.0);
        }
        let total: f64 = p
            .blocks
            .iter()
            .map(|b| b.sign * (b.hi.x - b.lo.x) * (b.hi.y - b.lo.y))
            .sum();
        assert_eq!(total, 0.0);
    }

    #[test]
    fn g0_deep_interior_values() {
        let g0 = build_g0(small_grid(), 0.5).unwrap();
        // (22, 22) is more than eps from every block edge
        let v = g0.sample(Vec2::new(22.0, 22.0)).unwrap();
        assert_relative_eq!(v, 1.0, epsilon = 1e-9);
        let w = g0.sample(Vec2::new(-22.0, 22.0)).unwrap();
        assert_relative_eq!(w, -1.0, epsilon = 1e-9);
        assert!(g0.max_abs() <= 1.0 + 1e-9);
    }

    #[test]
    fn g0_is_even_and_clear_of_the_origin() {
        let g0 = build_g0(small_grid(), 0.5).unwrap();
        assert!(g0.even_defect() <= 1e-12);
        let grid = g0.grid();
        let n = grid.n();
        for iy in 0..n {
            for ix in 0..n {
                if grid.node(ix, iy).norm() < 20.0 {
                    assert_eq!(g0.at(ix, iy), 0.0, "node ({ix},{iy}) inside B(0,20)");
                }
            }
        }
    }

    #[test]
    fn epsilon_is_validated() {
        assert!(build_g0(small_grid(), 1.0).is_err());
        assert!(build_g0(small_grid(), 0.0).is_err());
        // a grid too small for the pattern
        let tiny = Grid2D::new(64, 8.0).unwrap();
        assert!(build_g0(tiny, 0.5).is_err());
    }

    #[test]
    fn axis_velocity_is_inward_and_nearly_linear() {
        let g0 = build_g0(small_grid(), 0.5).unwrap();
        let bs = BiotSavart::new(g0.grid());
        let prof = axis_velocity_profile(&g0, &bs, &[1e-1, 1e-3, 1e-6]);
        for &(r, u2) in &prof {
            assert!(u2 < 0.0, "u2(0,{r}) = {u2}");
        }
        let s3 = prof[1].1 / prof[1].0;
        let s6 = prof[2].1 / prof[2].0;
        assert!((s3 - s6).abs() / s6.abs() <= 0.10, "slopes {s3} vs {s6}");
        // odd symmetry pins the origin
        let u0 = bs.direct_velocity_at(&g0, Vec2::ZERO);
        assert!(u0.norm() <= 1e-12);
    }

    #[test]
    fn axis_profile_is_linear_in_the_field() {
        let g0 = build_g0(small_grid(), 0.5).unwrap();
        let bs = BiotSavart::new(g0.grid());
        let mut doubled = g0.clone();
        for v in doubled.values_mut() {
            *v *= 2.0;
        }
        doubled.set_even_symmetric(true);
        let p1 = axis_velocity_profile(&g0, &bs, &[1e-2, 1e-4]);
        let p2 = axis_velocity_profile(&doubled, &bs, &[1e-2, 1e-4]);
        for (a, b) in p1.iter().zip(&p2) {
            assert_relative_eq!(2.0 * a.1, b.1, max_relative = 1e-12);
        }
    }

    #[test]
    fn default_fit_certifies_a_positive_k() {
        let g0 = build_g0(small_grid(), 0.5).unwrap();
        let bs = BiotSavart::new(g0.grid());
        let radii = logspace(1e-8, 0.25, 24);
        let fit = certify_hyperbolicity(&g0, &bs, &radii, 0.5).unwrap();
        assert!(fit.k > 0.0, "K = {}", fit.k);
        assert!(fit.delta >= 0.1, "delta = {}", fit.delta);
        assert_abs_diff_eq!(fit.residual, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn asymmetric_field_is_rejected() {
        let grid = small_grid();
        let pattern = BlockPattern::standard();
        // a single block breaks the even symmetry
        let single = BlockPattern { blocks: vec![pattern.blocks[0]] };
        let f = ScalarField::from_fn(grid, |p| g0_value(&single, 0.5, p));
        let bs = BiotSavart::new(grid);
        let radii = logspace(1e-6, 0.2, 8);
        assert!(certify_hyperbolicity(&f, &bs, &radii, 0.5).is_err());
    }

    #[test]
    fn sign_violation_yields_construction_error() {
        let profile: Vec<(f64, f64)> = vec![
            (1e-6, -2e-9),
            (1e-4, -2e-7),
            (1e-2, 3e-5), // outward flow
            (1e-1, -2e-4),
        ];
        match fit_hyperbolicity(&profile, 0.5) {
            Err(Error::Construction(msg)) => assert!(msg.contains("epsilon")),
            other => panic!("expected construction error, got {other:?}"),
        }
    }

    #[test]
    fn narrow_coverage_is_rejected() {
        let profile: Vec<(f64, f64)> =
            vec![(0.01, -1e-5), (0.02, -2e-5), (0.04, -4e-5), (0.08, -8e-5)];
        assert!(fit_hyperbolicity(&profile, 0.5).is_err());
    }
}
