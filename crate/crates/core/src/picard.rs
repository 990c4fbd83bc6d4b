//! Picard iteration for the forced transport equation.
//!
//! Each iterate solves the *linear* transport problem
//! `g^{(n+1)}_t + u . grad g^{(n+1)} = -u_{g^{(n)}} . grad w_s` with the
//! velocity `u` frozen from a reference semi-Lagrangian run and the forcing
//! taken from the previous iterate, starting from `g^{(0)} = g_0` held
//! constant in time. Gaps `||g^{(n+1)} - g^{(n)}||_inf` are measured across
//! the snapshot times; on a short enough horizon they contract geometrically.

use crate::error::Error;
use crate::field::{ScalarField, VectorField};
use crate::par;
use crate::solver::SolverRun;
use crate::util::Vec2;
use crate::Result;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PicardOutcome {
    /// `d_n = max_k sup |g^{(n+1)}(t_k) - g^{(n)}(t_k)|` for each iteration.
    pub gaps: Vec<f64>,
    /// Worst consecutive gap ratio (`NaN` with fewer than two gaps).
    pub worst_ratio: f64,
    /// Set when the gaps fail to decrease; iterates are still returned.
    pub contraction_warning: bool,
    /// Sup distance between the last iterate and the reference solution at
    /// the final time.
    pub limit_vs_reference: f64,
}

/// Gap ratios contract when every consecutive ratio is at most `factor`.
pub fn contraction_ok(gaps: &[f64], factor: f64) -> bool {
    gaps.windows(2).all(|w| w[1] <= factor * w[0] || w[1] <= 1e-14)
}

struct FrozenVelocity {
    lo: Arc<VectorField>,
    hi: Arc<VectorField>,
}

impl FrozenVelocity {
    /// Linear interpolation between the bracketing snapshot fields.
    #[inline]
    fn sample(&self, p: Vec2, tau: f64) -> Vec2 {
        let a = self.lo.sample_clamped(p);
        let b = self.hi.sample_clamped(p);
        a + (b - a).scale(tau)
    }
}

/// Run `iters` Picard iterations against a completed reference run.
///
/// Returns all iterate gaps plus the final-time fields of every iterate.
pub fn picard_solve(run: &SolverRun, iters: usize) -> Result<(PicardOutcome, Vec<ScalarField>)> {
    if iters < 2 {
        return Err(Error::invalid("Picard needs at least 2 iterations"));
    }
    if !run.config.symmetric {
        return Err(Error::invalid("Picard mode is implemented for the symmetric case"));
    }
    let g0 = run.snapshot(0).clone();
    let snapshots = run.snapshot_count();
    if snapshots < 2 {
        return Err(Error::invalid("reference run holds a single snapshot"));
    }

    // previous iterate as a snapshot stack; g^{(0)} is constant in time
    let mut prev: Vec<ScalarField> = (0..snapshots).map(|_| g0.clone()).collect();
    let mut gaps = Vec::new();
    let mut final_fields = Vec::new();
    let mut last_final = g0.clone();

    for _n in 0..iters {
        let (next, gap) = linear_transport_sweep(run, &g0, &prev)?;
        gaps.push(gap);
        last_final = next.last().expect("sweep returns every snapshot").clone();
        final_fields.push(last_final.clone());
        prev = next;
    }

    let reference = run.final_g();
    let limit_vs_reference = {
        let a = last_final.values();
        let b = reference.values();
        par::max_indexed(a.len(), |i| (a[i] - b[i]).abs())
    };
    let worst_ratio = gaps
        .windows(2)
        .map(|w| if w[0] > 0.0 { w[1] / w[0] } else { 0.0 })
        .fold(f64::NAN, f64::max);
    let outcome = PicardOutcome {
        contraction_warning: !contraction_ok(&gaps, 0.999),
        gaps,
        worst_ratio,
        limit_vs_reference,
    };
    Ok((outcome, final_fields))
}

/// One linear transport solve over the whole horizon; returns the iterate's
/// snapshot stack and its sup gap against the previous iterate.
fn linear_transport_sweep(
    run: &SolverRun,
    g0: &ScalarField,
    prev: &[ScalarField],
) -> Result<(Vec<ScalarField>, f64)> {
    let grid = run.grid;
    let n = grid.n();
    let dt = run.dt;
    let s = run.config.snapshot_interval;
    let steps_per_snap = (s / dt).round() as usize;
    let profile = run.profile.clone();
    let include_vortex = run.config.include_vortex;

    let mut g = g0.clone();
    let mut out = vec![g0.clone()];
    let mut gap: f64 = field_gap(&g, &prev[0]);

    // sliding window of previous-iterate velocities for the forcing
    let mut prev_ug_lo = Arc::new(run.bs.solve_fft(&prev[0])?);
    for k in 0..(prev.len() - 1) {
        let prev_ug_hi = Arc::new(run.bs.solve_fft(&prev[k + 1])?);
        let forcing_vel = FrozenVelocity { lo: prev_ug_lo.clone(), hi: prev_ug_hi.clone() };
        let ref_vel = FrozenVelocity { lo: run.ug(k), hi: run.ug(k + 1) };

        for sub in 0..steps_per_snap {
            let tau0 = sub as f64 / steps_per_snap as f64;
            let tau_mid = (sub as f64 + 0.5) / steps_per_snap as f64;
            let g_old = &g;
            let rows: Vec<Vec<f64>> = par::map_indexed(n, |iy| {
                let y = grid.coord(iy);
                let mut row = vec![0.0; n];
                for (ix, outv) in row.iter_mut().enumerate() {
                    let x = Vec2::new(grid.coord(ix), y);
                    let vel = |p: Vec2, tau: f64| -> Vec2 {
                        let mut v = ref_vel.sample(p, tau);
                        if include_vortex {
                            v = v + profile.us_velocity(p);
                        }
                        v
                    };
                    let k1 = vel(x, tau0);
                    let xm = x - k1.scale(0.5 * dt);
                    let k2 = vel(xm, tau_mid);
                    let xd = x - k2.scale(dt);
                    let advected = g_old.sample_clamped(xd);
                    let f = if include_vortex {
                        let xmid = (x + xd).scale(0.5);
                        let rho = xmid.norm();
                        if rho > 0.0 && rho < crate::vortex::OUTER_CUTOFF {
                            let grad = xmid.scale(profile.ws_prime(rho) / rho);
                            -forcing_vel.sample(xmid, tau_mid).dot(grad)
                        } else {
                            0.0
                        }
                    } else {
                        0.0
                    };
                    *outv = advected + dt * f;
                }
                row
            });
            for (iy, row) in rows.iter().enumerate() {
                g.values_mut()[iy * n..(iy + 1) * n].copy_from_slice(row);
            }
        }
        out.push(g.clone());
        gap = gap.max(field_gap(&g, &prev[k + 1]));
        prev_ug_lo = prev_ug_hi;
    }
    Ok((out, gap))
}

fn field_gap(a: &ScalarField, b: &ScalarField) -> f64 {
    let av = a.values();
    let bv = b.values();
    par::max_indexed(av.len(), |i| (av[i] - bv[i]).abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::biot::BiotSavart;
    use crate::field::Grid2D;
    use crate::solver::{run_transport, SolverConfig};
    use crate::vortex::RadialVortexProfile;

    fn reference_run(n: usize, t_final: f64, with_data: bool) -> SolverRun {
        let grid = Grid2D::new(n, 48.0).unwrap();
        let bs = Arc::new(BiotSavart::new(grid));
        let g0 = if with_data {
            crate::initial::build_g0(grid, 0.5).unwrap()
        } else {
            let mut z = ScalarField::zeros(grid);
            z.symmetrize_even();
            z
        };
        let config = SolverConfig {
            t_final,
            snapshot_interval: 0.02,
            dt: Some(4e-3),
            ..Default::default()
        };
        run_transport(Arc::new(RadialVortexProfile::new()), bs, g0, config, Vec::new()).unwrap()
    }

    #[test]
    fn zero_data_stays_zero_through_iterations() {
        let run = reference_run(64, 0.04, false);
        let (outcome, finals) = picard_solve(&run, 2).unwrap();
        for f in &finals {
            assert_eq!(f.max_abs(), 0.0);
        }
        assert!(outcome.gaps.iter().all(|&d| d == 0.0));
        assert_eq!(outcome.limit_vs_reference, 0.0);
    }

    #[test]
    fn iteration_count_is_validated() {
        let run = reference_run(64, 0.04, false);
        assert!(picard_solve(&run, 1).is_err());
    }

    #[test]
    fn gaps_contract_and_limit_tracks_reference_on_a_short_horizon() {
        let run = reference_run(128, 0.1, true);
        let (outcome, _) = picard_solve(&run, 4).unwrap();
        assert!(
            contraction_ok(&outcome.gaps, 0.9),
            "gaps do not contract: {:?}",
            outcome.gaps
        );
        // cross-method agreement at the shared discretization scale
        let scale = run.snapshot(0).max_abs();
        assert!(
            outcome.limit_vs_reference <= 2e-2 * scale,
            "limit error {} vs scale {scale}",
            outcome.limit_vs_reference
        );
    }

    #[test]
    fn contraction_helper() {
        assert!(contraction_ok(&[1.0, 0.5, 0.2], 0.9));
        assert!(!contraction_ok(&[1.0, 0.95, 0.2], 0.9));
        assert!(contraction_ok(&[0.0, 0.0], 0.9));
    }
}
