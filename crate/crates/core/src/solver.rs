//! Semi-Lagrangian solver for the forced transport equation of the
//! perturbation `g`.
//!
//! Each step backtraces characteristics of `u = u_s(. - phi*) + u_g` with a
//! midpoint rule, interpolates `g` bicubically at the departure point, adds
//! the forcing integrated at the segment midpoint, and recomputes
//! `u_g = grad^perp Delta^{-1} g` spectrally. The singular velocity `u_s` is
//! never discretized; it is evaluated analytically at every backtrace node.
//!
//! In symmetric mode the vortex center is pinned at the origin and the
//! forcing reduces to `-u_g . grad w_s`; in moving-center mode the center
//! follows `d phi*/dt = u_g(phi*, t)` with `u_g(phi*)` evaluated by direct
//! quadrature.

use crate::biot::BiotSavart;
use crate::error::Error;
use crate::field::{Grid2D, ScalarField, VectorField};
use crate::moc::{self, ModulusKind, PairSample, PairSampleConfig};
use crate::par;
use crate::traj::{ProbeSpec, ProbeState, TrajectoryRecord};
use crate::util::{affine_fit, Vec2};
use crate::vortex::RadialVortexProfile;
use crate::Result;
use serde::{Deserialize, Serialize};
use std::path::Path;
use std::sync::{Arc, Mutex};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverMode {
    SemiLagrangian,
    Picard,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Time horizon; all short-time estimates are stated for `T <= 1`.
    pub t_final: f64,
    /// Time step; `None` selects `min(2e-3, 0.5 h / max|u|)` snapped so that
    /// a whole number of steps spans each snapshot interval.
    pub dt: Option<f64>,
    pub snapshot_interval: f64,
    pub mode: SolverMode,
    /// Picard iteration count (only meaningful in Picard mode).
    pub picard_iters: usize,
    /// Pin the center at the origin (requires even-symmetric initial data).
    pub symmetric: bool,
    /// Disable the singular vortex (pure-advection control runs).
    pub include_vortex: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            t_final: 0.5,
            dt: None,
            snapshot_interval: 0.01,
            mode: SolverMode::SemiLagrangian,
            picard_iters: 5,
            symmetric: true,
            include_vortex: true,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.t_final > 0.0 && self.t_final <= 1.0) {
            return Err(Error::invalid(format!(
                "horizon {} must lie in (0, 1]",
                self.t_final
            )));
        }
        if let Some(dt) = self.dt {
            if !(dt > 0.0 && dt <= self.snapshot_interval) {
                return Err(Error::invalid("dt must lie in (0, snapshot_interval]"));
            }
        }
        if !(self.snapshot_interval > 0.0 && self.snapshot_interval <= self.t_final) {
            return Err(Error::invalid("snapshot interval must lie in (0, T]"));
        }
        if self.mode == SolverMode::Picard && self.picard_iters < 2 {
            return Err(Error::invalid("Picard mode needs at least 2 iterations"));
        }
        Ok(())
    }
}

/// Instantaneous solver state.
#[derive(Debug, Clone)]
pub struct SolverState {
    pub t: f64,
    pub g: ScalarField,
    pub u_g: VectorField,
    pub center: Vec2,
}

/// Per-step scalar diagnostics.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct StepDiagnostics {
    pub t: f64,
    pub sup_g: f64,
    pub sup_forcing: f64,
    pub even_defect: f64,
    pub odd_defect: f64,
    /// `|u(0, t)|` (symmetric runs should keep this at rounding level).
    pub center_speed: f64,
    pub cfl: f64,
}

/// Forcing term of the transport equation at a point.
///
/// Symmetric mode: `-u_g(x) . grad w_s(x)`. Moving-center mode:
/// `-(u_g(x) - u_g(phi*)) . grad w_s(x - phi*)`. Exactly zero outside the
/// profile support and (by the vanishing-velocity cancellation) at the
/// center itself.
pub fn forcing(profile: &RadialVortexProfile, state: &SolverState, x: Vec2) -> f64 {
    let ug_x = state.u_g.sample_clamped(x);
    let ug_c = if state.center == Vec2::ZERO {
        Vec2::ZERO
    } else {
        state.u_g.sample_clamped(state.center)
    };
    forcing_at(profile, ug_x, ug_c, x - state.center)
}

#[inline]
fn forcing_at(profile: &RadialVortexProfile, ug_x: Vec2, ug_center: Vec2, rel: Vec2) -> f64 {
    let rho = rel.norm();
    if rho == 0.0 || rho > crate::vortex::OUTER_CUTOFF {
        return 0.0;
    }
    let grad = rel.scale(profile.ws_prime(rho) / rho);
    -(ug_x - ug_center).dot(grad)
}

/// A completed run: configuration, snapshot stack, diagnostics, probes.
pub struct SolverRun {
    pub config: SolverConfig,
    pub grid: Grid2D,
    pub dt: f64,
    pub times: Vec<f64>,
    snapshots: Vec<ScalarField>,
    centers: Vec<Vec2>,
    pub diagnostics: Vec<StepDiagnostics>,
    pub probes: Vec<TrajectoryRecord>,
    pub profile: Arc<RadialVortexProfile>,
    pub bs: Arc<BiotSavart>,
    ug_cache: Mutex<Vec<(usize, Arc<VectorField>)>>,
}

impl SolverRun {
    pub fn snapshot_count(&self) -> usize {
        self.snapshots.len()
    }

    pub fn snapshot(&self, k: usize) -> &ScalarField {
        &self.snapshots[k]
    }

    pub fn center_at(&self, k: usize) -> Vec2 {
        self.centers[k]
    }

    pub fn final_g(&self) -> &ScalarField {
        self.snapshots.last().expect("run holds at least the initial snapshot")
    }

    /// Velocity field of snapshot `k`, recomputed on demand and LRU-cached.
    pub fn ug(&self, k: usize) -> Arc<VectorField> {
        let mut cache = self.ug_cache.lock().unwrap();
        if let Some(pos) = cache.iter().position(|(i, _)| *i == k) {
            let entry = cache.remove(pos);
            let arc = entry.1.clone();
            cache.push((k, entry.1));
            return arc;
        }
        let ug = Arc::new(
            self.bs
                .solve_fft(&self.snapshots[k])
                .expect("snapshot support stays inside the margin"),
        );
        if cache.len() >= 6 {
            cache.remove(0);
        }
        cache.push((k, ug.clone()));
        ug
    }

    /// Index of the snapshot at or just before `t`.
    pub fn snapshot_index(&self, t: f64) -> usize {
        let k = ((t / self.config.snapshot_interval).floor() as usize).min(self.times.len() - 1);
        k
    }

    /// Write manifest and snapshots to a directory.
    pub fn write_to_dir(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir.join("snapshots"))?;
        let mut index = Vec::new();
        for (k, snap) in self.snapshots.iter().enumerate() {
            let name = format!("snapshots/snap_{k:05}.bin");
            snap.write_binary(&dir.join(&name))?;
            index.push(SnapshotEntry { time: self.times[k], file: name, center: self.centers[k] });
        }
        let manifest = RunManifest {
            config: self.config.clone(),
            grid_n: self.grid.n(),
            grid_half_width: self.grid.half_width(),
            dt: self.dt,
            snapshots: index,
        };
        std::fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
        Ok(())
    }

    /// Reload a run written by [`write_to_dir`](Self::write_to_dir).
    pub fn load_from_dir(dir: &Path, profile: Arc<RadialVortexProfile>) -> Result<SolverRun> {
        let manifest: RunManifest =
            serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json"))?)?;
        let grid = Grid2D::new(manifest.grid_n, manifest.grid_half_width)?;
        let bs = Arc::new(BiotSavart::new(grid));
        let mut snapshots = Vec::new();
        let mut times = Vec::new();
        let mut centers = Vec::new();
        for e in &manifest.snapshots {
            snapshots.push(ScalarField::read_binary(&dir.join(&e.file))?);
            times.push(e.time);
            centers.push(e.center);
        }
        if snapshots.is_empty() {
            return Err(Error::invalid("run directory holds no snapshots"));
        }
        Ok(SolverRun {
            config: manifest.config,
            grid,
            dt: manifest.dt,
            times,
            snapshots,
            centers,
            diagnostics: Vec::new(),
            probes: Vec::new(),
            profile,
            bs,
            ug_cache: Mutex::new(Vec::new()),
        })
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct SnapshotEntry {
    time: f64,
    file: String,
    center: Vec2,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub config: SolverConfig,
    pub grid_n: usize,
    pub grid_half_width: f64,
    pub dt: f64,
    snapshots: Vec<SnapshotEntry>,
}

/// The stepping engine.
pub struct TransportSolver {
    pub profile: Arc<RadialVortexProfile>,
    pub bs: Arc<BiotSavart>,
    pub config: SolverConfig,
    pub state: SolverState,
    pub dt: f64,
    us_max: f64,
    probes: Vec<ProbeState>,
    diagnostics: Vec<StepDiagnostics>,
    snapshots: Vec<ScalarField>,
    times: Vec<f64>,
    centers: Vec<Vec2>,
    steps_per_snapshot: usize,
    step_index: usize,
}

impl TransportSolver {
    pub fn new(
        profile: Arc<RadialVortexProfile>,
        bs: Arc<BiotSavart>,
        g0: ScalarField,
        config: SolverConfig,
        probes: Vec<ProbeSpec>,
    ) -> Result<Self> {
        config.validate()?;
        if config.symmetric && !g0.is_even_symmetric() {
            return Err(Error::invalid(
                "symmetric mode requires even-symmetric initial data (symmetrize first)",
            ));
        }
        if !probes.is_empty() && !config.symmetric {
            return Err(Error::invalid("online probes assume the symmetric (fixed-center) mode"));
        }
        let grid = g0.grid();
        let u_g = bs.solve_fft(&g0)?;
        let us_max = if config.include_vortex {
            crate::util::logspace(1e-6, grid.half_width() * 1.5, 400)
                .iter()
                .map(|&r| profile.g_value(r))
                .fold(0.0, f64::max)
        } else {
            0.0
        };
        let h = grid.spacing();
        let umax = us_max + u_g.max_norm();
        let dt_raw = config.dt.unwrap_or_else(|| (2e-3f64).min(0.5 * h / umax.max(1e-12)));
        let steps_per_snapshot = (config.snapshot_interval / dt_raw).ceil().max(1.0) as usize;
        let dt = config.snapshot_interval / steps_per_snapshot as f64;

        let probe_states = probes
            .iter()
            .map(|spec| ProbeState::new(spec.clone(), &bs, &g0, &u_g))
            .collect::<Result<Vec<_>>>()?;

        let state = SolverState { t: 0.0, g: g0, u_g, center: Vec2::ZERO };
        let mut solver = TransportSolver {
            profile,
            bs,
            config,
            state,
            dt,
            us_max,
            probes: probe_states,
            diagnostics: Vec::new(),
            snapshots: Vec::new(),
            times: Vec::new(),
            centers: Vec::new(),
            steps_per_snapshot,
            step_index: 0,
        };
        solver.push_snapshot();
        Ok(solver)
    }

    fn push_snapshot(&mut self) {
        self.snapshots.push(self.state.g.clone());
        self.times.push(self.state.t);
        self.centers.push(self.state.center);
    }

    /// One semi-Lagrangian step of size `dt`.
    pub fn step(&mut self) -> Result<()> {
        let grid = self.state.g.grid();
        let n = grid.n();
        let h = grid.spacing();
        let dt = self.dt;

        let umax = self.us_max + self.state.u_g.max_norm();
        let cfl = dt * umax / h;
        if cfl > 2.0 {
            return Err(Error::invalid(format!("CFL-type bound violated: {cfl:.3}")));
        }

        // moving-center mode: advance the center by the midpoint rule with
        // direct-quadrature center velocities
        let mut new_center = self.state.center;
        let (ug_center, forcing_center) = if self.config.symmetric {
            (Vec2::ZERO, Vec2::ZERO)
        } else {
            let c = self.state.center;
            let ugc = self.bs.direct_velocity_at(&self.state.g, c);
            let c_mid = c + ugc.scale(0.5 * dt);
            let ugc_mid = self.bs.direct_velocity_at(&self.state.g, c_mid);
            new_center = c + ugc_mid.scale(dt);
            (ugc, ugc)
        };
        let _ = forcing_center;

        // advance online probes against the pre-step fields
        if !self.probes.is_empty() {
            let model = crate::traj::NearOriginVelocity::build(&self.bs, &self.state.g, 1.0);
            let profile = self.profile.clone();
            let include_vortex = self.config.include_vortex;
            let t = self.state.t;
            for probe in &mut self.probes {
                probe.advance(t, dt, &model, &profile, include_vortex)?;
            }
        }

        let center = self.state.center;
        let include_vortex = self.config.include_vortex;
        let profile = self.profile.clone();
        let g_old = &self.state.g;
        let u_g = &self.state.u_g;
        let vel = |x: Vec2| -> Vec2 {
            let mut v = u_g.sample_clamped(x);
            if include_vortex {
                v = v + profile.us_velocity(x - center);
            }
            v
        };

        let rows: Vec<(Vec<f64>, f64, bool)> = par::map_indexed(n, |iy| {
            let y = grid.coord(iy);
            let mut row = vec![0.0; n];
            let mut fmax: f64 = 0.0;
            let mut exited = false;
            for (ix, out) in row.iter_mut().enumerate() {
                let x = Vec2::new(grid.coord(ix), y);
                let k1 = vel(x);
                let xm = x - k1.scale(0.5 * dt);
                let k2 = vel(xm);
                let xd = x - k2.scale(dt);
                if xd.x.abs() > grid.half_width() || xd.y.abs() > grid.half_width() {
                    exited = true;
                    continue;
                }
                let advected = g_old.sample_clamped(xd);
                let f = if include_vortex {
                    let xmid = (x + xd).scale(0.5);
                    forcing_at(&profile, u_g.sample_clamped(xmid), ug_center, xmid - center)
                } else {
                    0.0
                };
                fmax = fmax.max(f.abs());
                *out = advected + dt * f;
            }
            (row, fmax, exited)
        });

        let mut sup_forcing: f64 = 0.0;
        for (iy, (row, fmax, exited)) in rows.iter().enumerate() {
            if *exited {
                return Err(Error::out_of_domain(format!(
                    "backtrace left the grid near row {iy} at t = {:.4}",
                    self.state.t
                )));
            }
            sup_forcing = sup_forcing.max(*fmax);
            let dst = &mut self.state.g.values_mut()[iy * n..(iy + 1) * n];
            dst.copy_from_slice(row);
        }

        self.state.center = new_center;
        self.state.u_g = self.bs.solve_fft(&self.state.g)?;
        self.state.t += dt;
        self.step_index += 1;

        let even_defect = if self.config.symmetric { self.state.g.even_defect() } else { f64::NAN };
        let odd_defect = if self.config.symmetric { self.state.u_g.odd_defect() } else { f64::NAN };
        let center_speed = if self.config.symmetric {
            self.state.u_g.sample_clamped(Vec2::ZERO).norm()
        } else {
            self.bs.direct_velocity_at(&self.state.g, self.state.center).norm()
        };
        self.diagnostics.push(StepDiagnostics {
            t: self.state.t,
            sup_g: self.state.g.max_abs(),
            sup_forcing,
            even_defect,
            odd_defect,
            center_speed,
            cfl,
        });

        if self.step_index % self.steps_per_snapshot == 0 {
            self.push_snapshot();
        }
        Ok(())
    }

    /// Run up to the configured horizon and finish into a [`SolverRun`].
    pub fn run_to_completion(mut self) -> Result<SolverRun> {
        let total = (self.config.t_final / self.dt).round() as usize;
        for _ in 0..total {
            self.step()?;
        }
        Ok(SolverRun {
            config: self.config,
            grid: self.state.g.grid(),
            dt: self.dt,
            times: self.times,
            snapshots: self.snapshots,
            centers: self.centers,
            diagnostics: self.diagnostics,
            probes: self.probes.into_iter().map(|p| p.finish()).collect(),
            profile: self.profile,
            bs: self.bs,
            ug_cache: Mutex::new(Vec::new()),
        })
    }
}

/// Convenience wrapper: build and run in one call.
pub fn run_transport(
    profile: Arc<RadialVortexProfile>,
    bs: Arc<BiotSavart>,
    g0: ScalarField,
    config: SolverConfig,
    probes: Vec<ProbeSpec>,
) -> Result<SolverRun> {
    TransportSolver::new(profile, bs, g0, config, probes)?.run_to_completion()
}

// ---------------------------------------------------------------------------
// Consistency check: the C^{phi_alpha} norm series against an affine envelope
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConsistencyReport {
    pub alpha: f64,
    pub times: Vec<f64>,
    pub norms: Vec<f64>,
    pub seminorms: Vec<f64>,
    pub supnorms: Vec<f64>,
    /// Affine fit `a + b t` of the series.
    pub fit: (f64, f64),
    pub max_ratio: f64,
    pub monotone_ok: bool,
    pub pass: bool,
    pub pair_count: usize,
    pub min_separation: f64,
}

/// Estimate the norm series over the run's snapshots and fit the envelope.
pub fn consistency_check(run: &SolverRun, alpha: f64, seed: u64) -> Result<ConsistencyReport> {
    let kind = ModulusKind::PhiAlpha { alpha };
    kind.validate()?;
    let cfg = PairSampleConfig {
        min_separation: 1e-8,
        max_separation: moc::DOMAIN_CAP,
        min_origin_distance: 1e-6,
        max_origin_distance: run.grid.half_width() * 0.85,
        pairs_per_bin: 25,
        seed,
    };
    let pairs = PairSample::generate(&cfg)?;
    let mut norms = Vec::new();
    let mut seminorms = Vec::new();
    let mut supnorms = Vec::new();
    for k in 0..run.snapshot_count() {
        let snap = run.snapshot(k);
        let sem = moc::moc_seminorm(|p| snap.sample_clamped(p), &pairs, kind)?;
        let sup = moc::sup_norm(|p| snap.sample_clamped(p), &pairs);
        seminorms.push(sem);
        supnorms.push(sup);
        norms.push(sem + sup);
    }
    let mut report = consistency_from_series(alpha, run.times.clone(), norms);
    report.seminorms = seminorms;
    report.supnorms = supnorms;
    report.pair_count = pairs.len();
    report.min_separation = pairs.min_separation();
    Ok(report)
}

/// Envelope verdict from a raw series (exposed for checker sanity tests).
pub fn consistency_from_series(alpha: f64, times: Vec<f64>, norms: Vec<f64>) -> ConsistencyReport {
    let scale = norms.iter().cloned().fold(0.0f64, f64::max);
    if scale == 0.0 {
        // identically zero series satisfies any envelope
        return ConsistencyReport {
            alpha,
            times,
            norms,
            seminorms: Vec::new(),
            supnorms: Vec::new(),
            fit: (0.0, 0.0),
            max_ratio: 0.0,
            monotone_ok: true,
            pass: true,
            pair_count: 0,
            min_separation: 0.0,
        };
    }
    let (a, b) = affine_fit(&times, &norms);
    let span = times.last().copied().unwrap_or(1.0).max(1e-12);
    let monotone_ok = b >= -1e-6 * scale / span;
    let mut max_ratio: f64 = 0.0;
    for (&t, &v) in times.iter().zip(&norms) {
        let env = a + b * t;
        if env > 0.0 {
            max_ratio = max_ratio.max(v / env);
        } else if v > 1e-12 * scale {
            max_ratio = f64::INFINITY;
        }
    }
    ConsistencyReport {
        alpha,
        times,
        norms,
        seminorms: Vec::new(),
        supnorms: Vec::new(),
        fit: (a, b),
        max_ratio,
        monotone_ok,
        pass: monotone_ok && max_ratio <= 1.05,
        pair_count: 0,
        min_separation: 0.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn profile() -> Arc<RadialVortexProfile> {
        Arc::new(RadialVortexProfile::new())
    }

    fn bump_field(grid: Grid2D, c: Vec2, width: f64) -> ScalarField {
        ScalarField::from_fn(grid, |p| {
            let d = (p - c).norm_sq() / (width * width);
            if d >= 1.0 {
                0.0
            } else {
                (-1.0 / (1.0 - d)).exp()
            }
        })
    }

    #[test]
    fn config_validation() {
        let mut c = SolverConfig::default();
        c.t_final = 1.5;
        assert!(c.validate().is_err());
        c.t_final = 0.5;
        c.dt = Some(0.02);
        assert!(c.validate().is_err());
        c.dt = Some(1e-3);
        assert!(c.validate().is_ok());
        c.mode = SolverMode::Picard;
        c.picard_iters = 1;
        assert!(c.validate().is_err());
    }

    #[test]
    fn zero_initial_data_stays_zero() {
        let grid = Grid2D::new(64, 4.0).unwrap();
        let bs = Arc::new(BiotSavart::new(grid));
        let mut g0 = ScalarField::zeros(grid);
        g0.symmetrize_even();
        let config = SolverConfig {
            t_final: 0.05,
            snapshot_interval: 0.025,
            dt: Some(0.005),
            ..Default::default()
        };
        let run = run_transport(profile(), bs, g0, config, Vec::new()).unwrap();
        assert_eq!(run.final_g().max_abs(), 0.0);
        for d in &run.diagnostics {
            assert_eq!(d.sup_g, 0.0);
            assert_eq!(d.sup_forcing, 0.0);
        }
    }

    #[test]
    fn pure_advection_conserves_sup_norm() {
        // vortex disabled: transport of a bump by its own induced velocity
        let grid = Grid2D::new(256, 4.0).unwrap();
        let bs = Arc::new(BiotSavart::new(grid));
        let g0 = bump_field(grid, Vec2::new(0.8, 0.0), 0.6);
        let sup0 = g0.max_abs();
        let config = SolverConfig {
            t_final: 0.5,
            snapshot_interval: 0.1,
            dt: Some(0.01),
            include_vortex: false,
            symmetric: false,
            ..Default::default()
        };
        let run = run_transport(profile(), bs, g0, config, Vec::new()).unwrap();
        let sup1 = run.final_g().max_abs();
        assert!((sup1 - sup0).abs() / sup0 <= 0.01, "sup {sup0} -> {sup1}");
    }

    #[test]
    fn symmetric_mode_requires_even_flag() {
        let grid = Grid2D::new(64, 4.0).unwrap();
        let bs = Arc::new(BiotSavart::new(grid));
        let g0 = bump_field(grid, Vec2::new(0.8, 0.0), 0.5);
        let err = TransportSolver::new(
            profile(),
            bs,
            g0,
            SolverConfig::default(),
            Vec::new(),
        );
        assert!(err.is_err());
    }

    #[test]
    fn forcing_vanishes_outside_the_support_exactly() {
        let grid = Grid2D::new(128, 4.0).unwrap();
        let bs = Arc::new(BiotSavart::new(grid));
        let mut g0 = bump_field(grid, Vec2::new(1.5, 0.0), 0.4);
        g0.symmetrize_even();
        let u_g = bs.solve_fft(&g0).unwrap();
        let state = SolverState { t: 0.0, g: g0, u_g, center: Vec2::ZERO };
        let p = profile();
        for &x in &[
            Vec2::new(0.5, 0.0),
            Vec2::new(1.0, 1.0),
            Vec2::new(-2.0, 0.3),
            Vec2::new(0.4, -0.4),
        ] {
            assert_eq!(forcing(&p, &state, x), 0.0, "forcing at {x:?}");
        }
        // ... and is finite and generally nonzero inside
        let inside = forcing(&p, &state, Vec2::new(0.05, 0.08));
        assert!(inside.is_finite());
    }

    #[test]
    fn symmetric_run_preserves_parity() {
        let grid = Grid2D::new(128, 4.0).unwrap();
        let bs = Arc::new(BiotSavart::new(grid));
        // even pair of bumps
        let mut g0 = ScalarField::from_fn(grid, |p| {
            let b = |c: Vec2| {
                let d = (p - c).norm_sq() / 0.16;
                if d >= 1.0 {
                    0.0
                } else {
                    (-1.0 / (1.0 - d)).exp()
                }
            };
            b(Vec2::new(1.2, 0.9)) + b(Vec2::new(-1.2, -0.9))
        });
        g0.symmetrize_even();
        let config = SolverConfig {
            t_final: 0.1,
            snapshot_interval: 0.05,
            dt: Some(2e-3),
            ..Default::default()
        };
        let run = run_transport(profile(), bs, g0, config, Vec::new()).unwrap();
        let scale = run.final_g().max_abs();
        for d in &run.diagnostics {
            assert!(d.even_defect <= 1e-10 * scale, "even defect {}", d.even_defect);
            assert!(d.center_speed <= 1e-12, "center speed {}", d.center_speed);
        }
    }

    #[test]
    fn consistency_checker_flags_reversed_series() {
        let times: Vec<f64> = (0..20).map(|i| i as f64 * 0.01).collect();
        let series: Vec<f64> = times.iter().map(|t| 1.0 + 2.0 * t).collect();
        let ok = consistency_from_series(0.5, times.clone(), series.clone());
        assert!(ok.pass && ok.monotone_ok);
        assert!(ok.max_ratio <= 1.0 + 1e-9);

        let mut reversed = series;
        reversed.reverse();
        let bad = consistency_from_series(0.5, times, reversed);
        assert!(!bad.monotone_ok && !bad.pass);
    }

    #[test]
    fn consistency_zero_series_passes() {
        let times: Vec<f64> = (0..5).map(|i| i as f64 * 0.01).collect();
        let report = consistency_from_series(0.5, times, vec![0.0; 5]);
        assert!(report.pass);
        assert_eq!(report.max_ratio, 0.0);
    }

    #[test]
    fn run_round_trips_through_directory() {
        let grid = Grid2D::new(64, 4.0).unwrap();
        let bs = Arc::new(BiotSavart::new(grid));
        let mut g0 = bump_field(grid, Vec2::new(1.0, 0.0), 0.4);
        g0.symmetrize_even();
        let config = SolverConfig {
            t_final: 0.04,
            snapshot_interval: 0.02,
            dt: Some(0.004),
            ..Default::default()
        };
        let run = run_transport(profile(), bs, g0, config, Vec::new()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        run.write_to_dir(dir.path()).unwrap();
        let loaded = SolverRun::load_from_dir(dir.path(), profile()).unwrap();
        assert_eq!(loaded.snapshot_count(), run.snapshot_count());
        assert_eq!(loaded.times, run.times);
        assert_eq!(
            loaded.final_g().values(),
            run.final_g().values(),
            "snapshot values must round-trip bit-exactly"
        );
        // velocity recomputation agrees
        let u0 = run.ug(1);
        let u1 = loaded.ug(1);
        assert_relative_eq!(
            u0.at(30, 30).x,
            u1.at(30, 30).x,
            max_relative = 1e-12
        );
    }
}
