//! Trajectory probes and the conservation/breakdown statistics.
//!
//! Probe points start at `(0, r)` with `r` far below the grid spacing, so the
//! perturbation velocity along a trajectory can never come from grid
//! interpolation. Near the origin `u_g` is evaluated by direct quadrature of
//! the vorticity, organized as an exact paired sum over the cells within a
//! fixed radius plus a first-order Taylor model (value and gradient at the
//! origin) of the far-cell contribution; the far field is smooth at scale
//! `>= 1` there, so the model error is quadratically small in `|x|`.
//!
//! Probes may run *online* (advanced inside the solver loop against the
//! current fields — the default for breakdown radii, where the solver step
//! already satisfies the `t_r/200` refinement rule) or *offline* against a
//! stored snapshot stack with cubic time interpolation.

use crate::biot::BiotSavart;
use crate::error::Error;
use crate::field::ScalarField;
use crate::par;
use crate::solver::SolverRun;
use crate::util::{simpson_uniform, Mat2, Vec2};
use crate::vortex::RadialVortexProfile;
use crate::Result;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::sync::Arc;

/// Radius separating the exact near-cell sum from the far-field Taylor model.
const NEAR_RADIUS: f64 = 1.0;
/// Largest probe radius the near-origin evaluator accepts.
const MODEL_VALIDITY: f64 = 0.05;
/// Probes below this radius abort as collapsed.
const COLLAPSE_RADIUS: f64 = 1e-14;
/// Fit window for the Key-Lemma ratio.
const KEY_LEMMA_WINDOW: f64 = 1e-2;

// ---------------------------------------------------------------------------
// Near-origin velocity evaluator
// ---------------------------------------------------------------------------

/// Direct-quadrature evaluator of `u_g` specialized to `|x| <= 0.05`.
pub struct NearOriginVelocity {
    /// Paired near cells: (node in the lower half-plane, mean pair value).
    near: Vec<(Vec2, f64)>,
    /// Far-field velocity at the origin (paired; rounding level).
    far_value: Vec2,
    /// Far-field velocity gradient at the origin.
    far_gradient: Mat2,
    area: f64,
    kernel: KernelHandle,
}

/// Cheap copyable handle onto the grid kernel.
#[derive(Clone, Copy)]
struct KernelHandle {
    h: f64,
    g_self: f64,
}

impl KernelHandle {
    #[inline]
    fn green(&self, d: Vec2) -> f64 {
        let nsq = d.norm_sq();
        if nsq < (1e-9 * self.h) * (1e-9 * self.h) {
            self.g_self
        } else {
            0.5 * nsq.ln() / (2.0 * std::f64::consts::PI)
        }
    }

    #[inline]
    fn kernel(&self, d: Vec2) -> Vec2 {
        let h = self.h;
        let c = 1.0 / (12.0 * h);
        let gy = -self.green(Vec2::new(d.x, d.y + 2.0 * h))
            + 8.0 * self.green(Vec2::new(d.x, d.y + h))
            - 8.0 * self.green(Vec2::new(d.x, d.y - h))
            + self.green(Vec2::new(d.x, d.y - 2.0 * h));
        let gx = -self.green(Vec2::new(d.x + 2.0 * h, d.y))
            + 8.0 * self.green(Vec2::new(d.x + h, d.y))
            - 8.0 * self.green(Vec2::new(d.x - h, d.y))
            + self.green(Vec2::new(d.x - 2.0 * h, d.y));
        Vec2::new(-c * gy, c * gx)
    }

    #[inline]
    fn kernel_gradient(&self, d: Vec2) -> Mat2 {
        let h = self.h;
        let c = 1.0 / (12.0 * h);
        let dg = |z: Vec2| -> Vec2 {
            let nsq = z.norm_sq();
            if nsq < 1e-30 {
                Vec2::ZERO
            } else {
                z.scale(1.0 / (2.0 * std::f64::consts::PI * nsq))
            }
        };
        let mut row1 = Vec2::ZERO;
        let mut row2 = Vec2::ZERO;
        for (k, w) in [(2.0, -1.0), (1.0, 8.0), (-1.0, -8.0), (-2.0, 1.0)] {
            row1 = row1 + dg(Vec2::new(d.x, d.y + k * h)).scale(-c * w);
            row2 = row2 + dg(Vec2::new(d.x + k * h, d.y)).scale(c * w);
        }
        Mat2::new(row1.x, row1.y, row2.x, row2.y)
    }
}

impl NearOriginVelocity {
    /// Build from the current vorticity; requires an even-symmetric field.
    pub fn build(bs: &BiotSavart, g: &ScalarField, near_radius: f64) -> Self {
        debug_assert!(g.is_even_symmetric(), "near-origin evaluator needs an even field");
        let grid = g.grid();
        let n = grid.n();
        let h = grid.spacing();
        let area = h * h;
        let kernel = KernelHandle { h, g_self: crate::biot::green_self_average(h) };
        let vals = g.values();

        // one parallel pass over mirror pairs: collect near cells, accumulate
        // the far value/gradient per row, combine rows in fixed order
        let rows: Vec<(Vec<(Vec2, f64)>, Vec2, Mat2)> = par::map_indexed(n / 2, |iy| {
            let y = grid.coord(iy);
            let mut near = Vec::new();
            let mut fv = Vec2::ZERO;
            let mut fg = Mat2::default();
            for ix in 0..n {
                let v1 = vals[iy * n + ix];
                let v2 = vals[(n - 1 - iy) * n + (n - 1 - ix)];
                if v1 == 0.0 && v2 == 0.0 {
                    continue;
                }
                let node = Vec2::new(grid.coord(ix), y);
                let mean = 0.5 * (v1 + v2);
                if node.norm() <= near_radius {
                    near.push((node, mean));
                } else {
                    let w = mean * area;
                    let k = kernel.kernel(-node) + kernel.kernel(node);
                    fv = fv + k.scale(w);
                    let m = kernel.kernel_gradient(-node) + kernel.kernel_gradient(node);
                    fg = fg + Mat2::new(m.a * w, m.b * w, m.c * w, m.d * w);
                }
            }
            (near, fv, fg)
        });
        let mut near = Vec::new();
        let mut far_value = Vec2::ZERO;
        let mut far_gradient = Mat2::default();
        for (nr, fv, fg) in rows {
            near.extend(nr);
            far_value = far_value + fv;
            far_gradient = far_gradient + fg;
        }
        let _ = bs;
        NearOriginVelocity { near, far_value, far_gradient, area, kernel }
    }

    /// `u_g(p)` for `|p| <= 0.05`.
    pub fn eval(&self, p: Vec2) -> Vec2 {
        debug_assert!(p.norm() <= MODEL_VALIDITY * 1.5, "probe left the model range");
        let mut u = self.far_value + self.far_gradient.apply(p);
        for &(node, mean) in &self.near {
            let k = self.kernel.kernel(p - node) + self.kernel.kernel(p + node);
            u = u + k.scale(mean * self.area);
        }
        u
    }

    /// `grad u_g(p)` for `|p| <= 0.05`.
    pub fn gradient(&self, p: Vec2) -> Mat2 {
        let mut m = self.far_gradient;
        for &(node, mean) in &self.near {
            let k = self.kernel.kernel_gradient(p - node) + self.kernel.kernel_gradient(p + node);
            let w = mean * self.area;
            m = m + Mat2::new(k.a * w, k.b * w, k.c * w, k.d * w);
        }
        m
    }
}

// ---------------------------------------------------------------------------
// Probe records
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TrajectoryStatus {
    Completed,
    Collapsed,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TrajectorySample {
    pub t: f64,
    pub position: Vec2,
    pub radius: f64,
    pub u_g: Vec2,
    /// Forcing value `-u_g . grad w_s` at the probe (the integrand of the
    /// trajectory formula for `g` inside the loglog core).
    pub forcing: f64,
    /// Accumulated `g` along the trajectory up to this sample.
    pub g_accum: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub r: f64,
    pub t_r: f64,
    pub status: TrajectoryStatus,
    /// `u_g((0, r), 0)` of the run's initial data.
    pub ug_initial: Vec2,
    pub samples: Vec<TrajectorySample>,
}

impl TrajectoryRecord {
    pub fn final_sample(&self) -> &TrajectorySample {
        self.samples.last().expect("record holds the initial sample")
    }

    pub fn csv(&self) -> String {
        let mut out = String::from("t,x,y,radius,ugx,ugy,forcing,g\n");
        for s in &self.samples {
            out.push_str(&format!(
                "{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e}\n",
                s.t, s.position.x, s.position.y, s.radius, s.u_g.x, s.u_g.y, s.forcing, s.g_accum
            ));
        }
        out
    }
}

/// Fill the accumulated-`g` column by composite Simpson over the uniform
/// prefix and a trapezoid on a trailing partial step.
fn accumulate_g(samples: &mut [TrajectorySample]) {
    if samples.len() < 2 {
        return;
    }
    let dt = samples[1].t - samples[0].t;
    let forcing: Vec<f64> = samples.iter().map(|s| s.forcing).collect();
    // uniform prefix length
    let mut uniform = samples.len();
    for k in 2..samples.len() {
        if ((samples[k].t - samples[k - 1].t) - dt).abs() > 1e-9 * dt.max(1e-300) {
            uniform = k;
            break;
        }
    }
    for k in 1..samples.len() {
        if k < uniform {
            samples[k].g_accum = simpson_uniform(dt, &forcing[..=k]);
        } else {
            let seg = samples[k].t - samples[k - 1].t;
            samples[k].g_accum =
                samples[k - 1].g_accum + 0.5 * seg * (forcing[k - 1] + forcing[k]);
        }
    }
}

// ---------------------------------------------------------------------------
// Online probes (advanced by the solver loop)
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProbeSpec {
    pub r: f64,
    pub t_r: f64,
}

pub struct ProbeState {
    spec: ProbeSpec,
    clock: f64,
    pos: Vec2,
    ug_initial: Vec2,
    samples: Vec<TrajectorySample>,
    status: TrajectoryStatus,
    done: bool,
}

impl ProbeState {
    pub fn new(
        spec: ProbeSpec,
        bs: &BiotSavart,
        g0: &ScalarField,
        _ug0: &crate::field::VectorField,
    ) -> Result<Self> {
        if !(spec.r > 0.0 && spec.r < crate::vortex::INNER_CUTOFF) {
            return Err(Error::invalid(format!(
                "probe radius {} must lie in (0, e^-2)",
                spec.r
            )));
        }
        if !(spec.t_r > 0.0) {
            return Err(Error::invalid("probe horizon must be positive"));
        }
        let pos = Vec2::new(0.0, spec.r);
        let ug_initial = bs.direct_velocity_at(g0, pos);
        Ok(ProbeState {
            spec,
            clock: 0.0,
            pos,
            ug_initial,
            samples: Vec::new(),
            status: TrajectoryStatus::Completed,
            done: false,
        })
    }

    /// Record a sample against the current fields, then integrate one step
    /// (possibly shortened to land exactly on the horizon).
    pub fn advance(
        &mut self,
        _solver_t: f64,
        dt: f64,
        model: &NearOriginVelocity,
        profile: &RadialVortexProfile,
        include_vortex: bool,
    ) -> Result<()> {
        if self.done {
            return Ok(());
        }
        let u_g = model.eval(self.pos);
        let rho = self.pos.norm();
        let forcing = if rho > 0.0 && rho < crate::vortex::OUTER_CUTOFF {
            -u_g.dot(self.pos.scale(profile.ws_prime(rho) / rho))
        } else {
            0.0
        };
        self.samples.push(TrajectorySample {
            t: self.clock,
            position: self.pos,
            radius: rho,
            u_g,
            forcing,
            g_accum: 0.0,
        });
        if rho < COLLAPSE_RADIUS {
            self.status = TrajectoryStatus::Collapsed;
            self.done = true;
            return Ok(());
        }
        if self.clock >= self.spec.t_r - 1e-12 {
            self.done = true;
            return Ok(());
        }

        let step = dt.min(self.spec.t_r - self.clock);
        let vel = |p: Vec2| -> Vec2 {
            let mut v = model.eval(p);
            if include_vortex {
                v = v + profile.us_velocity(p);
            }
            v
        };
        let k1 = vel(self.pos);
        let k2 = vel(self.pos + k1.scale(0.5 * step));
        let k3 = vel(self.pos + k2.scale(0.5 * step));
        let k4 = vel(self.pos + k3.scale(step));
        self.pos = self.pos
            + (k1 + (k2 + k3).scale(2.0) + k4).scale(step / 6.0);
        self.clock += step;
        Ok(())
    }

    pub fn finish(mut self) -> TrajectoryRecord {
        accumulate_g(&mut self.samples);
        TrajectoryRecord {
            r: self.spec.r,
            t_r: self.spec.t_r,
            status: self.status,
            ug_initial: self.ug_initial,
            samples: self.samples,
        }
    }
}

// ---------------------------------------------------------------------------
// Offline tracing against a snapshot stack
// ---------------------------------------------------------------------------

/// Velocity sampler over a completed run: cubic (Catmull-Rom) interpolation
/// in time between snapshot velocity fields, with the near-origin direct
/// evaluator below the model radius and bicubic sampling elsewhere.
pub struct RunVelocity<'a> {
    run: &'a SolverRun,
    near_models: BTreeMap<usize, NearOriginVelocity>,
}

impl<'a> RunVelocity<'a> {
    pub fn new(run: &'a SolverRun) -> Self {
        RunVelocity { run, near_models: BTreeMap::new() }
    }

    fn ug_at_snapshot(&mut self, k: usize, p: Vec2) -> Vec2 {
        if p.norm() < MODEL_VALIDITY {
            let run = self.run;
            let model = self.near_models.entry(k).or_insert_with(|| {
                NearOriginVelocity::build(&run.bs, run.snapshot(k), NEAR_RADIUS)
            });
            model.eval(p)
        } else {
            self.run.ug(k).sample_clamped(p)
        }
    }

    /// Perturbation velocity `u_g(p, t)`.
    pub fn ug(&mut self, p: Vec2, t: f64) -> Vec2 {
        let times = &self.run.times;
        let last = times.len() - 1;
        let s = self.run.config.snapshot_interval;
        let k = ((t / s).floor() as usize).min(last.saturating_sub(1));
        let tau = ((t - times[k]) / s).clamp(0.0, 1.0);
        // Catmull-Rom stencil clamped at the ends
        let km1 = k.saturating_sub(1);
        let kp1 = (k + 1).min(last);
        let kp2 = (k + 2).min(last);
        let v0 = self.ug_at_snapshot(km1, p);
        let v1 = self.ug_at_snapshot(k, p);
        let v2 = self.ug_at_snapshot(kp1, p);
        let v3 = self.ug_at_snapshot(kp2, p);
        catmull_rom(v0, v1, v2, v3, tau)
    }

    /// Full velocity `u_s + u_g` (the vortex part only when enabled).
    pub fn velocity(&mut self, p: Vec2, t: f64) -> Vec2 {
        let mut v = self.ug(p, t);
        if self.run.config.include_vortex {
            v = v + self.run.profile.us_velocity(p);
        }
        v
    }
}

fn catmull_rom(v0: Vec2, v1: Vec2, v2: Vec2, v3: Vec2, t: f64) -> Vec2 {
    let t2 = t * t;
    let t3 = t2 * t;
    v1.scale(1.0 - 2.5 * t2 + 1.5 * t3)
        + v2.scale(0.5 * t + 2.0 * t2 - 1.5 * t3)
        + v0.scale(-0.5 * t + t2 - 0.5 * t3)
        + v3.scale(-0.5 * t2 + 0.5 * t3)
}

/// Classical RK4 trace of the probe ODE against a stored run.
pub fn trace(
    run: &SolverRun,
    r: f64,
    t_max: f64,
    dt_override: Option<f64>,
) -> Result<TrajectoryRecord> {
    if !(r > 0.0 && r < crate::vortex::INNER_CUTOFF) {
        return Err(Error::invalid(format!("trace radius {r} must lie in (0, e^-2)")));
    }
    let t_end = *run.times.last().unwrap();
    if t_max > t_end + 1e-12 {
        return Err(Error::invalid(format!(
            "trace horizon {t_max} exceeds the run horizon {t_end}"
        )));
    }
    let dt = dt_override.unwrap_or_else(|| run.dt.min(t_max / 200.0));
    let mut sampler = RunVelocity::new(run);
    let profile = run.profile.clone();
    let ug_initial = sampler.ug(Vec2::new(0.0, r), 0.0);

    let mut samples = Vec::new();
    let mut status = TrajectoryStatus::Completed;
    let mut pos = Vec2::new(0.0, r);
    let mut t = 0.0;
    loop {
        let rho = pos.norm();
        let u_g = sampler.ug(pos, t);
        let forcing = if rho > 0.0 && rho < crate::vortex::OUTER_CUTOFF {
            -u_g.dot(pos.scale(profile.ws_prime(rho) / rho))
        } else {
            0.0
        };
        samples.push(TrajectorySample { t, position: pos, radius: rho, u_g, forcing, g_accum: 0.0 });
        if rho < COLLAPSE_RADIUS {
            status = TrajectoryStatus::Collapsed;
            break;
        }
        if t >= t_max - 1e-12 {
            break;
        }
        let step = dt.min(t_max - t);
        let k1 = sampler.velocity(pos, t);
        let k2 = sampler.velocity(pos + k1.scale(0.5 * step), t + 0.5 * step);
        let k3 = sampler.velocity(pos + k2.scale(0.5 * step), t + 0.5 * step);
        let k4 = sampler.velocity(pos + k3.scale(step), t + step);
        pos = pos + (k1 + (k2 + k3).scale(2.0) + k4).scale(step / 6.0);
        t += step;
    }
    let mut record = TrajectoryRecord { r, t_r: t_max, status, ug_initial, samples };
    accumulate_g(&mut record.samples);
    Ok(record)
}

/// Accumulated `g` along a recorded trajectory by the trajectory-integral
/// formula; the near-origin evaluation path for `g`, independent of grid
/// resolution at the probe radius.
pub fn g_along_trajectory(record: &TrajectoryRecord) -> Result<Vec<f64>> {
    if !(record.r < 20.0) {
        return Err(Error::invalid("the trajectory formula assumes g_0 vanishes at the start"));
    }
    for s in &record.samples {
        if s.radius >= crate::vortex::INNER_CUTOFF {
            return Err(Error::domain(format!(
                "trajectory left the loglog core (|phi| = {:.3e} at t = {:.4})",
                s.radius, s.t
            )));
        }
    }
    Ok(record.samples.iter().map(|s| s.g_accum).collect())
}

// ---------------------------------------------------------------------------
// Breakdown parameters and statistics
// ---------------------------------------------------------------------------

/// `alpha = (5 - beta)/4`, `epsilon = (beta - 1)/4`.
pub fn breakdown_parameters(beta: f64) -> Result<(f64, f64)> {
    if !(beta > 1.0 && beta < 2.0) {
        return Err(Error::invalid(format!("beta {beta} must lie in (1, 2)")));
    }
    Ok(((5.0 - beta) / 4.0, (beta - 1.0) / 4.0))
}

/// Probe horizon `t_r = (log 1/r)^{-(1 - alpha + epsilon)}` for given `beta`.
pub fn breakdown_horizon(r: f64, beta: f64) -> Result<(f64, f64, f64)> {
    let (alpha, epsilon) = breakdown_parameters(beta)?;
    if !(r > 0.0 && r < 1.0) {
        return Err(Error::invalid(format!("radius {r} must lie in (0, 1)")));
    }
    let q = 1.0 - alpha + epsilon;
    let t_r = (1.0 / r).ln().powf(-q);
    Ok((alpha, epsilon, t_r))
}

/// Largest radius whose horizon fits inside `t_horizon`.
pub fn max_feasible_radius(beta: f64, t_horizon: f64) -> Result<f64> {
    let (alpha, epsilon) = breakdown_parameters(beta)?;
    let q = 1.0 - alpha + epsilon;
    Ok((-t_horizon.powf(-1.0 / q)).exp())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BreakdownPoint {
    pub r: f64,
    pub alpha: f64,
    pub epsilon: f64,
    pub beta: f64,
    pub t_r: f64,
    pub end_radius: f64,
    /// `(log 1/|phi_r(t_r)|)^beta |g(phi_r(t_r), t_r)|`.
    pub statistic: f64,
    /// The same data scored with `phi_alpha` (the conservation side).
    pub alpha_score: f64,
}

/// Score a completed probe record as a breakdown point.
pub fn breakdown_statistic(record: &TrajectoryRecord, beta: f64) -> Result<BreakdownPoint> {
    let (alpha, epsilon) = breakdown_parameters(beta)?;
    if record.status != TrajectoryStatus::Completed {
        return Err(Error::invalid("probe did not complete its horizon"));
    }
    let last = record.final_sample();
    if (last.t - record.t_r).abs() > 1e-9 + 1e-6 * record.t_r {
        return Err(Error::invalid(format!(
            "record ends at t = {} but the horizon is {}",
            last.t, record.t_r
        )));
    }
    let l_end = (1.0 / last.radius).ln();
    let g_end = last.g_accum.abs();
    Ok(BreakdownPoint {
        r: record.r,
        alpha,
        epsilon,
        beta,
        t_r: record.t_r,
        end_radius: last.radius,
        statistic: l_end.powf(beta) * g_end,
        alpha_score: l_end.powf(alpha) * g_end,
    })
}

/// Least-squares slope of `log(statistic)` against `loglog(1/r)`.
pub fn breakdown_slope(points: &[BreakdownPoint]) -> f64 {
    let xs: Vec<f64> = points.iter().map(|p| (1.0 / p.r).ln().ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.statistic.max(1e-300).ln()).collect();
    crate::util::affine_fit(&xs, &ys).1
}

// ---------------------------------------------------------------------------
// Key-Lemma deviation and trajectory stability
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KeyLemmaReport {
    pub r: f64,
    pub t_r: f64,
    /// `max_{t <= t_r} |u_g(phi_r(t), t) - u_g((0,r), 0)| / r`.
    pub max_ratio: f64,
    /// Whether `r` sits inside the fit window `r < 1e-2`.
    pub in_window: bool,
}

pub fn key_lemma_deviation(record: &TrajectoryRecord) -> KeyLemmaReport {
    let max_ratio = record
        .samples
        .iter()
        .map(|s| (s.u_g - record.ug_initial).norm() / record.r)
        .fold(0.0, f64::max);
    KeyLemmaReport {
        r: record.r,
        t_r: record.t_r,
        max_ratio,
        in_window: record.r < KEY_LEMMA_WINDOW,
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StabilityReport {
    pub r: f64,
    /// `max_t |phi_r(t) - (0, r)| / r`.
    pub position_drift: f64,
    /// `max_t |phi_r(t)/|phi_r(t)| - (0, 1)|`.
    pub direction_drift: f64,
}

pub fn stability_check(record: &TrajectoryRecord) -> StabilityReport {
    let start = Vec2::new(0.0, record.r);
    let mut position_drift: f64 = 0.0;
    let mut direction_drift: f64 = 0.0;
    for s in &record.samples {
        position_drift = position_drift.max((s.position - start).norm() / record.r);
        if s.radius > 0.0 {
            let dir = s.position.scale(1.0 / s.radius);
            direction_drift = direction_drift.max((dir - Vec2::new(0.0, 1.0)).norm());
        }
    }
    StabilityReport { r: record.r, position_drift, direction_drift }
}

// ---------------------------------------------------------------------------
// Separation exponents and the log-Lipschitz constant
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SeparationReport {
    pub initial_separation: f64,
    pub times: Vec<f64>,
    /// Empirical exponents `e(t)` with `|Phi(x,t)-Phi(y,t)| = |x-y|^{e(t)}`.
    pub exponents: Vec<f64>,
    pub fitted_n: f64,
    pub within_band: bool,
}

/// Double-exponential separation diagnostic for a pair of points.
pub fn separation_exponent(
    run: &SolverRun,
    x: Vec2,
    y: Vec2,
    t_max: f64,
    fitted_n: f64,
) -> Result<SeparationReport> {
    let sep0 = (x - y).norm();
    if !(sep0 > 0.0) {
        return Err(Error::invalid("separation exponent needs two distinct points"));
    }
    if sep0 >= crate::vortex::OUTER_CUTOFF {
        return Err(Error::invalid(format!(
            "initial separation {sep0} must be below e^-1"
        )));
    }
    let dt = run.dt;
    let mut sampler = RunVelocity::new(run);
    let mut px = x;
    let mut py = y;
    let mut times = vec![0.0];
    let mut exponents = vec![1.0];
    let mut t = 0.0;
    let log0 = sep0.ln();
    while t < t_max - 1e-12 {
        let step = dt.min(t_max - t);
        for p in [&mut px, &mut py] {
            let k1 = sampler.velocity(*p, t);
            let k2 = sampler.velocity(*p + k1.scale(0.5 * step), t + 0.5 * step);
            let k3 = sampler.velocity(*p + k2.scale(0.5 * step), t + 0.5 * step);
            let k4 = sampler.velocity(*p + k3.scale(step), t + step);
            *p = *p + (k1 + (k2 + k3).scale(2.0) + k4).scale(step / 6.0);
        }
        t += step;
        times.push(t);
        exponents.push(((px - py).norm().max(1e-300)).ln() / log0);
    }
    let within_band = times
        .iter()
        .zip(&exponents)
        .all(|(&tt, &e)| e >= (-fitted_n * tt).exp() - 1e-9 && e <= (fitted_n * tt).exp() + 1e-9);
    Ok(SeparationReport { initial_separation: sep0, times, exponents, fitted_n, within_band })
}

/// Fit the log-Lipschitz constant of the run's velocity by sampling pair
/// quotients `|u(x,t) - u(y,t)| / (s log 1/s)`.
///
/// Samples are grouped by snapshot (a handful of evenly spaced times) so the
/// velocity-field cache is touched sequentially.
pub fn fit_log_lipschitz(run: &SolverRun, seed: u64, samples: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sampler = RunVelocity::new(run);
    let lmax = run.grid.half_width() * 0.7;
    let mut n: f64 = 0.0;
    let snapshots = run.times.len();
    let time_slots = 5usize.min(snapshots);
    let per_slot = (samples / time_slots).max(1);
    for slot in 0..time_slots {
        let k = slot * (snapshots - 1) / time_slots.max(1);
        let t = run.times[k];
        for _ in 0..per_slot {
            let rho = 10f64.powf(rng.gen_range(-4.0..lmax.log10()));
            let th = rng.gen_range(0.0..std::f64::consts::TAU);
            let a = Vec2::new(rho * th.cos(), rho * th.sin());
            let s = 10f64.powf(rng.gen_range(-6.0..(0.9 * crate::moc::DOMAIN_CAP).log10()));
            let phi = rng.gen_range(0.0..std::f64::consts::TAU);
            let b = a + Vec2::new(s * phi.cos(), s * phi.sin());
            let sep = (a - b).norm();
            if sep <= 0.0 || sep >= crate::moc::DOMAIN_CAP {
                continue;
            }
            let du = (sampler.velocity(a, t) - sampler.velocity(b, t)).norm();
            n = n.max(du / (sep * (1.0 / sep).ln()));
        }
    }
    n
}

// ---------------------------------------------------------------------------
// Velocity-gradient diagnostic
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GradUDiagnostic {
    pub x: Vec2,
    pub t: f64,
    /// `|grad u(x, t)|` (analytic vortex part plus quadrature of `u_g`).
    pub raw: f64,
    /// `loglog(1/|x|)` for the `t = 0` comparison.
    pub loglog: f64,
}

/// `|grad u(x,t)|` at a near-origin probe from a stored run.
pub fn grad_u_diagnostic(run: &SolverRun, x: Vec2, t: f64) -> Result<GradUDiagnostic> {
    let rho = x.norm();
    if !(rho >= 1e-6 && rho <= 1e-2) {
        return Err(Error::invalid(format!("probe |x| = {rho} outside [1e-6, 1e-2]")));
    }
    let k = run.snapshot_index(t);
    let model = NearOriginVelocity::build(&run.bs, run.snapshot(k), NEAR_RADIUS);
    let mut m = model.gradient(x);
    if run.config.include_vortex {
        m = m + run.profile.us_gradient(x)?;
    }
    Ok(GradUDiagnostic { x, t, raw: m.op_norm(), loglog: ((1.0 / rho).ln()).ln() })
}

/// The bound shape `M (loglog(1/|x|) + (log 1/|x|)^{1-alpha} t + e^{M t (log 1/|x|)^{1-alpha}})`.
pub fn grad_bound(m: f64, x_norm: f64, t: f64, alpha: f64) -> f64 {
    let l = (1.0 / x_norm).ln();
    m * (l.ln() + l.powf(1.0 - alpha) * t + (m * t * l.powf(1.0 - alpha)).exp())
}

/// Smallest `M` (by bisection) such that every diagnostic satisfies the bound.
pub fn fit_grad_bound_m(points: &[GradUDiagnostic], alpha: f64) -> f64 {
    let ok = |m: f64| {
        points
            .iter()
            .all(|p| p.raw <= grad_bound(m, p.x.norm(), p.t, alpha))
    };
    let mut hi = 1.0;
    while !ok(hi) && hi < 1e6 {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if ok(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// Sandwich-bound constant: smallest `M` with
/// `r e^{-M t L^{1-alpha}} < |phi_r(t)| < r e^{M t L^{1-alpha}}` at all samples.
pub fn fit_sandwich_m(records: &[TrajectoryRecord], alpha: f64) -> f64 {
    let mut m: f64 = 0.0;
    for rec in records {
        let l = (1.0 / rec.r).ln().powf(1.0 - alpha);
        for s in rec.samples.iter().skip(1) {
            if s.t > 0.0 && s.radius > 0.0 {
                m = m.max((s.radius / rec.r).ln().abs() / (s.t * l));
            }
        }
    }
    m * 1.000001 + 1e-12
}

/// Check the sandwich band for a fitted `M`.
pub fn sandwich_holds(records: &[TrajectoryRecord], alpha: f64, m: f64) -> bool {
    records.iter().all(|rec| {
        let l = (1.0 / rec.r).ln().powf(1.0 - alpha);
        rec.samples.iter().all(|s| {
            let lo = rec.r * (-m * s.t * l).exp();
            let hi = rec.r * (m * s.t * l).exp();
            s.radius >= lo * (1.0 - 1e-9) && s.radius <= hi * (1.0 + 1e-9)
        })
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Grid2D;
    use crate::solver::{run_transport, SolverConfig};
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn profile() -> Arc<RadialVortexProfile> {
        Arc::new(RadialVortexProfile::new())
    }

    fn zero_run(n: usize, t_final: f64) -> SolverRun {
        let grid = Grid2D::new(n, 4.0).unwrap();
        let bs = Arc::new(BiotSavart::new(grid));
        let mut g0 = ScalarField::zeros(grid);
        g0.symmetrize_even();
        let config = SolverConfig {
            t_final,
            snapshot_interval: 0.05,
            dt: Some(5e-3),
            ..Default::default()
        };
        run_transport(profile(), bs, g0, config, Vec::new()).unwrap()
    }

    #[test]
    fn eq34_parameters() {
        let (alpha, eps) = breakdown_parameters(1.5).unwrap();
        assert_relative_eq!(alpha, 0.875);
        assert_relative_eq!(eps, 0.125);
        assert!(breakdown_parameters(2.5).is_err());
        assert!(breakdown_parameters(1.0).is_err());
        let (_, _, t_r) = breakdown_horizon(1e-4, 1.5).unwrap();
        assert_relative_eq!(t_r, (1.0f64 / 1e-4).ln().powf(-0.25), epsilon = 1e-14);
    }

    #[test]
    fn minimal_feasible_radius_matches_horizon() {
        let beta = 1.5;
        let t = 0.6;
        let r = max_feasible_radius(beta, t).unwrap();
        let (_, _, tr) = breakdown_horizon(r, beta).unwrap();
        assert_relative_eq!(tr, t, max_relative = 1e-10);
    }

    #[test]
    fn near_origin_model_matches_direct_quadrature() {
        let grid = Grid2D::new(256, 48.0).unwrap();
        let bs = BiotSavart::new(grid);
        // even field with support both near and far
        let mut g = ScalarField::from_fn(grid, |p| {
            let far = (-(p - Vec2::new(22.0, 22.0)).norm_sq() / 0.5).exp()
                + (-(p + Vec2::new(22.0, 22.0)).norm_sq() / 0.5).exp();
            let near = 0.3 * (-(p.norm_sq()) / 0.02).exp() * (2.0 * p.x.atan2(p.y)).cos();
            far + near
        });
        g.symmetrize_even();
        let model = NearOriginVelocity::build(&bs, &g, NEAR_RADIUS);
        for &rho in &[1e-3, 1e-4, 1e-5] {
            let p = Vec2::new(0.3 * rho, rho);
            let fast = model.eval(p);
            let slow = bs.direct_velocity_at(&g, p);
            let err = (fast - slow).norm() / slow.norm().max(1e-300);
            assert!(err <= 1e-3, "rel err {err} at rho {rho}");
        }
    }

    #[test]
    fn zero_perturbation_preserves_probe_radius() {
        // g = 0: the flow is a pure rotation, radii are conserved
        let run = zero_run(64, 0.5);
        let rec = trace(&run, 0.05, 0.5, None).unwrap();
        assert_eq!(rec.status, TrajectoryStatus::Completed);
        for s in &rec.samples {
            assert!(
                (s.radius - 0.05).abs() / 0.05 <= 1e-10,
                "radius drifted to {}",
                s.radius
            );
        }
        // forcing and accumulated g vanish identically
        assert!(g_along_trajectory(&rec).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn step_doubling_converges() {
        let run = zero_run(64, 0.2);
        let a = trace(&run, 0.02, 0.2, Some(2e-3)).unwrap();
        let b = trace(&run, 0.02, 0.2, Some(1e-3)).unwrap();
        let d = (a.final_sample().position - b.final_sample().position).norm();
        assert!(d / 0.02 <= 1e-8, "endpoint difference {d}");
    }

    #[test]
    fn g_integral_starts_empty_and_respects_the_core() {
        let run = zero_run(64, 0.2);
        let rec = trace(&run, 0.01, 0.2, None).unwrap();
        assert_eq!(rec.samples[0].g_accum, 0.0);
        // synthetic record that exits the loglog core
        let mut bad = rec.clone();
        bad.samples[1].radius = 0.2;
        assert!(g_along_trajectory(&bad).is_err());
    }

    #[test]
    fn same_circle_pair_has_unit_exponent() {
        let run = zero_run(64, 0.5);
        let r0 = 0.1;
        let x = Vec2::new(0.0, r0);
        let th = 1e-3 / r0;
        let y = Vec2::new(r0 * th.sin(), r0 * th.cos());
        let n = fit_log_lipschitz(&run, 7, 500);
        let rep = separation_exponent(&run, x, y, 0.5, n).unwrap();
        for &e in &rep.exponents {
            assert!(e > 0.99 && e < 1.01, "exponent {e}");
        }
        assert!(rep.within_band);
        assert!(separation_exponent(&run, x, x, 0.5, n).is_err());
    }

    #[test]
    fn rotation_control_shows_expected_direction_drift() {
        // For g = 0 the probe rotates; over a long horizon the direction
        // drift grows while the radius stays pinned. This is the documented
        // control behavior, not a stability violation.
        let run = zero_run(64, 0.5);
        let rec = trace(&run, 0.01, 0.5, None).unwrap();
        let st = stability_check(&rec);
        assert!(st.direction_drift > 0.1, "drift {}", st.direction_drift);
        assert!((st.position_drift - st.direction_drift).abs() < 0.2);
    }

    #[test]
    fn key_lemma_window_flag() {
        let run = zero_run(64, 0.2);
        let rec = trace(&run, 0.02, 0.2, None).unwrap();
        let rep = key_lemma_deviation(&rec);
        assert!(rep.in_window);
        let rec2 = trace(&run, 0.1, 0.2, None).unwrap();
        assert!(!key_lemma_deviation(&rec2).in_window);
        // zero perturbation: u_g vanishes along the whole trajectory
        assert_abs_diff_eq!(rep.max_ratio, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn breakdown_statistic_of_zero_run_vanishes() {
        let grid = Grid2D::new(64, 4.0).unwrap();
        let bs = Arc::new(BiotSavart::new(grid));
        let mut g0 = ScalarField::zeros(grid);
        g0.symmetrize_even();
        let beta = 1.5;
        let r = 1e-4;
        let (_, _, t_r) = breakdown_horizon(r, beta).unwrap();
        let config = SolverConfig {
            t_final: 0.65,
            snapshot_interval: 0.05,
            dt: Some(5e-3),
            ..Default::default()
        };
        let run = run_transport(
            profile(),
            bs,
            g0,
            config,
            vec![ProbeSpec { r, t_r }],
        )
        .unwrap();
        let point = breakdown_statistic(&run.probes[0], beta).unwrap();
        assert_eq!(point.statistic, 0.0);
        assert_eq!(point.alpha_score, 0.0);
        assert_relative_eq!(point.end_radius, r, max_relative = 1e-9);
    }

    #[test]
    fn sandwich_fit_covers_its_own_records() {
        let run = zero_run(64, 0.3);
        let recs = vec![
            trace(&run, 0.02, 0.3, None).unwrap(),
            trace(&run, 0.005, 0.3, None).unwrap(),
        ];
        let m = fit_sandwich_m(&recs, 0.5);
        assert!(sandwich_holds(&recs, 0.5, m));
    }

    #[test]
    fn grad_u_reduces_to_the_vortex_gradient_without_perturbation() {
        let run = zero_run(64, 0.2);
        let x = Vec2::new(0.0, 5e-3);
        let d = grad_u_diagnostic(&run, x, 0.1).unwrap();
        let us = run.profile.us_gradient(x).unwrap().op_norm();
        assert_relative_eq!(d.raw, us, max_relative = 1e-10);
        assert!(d.raw / d.loglog <= 4.0);
        // bound fit: normalized values stay at or below one
        let m = fit_grad_bound_m(&[d.clone()], 0.5);
        assert!(d.raw <= grad_bound(m, x.norm(), 0.1, 0.5) * (1.0 + 1e-9));
    }

    #[test]
    fn probe_rejects_bad_radii() {
        let grid = Grid2D::new(64, 4.0).unwrap();
        let bs = BiotSavart::new(grid);
        let mut g0 = ScalarField::zeros(grid);
        g0.symmetrize_even();
        let ug = bs.solve_fft(&g0).unwrap();
        assert!(ProbeState::new(ProbeSpec { r: 0.2, t_r: 0.1 }, &bs, &g0, &ug).is_err());
        assert!(ProbeState::new(ProbeSpec { r: -1.0, t_r: 0.1 }, &bs, &g0, &ug).is_err());
    }
}
