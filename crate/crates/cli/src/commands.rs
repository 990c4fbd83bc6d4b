//! Subcommand implementations.

use crate::config::{ExperimentConfig, Scenario};
use crate::output::{out_root, run_dir, write_json, Provenance};
use crate::CommonArgs;
use anyhow::{bail, Context, Result};
use serde::Serialize;
use std::path::Path;
use std::process::ExitCode;
use std::sync::Arc;
use vortexlab_core::biot::BiotSavart;
use vortexlab_core::field::{Grid2D, ScalarField};
use vortexlab_core::initial::{self, HyperbolicityFit};
use vortexlab_core::moc::ModulusKind;
use vortexlab_core::oracles::{self, OracleConfig};
use vortexlab_core::report::{norm_csv, plot_data, NormRow};
use vortexlab_core::solver::{self, SolverConfig, SolverRun};
use vortexlab_core::traj::{self, ProbeSpec};
use vortexlab_core::util::logspace;
use vortexlab_core::vortex::RadialVortexProfile;

const PASS: ExitCode = ExitCode::SUCCESS;

fn science_fail() -> ExitCode {
    ExitCode::from(2)
}

pub fn resolve_config(scenario: Scenario, common: &CommonArgs) -> Result<ExperimentConfig> {
    let mut cfg = match &common.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::defaults(scenario),
    };
    cfg.scenario = scenario;
    if common.quick {
        cfg.apply_quick();
    }
    if let Some(v) = common.grid_n {
        cfg.grid_n = v;
    }
    if let Some(v) = common.grid_half_width {
        cfg.grid_half_width = v;
    }
    if let Some(v) = common.epsilon {
        cfg.epsilon = v;
    }
    if let Some(v) = common.alpha {
        cfg.alpha = v;
    }
    if let Some(v) = common.beta {
        cfg.beta = v;
    }
    if let Some(v) = common.t_final {
        cfg.t_final = v;
    }
    if let Some(v) = common.dt {
        cfg.dt = Some(v);
    }
    if let Some(v) = common.snapshot_interval {
        cfg.snapshot_interval = v;
    }
    if let Some(v) = common.seed {
        cfg.seed = v;
    }
    if let Some(v) = &common.r_list {
        cfg.r_list = v.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

struct Setup {
    profile: Arc<RadialVortexProfile>,
    bs: Arc<BiotSavart>,
    g0: ScalarField,
    fit: HyperbolicityFit,
}

fn setup(cfg: &ExperimentConfig) -> Result<Setup> {
    let grid = Grid2D::new(cfg.grid_n, cfg.grid_half_width)?;
    let profile = Arc::new(RadialVortexProfile::new());
    let bs = Arc::new(BiotSavart::new(grid));
    let g0 = initial::build_g0(grid, cfg.epsilon)?;
    let radii = logspace(1e-8, 0.25, 24);
    let fit = initial::certify_hyperbolicity(&g0, &bs, &radii, cfg.epsilon)?;
    Ok(Setup { profile, bs, g0, fit })
}

fn solver_config(cfg: &ExperimentConfig) -> SolverConfig {
    SolverConfig {
        t_final: cfg.t_final,
        dt: cfg.dt,
        snapshot_interval: cfg.snapshot_interval,
        ..Default::default()
    }
}

// ---------------------------------------------------------------------------

pub fn build_data(common: &CommonArgs) -> Result<ExitCode> {
    let cfg = resolve_config(Scenario::Diagnostics, common)?;
    let dir = run_dir(&out_root(&common.out_dir), "build-data", &cfg)?;
    let s = setup(&cfg)?;

    write_json(&dir.join("profile.json"), s.profile.as_ref())?;
    s.g0.write_binary(&dir.join("g0.bin"))?;
    write_json(&dir.join("hyperbolicity.json"), &s.fit)?;
    let (r_vel, r_grad) = s.profile.empirical_bound_radii();
    #[derive(Serialize)]
    struct BuildSummary {
        provenance: Provenance,
        hyperbolicity: HyperbolicityFit,
        circulation: f64,
        velocity_bound_radius: f64,
        gradient_bound_radius: f64,
    }
    let mut prov = Provenance::new(&cfg);
    prov.hyperbolicity_k = Some(s.fit.k);
    write_json(
        &dir.join("summary.json"),
        &BuildSummary {
            provenance: prov,
            hyperbolicity: s.fit.clone(),
            circulation: s.profile.circulation(),
            velocity_bound_radius: r_vel,
            gradient_bound_radius: r_grad,
        },
    )?;
    println!("build-data: K = {:.6e}, delta = {:.3}, outputs in {}", s.fit.k, s.fit.delta, dir.display());
    Ok(PASS)
}

pub fn solve(common: &CommonArgs) -> Result<ExitCode> {
    let cfg = resolve_config(Scenario::Diagnostics, common)?;
    let dir = run_dir(&out_root(&common.out_dir), "solve", &cfg)?;
    let s = setup(&cfg)?;
    let run = solver::run_transport(s.profile, s.bs, s.g0, solver_config(&cfg), Vec::new())?;
    run.write_to_dir(&dir)?;
    write_diagnostics_csv(&dir, &run)?;
    let mut prov = Provenance::new(&cfg);
    prov.hyperbolicity_k = Some(s.fit.k);
    write_json(&dir.join("summary.json"), &prov)?;
    println!(
        "solve: {} snapshots over [0, {}], dt = {:.3e}, run dir {}",
        run.snapshot_count(),
        cfg.t_final,
        run.dt,
        dir.display()
    );
    Ok(PASS)
}

fn write_diagnostics_csv(dir: &Path, run: &SolverRun) -> Result<()> {
    let mut csv = String::from("t,sup_g,sup_forcing,even_defect,odd_defect,center_speed,cfl\n");
    for d in &run.diagnostics {
        csv.push_str(&format!(
            "{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e}\n",
            d.t, d.sup_g, d.sup_forcing, d.even_defect, d.odd_defect, d.center_speed, d.cfl
        ));
    }
    std::fs::write(dir.join("diagnostics.csv"), csv)?;
    Ok(())
}

pub fn conservation(common: &CommonArgs) -> Result<ExitCode> {
    let cfg = resolve_config(Scenario::Conservation, common)?;
    let dir = run_dir(&out_root(&common.out_dir), "conservation", &cfg)?;
    let s = setup(&cfg)?;
    let run = solver::run_transport(
        s.profile.clone(),
        s.bs.clone(),
        s.g0,
        solver_config(&cfg),
        Vec::new(),
    )?;
    let report = solver::consistency_check(&run, cfg.alpha, cfg.seed)?;

    let rows: Vec<NormRow> = report
        .times
        .iter()
        .zip(report.seminorms.iter().zip(&report.supnorms))
        .map(|(&t, (&sem, &sup))| {
            NormRow::new(
                t,
                ModulusKind::PhiAlpha { alpha: cfg.alpha },
                sem,
                sup,
                report.pair_count,
                report.min_separation,
            )
        })
        .collect();
    std::fs::write(dir.join("norms.csv"), norm_csv(&rows))?;
    if common.plot_data {
        std::fs::write(dir.join("norms.dat"), plot_data(&report.times, &report.norms))?;
    }

    let n_fit = traj::fit_log_lipschitz(&run, cfg.seed, 500);
    #[derive(Serialize)]
    struct ConservationSummary {
        provenance: Provenance,
        envelope_intercept: f64,
        envelope_slope: f64,
        max_ratio: f64,
        verdict: &'static str,
        violating_time: Option<f64>,
    }
    let violating_time = report
        .times
        .iter()
        .zip(&report.norms)
        .find(|(&t, &v)| {
            let env = report.fit.0 + report.fit.1 * t;
            env > 0.0 && v / env > 1.05
        })
        .map(|(&t, _)| t);
    let mut prov = Provenance::new(&cfg);
    prov.hyperbolicity_k = Some(s.fit.k);
    prov.log_lipschitz_n = Some(n_fit);
    let summary = ConservationSummary {
        provenance: prov,
        envelope_intercept: report.fit.0,
        envelope_slope: report.fit.1,
        max_ratio: report.max_ratio,
        verdict: if report.pass { "PASS" } else { "FAIL" },
        violating_time,
    };
    write_json(&dir.join("summary.json"), &summary)?;

    if report.pass {
        println!(
            "conservation: PASS (envelope {:.4e} + {:.4e} t, max ratio {:.4})",
            report.fit.0, report.fit.1, report.max_ratio
        );
        Ok(PASS)
    } else {
        println!(
            "conservation: FAIL (max ratio {:.4}{})",
            report.max_ratio,
            violating_time
                .map(|t| format!(", first violation at t = {t:.3}"))
                .unwrap_or_default()
        );
        Ok(science_fail())
    }
}

pub fn breakdown(common: &CommonArgs) -> Result<ExitCode> {
    let cfg = resolve_config(Scenario::Breakdown, common)?;
    let dir = run_dir(&out_root(&common.out_dir), "breakdown", &cfg)?;
    let s = setup(&cfg)?;

    // probe horizons; in quick mode cap them at the run horizon
    let mut capped = false;
    let mut probes = Vec::new();
    for &r in &cfg.r_list {
        let (_, _, t_r) = traj::breakdown_horizon(r, cfg.beta)?;
        let t_r = if t_r > cfg.t_final {
            if !common.quick {
                let r_max = traj::max_feasible_radius(cfg.beta, cfg.t_final)?;
                bail!(
                    "probe horizon t_r = {t_r:.3} for r = {r:.1e} exceeds T = {}; \
                     the largest feasible radius at this horizon is {r_max:.3e}",
                    cfg.t_final
                );
            }
            capped = true;
            cfg.t_final
        } else {
            t_r
        };
        probes.push(ProbeSpec { r, t_r });
    }

    let run = solver::run_transport(
        s.profile.clone(),
        s.bs.clone(),
        s.g0,
        solver_config(&cfg),
        probes,
    )?;

    let mut points = Vec::new();
    let mut key_reports = Vec::new();
    let mut stability = Vec::new();
    for rec in &run.probes {
        points.push(traj::breakdown_statistic(rec, cfg.beta)?);
        key_reports.push(traj::key_lemma_deviation(rec));
        stability.push(traj::stability_check(rec));
        std::fs::write(dir.join(format!("trajectory_r{:.1e}.csv", rec.r)), rec.csv())?;
    }
    points.sort_by(|a, b| b.r.partial_cmp(&a.r).unwrap());

    let mut csv = String::from("r,alpha,epsilon,beta,t_r,end_radius,statistic,alpha_score\n");
    for p in &points {
        csv.push_str(&format!(
            "{:.12e},{},{},{},{:.12e},{:.12e},{:.12e},{:.12e}\n",
            p.r, p.alpha, p.epsilon, p.beta, p.t_r, p.end_radius, p.statistic, p.alpha_score
        ));
    }
    std::fs::write(dir.join("breakdown.csv"), csv)?;
    if common.plot_data {
        let xs: Vec<f64> = points.iter().map(|p| (1.0 / p.r).ln().ln()).collect();
        let ys: Vec<f64> = points.iter().map(|p| p.statistic).collect();
        std::fs::write(dir.join("breakdown.dat"), plot_data(&xs, &ys))?;
    }

    // verdicts: strictly increasing statistic toward small r, slope in band,
    // alpha-rescored sequence bounded
    let mut offending_r = None;
    for w in points.windows(2) {
        // points are sorted by decreasing r: the statistic must increase
        if w[1].statistic <= w[0].statistic {
            offending_r = Some(w[1].r);
        }
    }
    let slope = traj::breakdown_slope(&points);
    let target = (cfg.beta - 1.0) / 2.0;
    let band = (target * 0.7, target * 1.3);
    let slope_ok = slope >= band.0 && slope <= band.1;
    let alpha_bounded = {
        let first = points.first().map(|p| p.alpha_score).unwrap_or(0.0);
        let max = points.iter().map(|p| p.alpha_score).fold(0.0f64, f64::max);
        first <= 0.0 || max <= 1.25 * first
    };
    let sandwich_m = traj::fit_sandwich_m(&run.probes, cfg.alpha);
    let n_fit = traj::fit_log_lipschitz(&run, cfg.seed, 500);

    #[derive(Serialize)]
    struct BreakdownSummary {
        provenance: Provenance,
        points: Vec<traj::BreakdownPoint>,
        key_lemma: Vec<traj::KeyLemmaReport>,
        stability: Vec<traj::StabilityReport>,
        slope: f64,
        slope_band: (f64, f64),
        monotone: bool,
        alpha_bounded: bool,
        horizon_capped: bool,
        verdict: &'static str,
    }
    let monotone = offending_r.is_none();
    let pass = monotone && (capped || slope_ok);
    let mut prov = Provenance::new(&cfg);
    prov.hyperbolicity_k = Some(s.fit.k);
    prov.sandwich_m = Some(sandwich_m);
    prov.log_lipschitz_n = Some(n_fit);
    write_json(
        &dir.join("summary.json"),
        &BreakdownSummary {
            provenance: prov,
            points: points.clone(),
            key_lemma: key_reports,
            stability,
            slope,
            slope_band: band,
            monotone,
            alpha_bounded,
            horizon_capped: capped,
            verdict: if pass { "PASS" } else { "FAIL" },
        },
    )?;

    println!(
        "breakdown: slope {slope:.4} (band [{:.3}, {:.3}]), monotone = {monotone}, \
         alpha-bounded = {alpha_bounded}{}",
        band.0,
        band.1,
        if capped { ", horizons capped (quick mode)" } else { "" }
    );
    if pass {
        Ok(PASS)
    } else {
        if let Some(r) = offending_r {
            println!("breakdown: FAIL, statistic not increasing at r = {r:.1e}");
        } else {
            println!("breakdown: FAIL, slope {slope:.4} outside [{:.3}, {:.3}]", band.0, band.1);
        }
        Ok(science_fail())
    }
}

pub fn trace(common: &CommonArgs, run_dir_path: &Path, r: f64, t: f64) -> Result<ExitCode> {
    let profile = Arc::new(RadialVortexProfile::new());
    let run = SolverRun::load_from_dir(run_dir_path, profile)
        .with_context(|| format!("loading run from {}", run_dir_path.display()))?;
    let record = traj::trace(&run, r, t, None)?;
    let out = out_root(&common.out_dir);
    std::fs::create_dir_all(&out)?;
    let path = out.join(format!("trace_r{r:.1e}_t{t}.csv"));
    std::fs::write(&path, record.csv())?;
    println!(
        "trace: r = {r:.3e}, {} samples, final radius {:.6e}, wrote {}",
        record.samples.len(),
        record.final_sample().radius,
        path.display()
    );
    Ok(PASS)
}

pub fn oracles(common: &CommonArgs, full: bool, corrupt_greens: bool) -> Result<ExitCode> {
    let cfg = OracleConfig {
        quick: !full,
        corrupt_green: corrupt_greens,
        seed: common.seed.unwrap_or(12),
    };
    let checks = oracles::run_oracles(&cfg)?;
    print!("{}", oracles::format_matrix(&checks));
    if checks.iter().all(|c| c.pass) {
        println!("oracles: all {} checks PASS", checks.len());
        Ok(PASS)
    } else {
        let failed: Vec<&str> =
            checks.iter().filter(|c| !c.pass).map(|c| c.name.as_str()).collect();
        println!("oracles: FAILED {}", failed.join(", "));
        Ok(science_fail())
    }
}
