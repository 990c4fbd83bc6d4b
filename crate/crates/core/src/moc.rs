//! Moduli of continuity and sampled `C^mu` norm estimation.
//!
//! Seminorms are estimated as the maximum of `|f(x)-f(y)| / mu(|x-y|)` over a
//! stratified pair sample, so every reported value is a lower bound of the
//! true seminorm. Stratification covers log-decades of pair separation and of
//! distance to the origin, which is where the near-singularity statistics
//! live.

use crate::biot::BiotSavart;
use crate::error::Error;
use crate::field::ScalarField;
use crate::par;
use crate::util::Vec2;
use crate::vortex::RadialVortexProfile;
use crate::Result;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Domain cap `c = e^{-1}` shared by all moduli: values are defined for
/// separations in `(0, c)`.
pub const DOMAIN_CAP: f64 = crate::vortex::OUTER_CUTOFF;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModulusKind {
    /// `(log 1/r)^{-alpha}`, `alpha` in (0,1).
    PhiAlpha { alpha: f64 },
    /// `r (log 1/r)^{1-alpha}`, `alpha` in (0,1).
    PsiAlpha { alpha: f64 },
    /// `(log 1/r)^{-beta}`, `beta` > 1.
    PhiBeta { beta: f64 },
    /// `r log(1/r)`.
    LogLipschitz,
    /// `r loglog(1/r)`.
    LogLogLipschitz,
    /// `r^a`, `a` in (0,1].
    Holder { exponent: f64 },
}

impl ModulusKind {
    pub fn validate(&self) -> Result<()> {
        match *self {
            ModulusKind::PhiAlpha { alpha } | ModulusKind::PsiAlpha { alpha } => {
                if !(alpha > 0.0 && alpha < 1.0) {
                    return Err(Error::invalid(format!("alpha {alpha} must lie in (0,1)")));
                }
            }
            ModulusKind::PhiBeta { beta } => {
                if !(beta > 1.0) {
                    return Err(Error::invalid(format!("beta {beta} must exceed 1")));
                }
            }
            ModulusKind::Holder { exponent } => {
                if !(exponent > 0.0 && exponent <= 1.0) {
                    return Err(Error::invalid(format!("Holder exponent {exponent} must lie in (0,1]")));
                }
            }
            _ => {}
        }
        Ok(())
    }

    /// Modulus value; separations must lie in `(0, c)`.
    pub fn value(&self, r: f64) -> Result<f64> {
        if !(r > 0.0 && r < DOMAIN_CAP) {
            return Err(Error::domain(format!(
                "modulus evaluated at separation {r} outside (0, {DOMAIN_CAP})"
            )));
        }
        Ok(self.value_raw(r))
    }

    /// Unchecked modulus value for hot loops; caller guarantees the domain.
    #[inline]
    pub fn value_raw(&self, r: f64) -> f64 {
        let l = (1.0 / r).ln();
        match *self {
            ModulusKind::PhiAlpha { alpha } => l.powf(-alpha),
            ModulusKind::PsiAlpha { alpha } => r * l.powf(1.0 - alpha),
            ModulusKind::PhiBeta { beta } => l.powf(-beta),
            ModulusKind::LogLipschitz => r * l,
            ModulusKind::LogLogLipschitz => r * l.ln(),
            ModulusKind::Holder { exponent } => r.powf(exponent),
        }
    }

    pub fn label(&self) -> String {
        match *self {
            ModulusKind::PhiAlpha { .. } => "phi_alpha".into(),
            ModulusKind::PsiAlpha { .. } => "psi_alpha".into(),
            ModulusKind::PhiBeta { .. } => "phi_beta".into(),
            ModulusKind::LogLipschitz => "log_lipschitz".into(),
            ModulusKind::LogLogLipschitz => "loglog_lipschitz".into(),
            ModulusKind::Holder { .. } => "holder".into(),
        }
    }

    pub fn parameter(&self) -> f64 {
        match *self {
            ModulusKind::PhiAlpha { alpha } | ModulusKind::PsiAlpha { alpha } => alpha,
            ModulusKind::PhiBeta { beta } => beta,
            ModulusKind::Holder { exponent } => exponent,
            _ => 0.0,
        }
    }
}

/// One sampled point pair with `0 < |a-b| < c`.
#[derive(Debug, Clone, Copy)]
pub struct Pair {
    pub a: Vec2,
    pub b: Vec2,
}

impl Pair {
    pub fn separation(&self) -> f64 {
        (self.a - self.b).norm()
    }
}

#[derive(Debug, Clone)]
pub struct PairSampleConfig {
    pub min_separation: f64,
    pub max_separation: f64,
    pub min_origin_distance: f64,
    pub max_origin_distance: f64,
    /// Pairs drawn per (separation-decade, distance-decade) bin.
    pub pairs_per_bin: usize,
    pub seed: u64,
}

impl Default for PairSampleConfig {
    fn default() -> Self {
        PairSampleConfig {
            min_separation: 1e-10,
            max_separation: DOMAIN_CAP,
            min_origin_distance: 1e-9,
            max_origin_distance: 40.0,
            pairs_per_bin: 25,
            seed: 1,
        }
    }
}

/// Stratified pair sample with per-bin metadata.
#[derive(Debug, Clone)]
pub struct PairSample {
    pairs: Vec<Pair>,
    bin_counts: Vec<((usize, usize), usize)>,
    sep_decades: usize,
    dist_decades: usize,
}

fn decades(lo: f64, hi: f64) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    let mut a = lo;
    while a < hi {
        let b = (a * 10.0).min(hi);
        out.push((a, b));
        a = b;
    }
    out
}

impl PairSample {
    pub fn generate(cfg: &PairSampleConfig) -> Result<Self> {
        if !(cfg.min_separation > 0.0 && cfg.max_separation <= DOMAIN_CAP) {
            return Err(Error::invalid("pair separations must lie in (0, e^-1]"));
        }
        let sep_bins = decades(cfg.min_separation, cfg.max_separation * 0.999_999);
        let dist_bins = decades(cfg.min_origin_distance, cfg.max_origin_distance);
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut pairs = Vec::new();
        let mut bin_counts = Vec::new();

        for (si, &(s_lo, s_hi)) in sep_bins.iter().enumerate() {
            for (di, &(d_lo, d_hi)) in dist_bins.iter().enumerate() {
                let mut got = 0;
                let mut attempts = 0;
                while got < cfg.pairs_per_bin && attempts < 200 * cfg.pairs_per_bin {
                    attempts += 1;
                    let rho = loguniform(&mut rng, d_lo, d_hi);
                    let th = rng.gen_range(0.0..std::f64::consts::TAU);
                    let a = Vec2::new(rho * th.cos(), rho * th.sin());
                    let s = loguniform(&mut rng, s_lo, s_hi);
                    let phi = rng.gen_range(0.0..std::f64::consts::TAU);
                    let b = a + Vec2::new(s * phi.cos(), s * phi.sin());
                    let sep = (a - b).norm();
                    if !(sep > 0.0 && sep < cfg.max_separation) {
                        continue;
                    }
                    let dmin = a.norm().min(b.norm());
                    if dmin < d_lo || dmin >= d_hi * (1.0 + 1e-12) {
                        continue;
                    }
                    if b.norm() > cfg.max_origin_distance + cfg.max_separation {
                        continue;
                    }
                    pairs.push(Pair { a, b });
                    got += 1;
                }
                bin_counts.push(((si, di), got));
            }
        }
        let sample = PairSample {
            pairs,
            bin_counts,
            sep_decades: sep_bins.len(),
            dist_decades: dist_bins.len(),
        };
        for si in 0..sample.sep_decades {
            if sample.marginal_sep_count(si) == 0 {
                return Err(Error::Construction(format!(
                    "separation decade {si} received no pairs"
                )));
            }
        }
        Ok(sample)
    }

    /// Build from an explicit pair list (e.g. exhaustive small samples).
    pub fn from_pairs(pairs: Vec<Pair>) -> Result<Self> {
        for p in &pairs {
            let s = p.separation();
            if !(s > 0.0 && s < DOMAIN_CAP) {
                return Err(Error::invalid(format!("pair separation {s} outside (0, c)")));
            }
        }
        Ok(PairSample { pairs, bin_counts: Vec::new(), sep_decades: 0, dist_decades: 0 })
    }

    pub fn pairs(&self) -> &[Pair] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn min_separation(&self) -> f64 {
        self.pairs.iter().map(|p| p.separation()).fold(f64::INFINITY, f64::min)
    }

    pub fn marginal_sep_count(&self, si: usize) -> usize {
        self.bin_counts.iter().filter(|((s, _), _)| *s == si).map(|(_, c)| c).sum()
    }

    pub fn marginal_dist_count(&self, di: usize) -> usize {
        self.bin_counts.iter().filter(|((_, d), _)| *d == di).map(|(_, c)| c).sum()
    }

    pub fn dist_decade_count(&self) -> usize {
        self.dist_decades
    }
}

fn loguniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    if hi <= lo {
        return lo;
    }
    (rng.gen_range(lo.ln()..hi.ln())).exp()
}

/// Sampled seminorm `max |f(a)-f(b)| / mu(|a-b|)`; a lower bound of the truth.
pub fn moc_seminorm<F>(f: F, pairs: &PairSample, kind: ModulusKind) -> Result<f64>
where
    F: Fn(Vec2) -> f64 + Sync,
{
    kind.validate()?;
    if pairs.is_empty() {
        return Err(Error::invalid("empty pair sample"));
    }
    let ps = pairs.pairs();
    Ok(par::max_indexed(ps.len(), |i| {
        let p = ps[i];
        (f(p.a) - f(p.b)).abs() / kind.value_raw(p.separation())
    }))
}

/// Vector-valued version of [`moc_seminorm`].
pub fn moc_seminorm_vec<F>(f: F, pairs: &PairSample, kind: ModulusKind) -> Result<f64>
where
    F: Fn(Vec2) -> Vec2 + Sync,
{
    kind.validate()?;
    if pairs.is_empty() {
        return Err(Error::invalid("empty pair sample"));
    }
    let ps = pairs.pairs();
    Ok(par::max_indexed(ps.len(), |i| {
        let p = ps[i];
        (f(p.a) - f(p.b)).norm() / kind.value_raw(p.separation())
    }))
}

/// Sampled sup norm over the pair endpoints.
pub fn sup_norm<F>(f: F, pairs: &PairSample) -> f64
where
    F: Fn(Vec2) -> f64 + Sync,
{
    let ps = pairs.pairs();
    par::max_indexed(ps.len(), |i| f(ps[i].a).abs().max(f(ps[i].b).abs()))
}

pub fn sup_norm_vec<F>(f: F, pairs: &PairSample) -> f64
where
    F: Fn(Vec2) -> Vec2 + Sync,
{
    let ps = pairs.pairs();
    par::max_indexed(ps.len(), |i| f(ps[i].a).norm().max(f(ps[i].b).norm()))
}

/// `sup|f| + seminorm`, both estimated on the same sample.
pub fn moc_norm<F>(f: F, pairs: &PairSample, kind: ModulusKind) -> Result<f64>
where
    F: Fn(Vec2) -> f64 + Sync,
{
    Ok(sup_norm(&f, pairs) + moc_seminorm(&f, pairs, kind)?)
}

pub fn moc_norm_vec<F>(f: F, pairs: &PairSample, kind: ModulusKind) -> Result<f64>
where
    F: Fn(Vec2) -> Vec2 + Sync,
{
    Ok(sup_norm_vec(&f, pairs) + moc_seminorm_vec(&f, pairs, kind)?)
}

/// Ratio `||v . grad w_s||_{C^{phi_alpha}} / ||v||_{C^{psi_alpha}}` for a
/// velocity sampler vanishing at the origin.
pub fn forcing_ratio<F>(
    v: F,
    profile: &RadialVortexProfile,
    pairs: &PairSample,
    alpha: f64,
) -> Result<f64>
where
    F: Fn(Vec2) -> Vec2 + Sync,
{
    let v0 = v(Vec2::ZERO).norm();
    if v0 > 1e-10 {
        return Err(Error::invalid(format!(
            "forcing_ratio requires v(0) = 0, got |v(0)| = {v0:.3e}"
        )));
    }
    let phi = ModulusKind::PhiAlpha { alpha };
    let psi = ModulusKind::PsiAlpha { alpha };
    let forcing = |x: Vec2| {
        if x.norm() == 0.0 || x.norm() >= crate::vortex::OUTER_CUTOFF {
            0.0
        } else {
            v(x).dot(profile.ws_gradient(x).expect("nonzero radius"))
        }
    };
    let num = moc_norm(forcing, pairs, phi)?;
    let den = moc_norm_vec(&v, pairs, psi)?;
    if den == 0.0 {
        return Err(Error::Degenerate("zero C^{psi_alpha} norm of v".into()));
    }
    Ok(num / den)
}

/// Ratio `||grad^perp Delta^{-1} w||_{C^{psi_alpha}} / ||w||_{C^{phi_alpha}}`.
pub fn vel_from_vor_ratio(
    w: &ScalarField,
    bs: &BiotSavart,
    pairs: &PairSample,
    alpha: f64,
) -> Result<f64> {
    let u = bs.solve_fft(w)?;
    let den = moc_norm(|p| w.sample_clamped(p), pairs, ModulusKind::PhiAlpha { alpha })?;
    if den == 0.0 {
        return Err(Error::Degenerate("zero C^{phi_alpha} norm of w".into()));
    }
    let num = moc_norm_vec(|p| u.sample_clamped(p), pairs, ModulusKind::PsiAlpha { alpha })?;
    Ok(num / den)
}

/// Rows of the forcing-magnitude table that have a quantitative prediction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Table1Row {
    /// Bounded perturbation: forcing magnitude ~ 1.
    Bounded,
    /// Holder perturbation: forcing magnitude ~ (log 1/|x|)^{-1}.
    Holder,
    /// `phi_alpha` perturbation: forcing magnitude ~ (log 1/|x|)^{-alpha}.
    PhiAlpha,
}

impl Table1Row {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "i" | "bounded" => Ok(Table1Row::Bounded),
            "ii" | "holder" => Ok(Table1Row::Holder),
            "iii" | "phi_alpha" => Ok(Table1Row::PhiAlpha),
            other => Err(Error::invalid(format!(
                "unsupported forcing-magnitude row '{other}' (expected i, ii, or iii)"
            ))),
        }
    }
}

/// `|u_g(x) . grad w_s(x)|` normalized by the row's predicted magnitude.
pub fn table1_magnitude(
    row: Table1Row,
    x: Vec2,
    g: &ScalarField,
    bs: &BiotSavart,
    profile: &RadialVortexProfile,
    alpha: f64,
) -> Result<f64> {
    let rho = x.norm();
    if !(rho > 0.0 && rho < crate::vortex::INNER_CUTOFF) {
        return Err(Error::domain(format!(
            "probe radius {rho} must lie in (0, e^-2)"
        )));
    }
    let ug = bs.direct_velocity_at(g, x);
    let grad = profile.ws_gradient(x)?;
    let raw = ug.dot(grad).abs();
    let l = (1.0 / rho).ln();
    let predicted = match row {
        Table1Row::Bounded => 1.0,
        Table1Row::Holder => 1.0 / l,
        Table1Row::PhiAlpha => l.powf(-alpha),
    };
    Ok(raw / predicted)
}
