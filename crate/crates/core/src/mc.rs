//! Monte Carlo simulation of the group Brownian motion
//! `g_t = (B_t, ½∫ω(B, dB))` and estimators for heat-kernel functionals.
//!
//! Each coordinate of `B` is a complex Brownian motion with
//! `E|B_t|² = t`. The center integral uses the left-point rule
//! `M ← M + ω(B_k, ΔB_k)`; since `ω(ΔB, ΔB) = 0` this coincides pathwise
//! with the midpoint rule on the same grid.
//!
//! Every stream owns a ChaCha8 generator seeded with `seed` and switched
//! to stream number `stream_id`, so results depend only on
//! `(seed, streams, steps, samples)`. Per-sample values are concatenated in
//! ascending stream order before any reduction.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calculus::{lie_derive, taylor_tensor};
use crate::error::{Error, Result};
use crate::fock::fock_norm_sq;
use crate::poly::HoloPoly;
use crate::structure::{GroupElement, HeisenbergStructure, LieVector, C64};

/// Two-sided 99% normal quantile.
pub const Z99: f64 = 2.576;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    pub t: f64,
    pub steps: usize,
    pub samples: usize,
    pub seed: u64,
    pub streams: usize,
}

impl McConfig {
    pub fn new(t: f64, steps: usize, samples: usize, seed: u64, streams: usize) -> Result<Self> {
        let cfg = Self { t, steps, samples, seed, streams };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.t <= 0.0 || !self.t.is_finite() {
            return Err(Error::InvalidArgument(format!("t must be positive, got {}", self.t)));
        }
        if self.steps < 1 {
            return Err(Error::InvalidArgument("steps must be at least 1".into()));
        }
        if self.samples < 2 {
            return Err(Error::InvalidArgument("samples must be at least 2".into()));
        }
        if self.streams < 1 {
            return Err(Error::InvalidArgument("streams must be at least 1".into()));
        }
        if !self.samples.is_multiple_of(self.streams) {
            return Err(Error::InvalidArgument(format!(
                "samples ({}) must be divisible by streams ({})",
                self.samples, self.streams
            )));
        }
        Ok(())
    }

    pub fn with_t(self, t: f64) -> Self {
        Self { t, ..self }
    }

    pub fn with_steps(self, steps: usize) -> Self {
        Self { steps, ..self }
    }

    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }
}

/// A sample mean with its plain standard error and a 99% interval.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateWithCI<T> {
    pub mean: T,
    pub std_error: f64,
    pub samples: usize,
}

impl<T> EstimateWithCI<T> {
    pub fn ci_half_width(&self) -> f64 {
        Z99 * self.std_error
    }
}

impl EstimateWithCI<f64> {
    fn from_values(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        Self { mean, std_error: (var / n).sqrt(), samples: values.len() }
    }

    /// `|mean − exact| / std_error`; zero when both sides agree exactly.
    pub fn z_score(&self, exact: f64) -> f64 {
        z_ratio((self.mean - exact).abs(), self.std_error)
    }
}

impl EstimateWithCI<C64> {
    fn from_values(re: &[f64], im: &[f64]) -> Self {
        let n = re.len() as f64;
        let mean = C64::new(re.iter().sum::<f64>() / n, im.iter().sum::<f64>() / n);
        let var = re
            .iter()
            .zip(im)
            .map(|(a, b)| (C64::new(*a, *b) - mean).norm_sqr())
            .sum::<f64>()
            / (n - 1.0);
        Self { mean, std_error: (var / n).sqrt(), samples: re.len() }
    }

    pub fn z_score(&self, exact: C64) -> f64 {
        z_ratio((self.mean - exact).norm(), self.std_error)
    }
}

fn z_ratio(diff: f64, se: f64) -> f64 {
    if diff == 0.0 {
        0.0
    } else if se == 0.0 {
        f64::INFINITY
    } else {
        diff / se
    }
}

fn stream_rng(seed: u64, stream_id: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_id as u64);
    rng
}

fn complex_normal<R: Rng>(rng: &mut R, sd: f64) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re * sd, im * sd)
}

/// Simulates one path into `g` using the caller's generator.
fn simulate_into<R: Rng>(s: &HeisenbergStructure, cfg: &McConfig, rng: &mut R, g: &mut GroupElement, db: &mut [C64]) {
    let dt = cfg.t / cfg.steps as f64;
    let sd = (dt / 2.0).sqrt();
    g.w.iter_mut().for_each(|z| *z = C64::new(0.0, 0.0));
    g.c.iter_mut().for_each(|z| *z = C64::new(0.0, 0.0));
    for _ in 0..cfg.steps {
        for z in db.iter_mut() {
            *z = complex_normal(rng, sd);
        }
        s.omega_add_into(&g.w, db, C64::new(0.5, 0.0), &mut g.c);
        for (b, d) in g.w.iter_mut().zip(db.iter()) {
            *b += d;
        }
    }
}

/// One endpoint `(B_t, ½M_t)` drawn from stream `stream_id`.
pub fn sample_endpoint(s: &HeisenbergStructure, cfg: &McConfig, stream_id: usize) -> Result<GroupElement> {
    cfg.validate()?;
    let mut rng = stream_rng(cfg.seed, stream_id);
    let mut g = s.identity();
    let mut db = vec![C64::new(0.0, 0.0); s.n()];
    simulate_into(s, cfg, &mut rng, &mut g, &mut db);
    Ok(g)
}

/// Simulates `cfg.samples` endpoints and records `width` real values per
/// endpoint through `record`. Returns one column per value, in sample order.
pub fn sample_functionals<F>(s: &HeisenbergStructure, cfg: &McConfig, width: usize, record: F) -> Result<Vec<Vec<f64>>>
where
    F: Fn(&GroupElement, &mut [f64]) + Sync,
{
    cfg.validate()?;
    let per_stream = cfg.samples / cfg.streams;
    let blocks: Vec<Vec<f64>> = (0..cfg.streams)
        .into_par_iter()
        .map(|sid| {
            let mut rng = stream_rng(cfg.seed, sid);
            let mut g = s.identity();
            let mut db = vec![C64::new(0.0, 0.0); s.n()];
            let mut out = vec![0.0; per_stream * width];
            for row in out.chunks_mut(width.max(1)) {
                simulate_into(s, cfg, &mut rng, &mut g, &mut db);
                record(&g, row);
            }
            out
        })
        .collect();
    let mut cols = vec![Vec::with_capacity(cfg.samples); width];
    for block in &blocks {
        for row in block.chunks(width.max(1)) {
            for (col, v) in cols.iter_mut().zip(row) {
                col.push(*v);
            }
        }
    }
    Ok(cols)
}

fn check_polys(s: &HeisenbergStructure, polys: &[HoloPoly]) -> Result<()> {
    for f in polys {
        let fs = f.structure();
        if fs.n() != s.n() || fs.center_dim() != s.center_dim() || fs.omega_raw() != s.omega_raw() {
            return Err(Error::DimensionMismatch(format!(
                "polynomial lives on '{}', sampling on '{}'",
                fs.label(),
                s.label()
            )));
        }
    }
    Ok(())
}

/// `E|f(g_t)|²` for several polynomials, all evaluated on the same paths.
pub fn estimate_sq_norms(polys: &[HoloPoly], cfg: &McConfig) -> Result<Vec<EstimateWithCI<f64>>> {
    let Some(first) = polys.first() else {
        return Ok(Vec::new());
    };
    let s = first.structure().clone();
    check_polys(&s, polys)?;
    let cols = sample_functionals(&s, cfg, polys.len(), |g, row| {
        let x = g.coords();
        for (v, f) in row.iter_mut().zip(polys) {
            *v = f.evaluate_coords(&x).norm_sqr();
        }
    })?;
    Ok(cols.iter().map(|c| EstimateWithCI::<f64>::from_values(c)).collect())
}

pub fn estimate_sq_norm(f: &HoloPoly, cfg: &McConfig) -> Result<EstimateWithCI<f64>> {
    Ok(estimate_sq_norms(std::slice::from_ref(f), cfg)?.remove(0))
}

/// `E f(g_t)` for several polynomials on shared paths.
pub fn estimate_means(polys: &[HoloPoly], cfg: &McConfig) -> Result<Vec<EstimateWithCI<C64>>> {
    let Some(first) = polys.first() else {
        return Ok(Vec::new());
    };
    let s = first.structure().clone();
    check_polys(&s, polys)?;
    let cols = sample_functionals(&s, cfg, 2 * polys.len(), |g, row| {
        let x = g.coords();
        for (pair, f) in row.chunks_mut(2).zip(polys) {
            let z = f.evaluate_coords(&x);
            pair[0] = z.re;
            pair[1] = z.im;
        }
    })?;
    Ok(cols.chunks(2).map(|p| EstimateWithCI::<C64>::from_values(&p[0], &p[1])).collect())
}

pub fn estimate_mean(f: &HoloPoly, cfg: &McConfig) -> Result<EstimateWithCI<C64>> {
    Ok(estimate_means(std::slice::from_ref(f), cfg)?.remove(0))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GeneratorReport {
    pub t_small: f64,
    /// Monte Carlo estimate of `(E|f(g_t)|² − |f(e)|²)/t`.
    pub slope: EstimateWithCI<f64>,
    /// `Σⱼ |η̃ⱼ f(e)|²` over horizontal directions.
    pub symbolic: f64,
    /// `slope / symbolic`, absent when the symbolic side vanishes.
    pub ratio: Option<f64>,
    pub ratio_ci_half_width: Option<f64>,
    pub z_score: f64,
}

/// Compares the short-time growth of `E|f(g_t)|²` with the symbolic
/// generator value `Σⱼ |η̃ⱼ f(e)|²`.
pub fn short_time_generator_check(f: &HoloPoly, t_small: f64, cfg: &McConfig) -> Result<GeneratorReport> {
    let cfg = cfg.with_t(t_small);
    cfg.validate()?;
    let s = f.structure().clone();
    let e = s.identity();
    let f0 = f.evaluate(&e)?.norm_sqr();
    let mut symbolic = 0.0;
    for j in 0..s.n() {
        let d = lie_derive(f, &LieVector::basis(s.n(), s.center_dim(), j))?;
        symbolic += d.evaluate(&e)?.norm_sqr();
    }
    let cols = sample_functionals(&s, &cfg, 1, |g, row| {
        row[0] = (f.evaluate_coords(&g.coords()).norm_sqr() - f0) / t_small;
    })?;
    let slope = EstimateWithCI::<f64>::from_values(&cols[0]);
    let (ratio, ratio_ci) = if symbolic > 0.0 {
        (Some(slope.mean / symbolic), Some(slope.ci_half_width() / symbolic))
    } else {
        (None, None)
    };
    Ok(GeneratorReport {
        t_small,
        z_score: slope.z_score(symbolic),
        slope,
        symbolic,
        ratio,
        ratio_ci_half_width: ratio_ci,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FerniqueRow {
    pub epsilon: f64,
    pub mean: f64,
    pub std_error: f64,
    /// Share of the sample sum carried by the largest 1% of samples.
    pub top_share: f64,
    pub heavy_tail: bool,
}

/// Empirical `E exp(ε‖g_t‖²/t)` per `ε`, with `‖·‖` the homogeneous norm.
pub fn fernique_diagnostic(s: &HeisenbergStructure, cfg: &McConfig, epsilons: &[f64]) -> Result<Vec<FerniqueRow>> {
    if let Some(bad) = epsilons.iter().find(|e| **e < 0.0 || !e.is_finite()) {
        return Err(Error::InvalidArgument(format!("epsilon must be nonnegative, got {bad}")));
    }
    let t = cfg.t;
    let cols = sample_functionals(s, cfg, 1, |g, row| {
        let w2: f64 = g.w.iter().map(|z| z.norm_sqr()).sum();
        let c: f64 = g.c.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        row[0] = (w2 + c) / t;
    })?;
    let x = &cols[0];
    let top = x.len().div_ceil(100);
    Ok(epsilons
        .iter()
        .map(|&eps| {
            let values: Vec<f64> = x.iter().map(|v| (eps * v).exp()).collect();
            let est = EstimateWithCI::<f64>::from_values(&values);
            let total: f64 = values.iter().sum();
            let mut sorted = values.clone();
            sorted.sort_by(|a, b| b.total_cmp(a));
            let top_sum: f64 = sorted[..top].iter().sum();
            let top_share = if total.is_finite() { top_sum / total } else { 1.0 };
            FerniqueRow {
                epsilon: eps,
                mean: est.mean,
                std_error: est.std_error,
                top_share,
                heavy_tail: !total.is_finite() || top_share > 0.5,
            }
        })
        .collect())
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct IsometryReport {
    pub exact: f64,
    pub mc: EstimateWithCI<f64>,
    pub z_score: f64,
    pub halved: EstimateWithCI<f64>,
    /// `|mc(steps) − mc(2·steps)|` in units of the combined standard error.
    pub halving_z: f64,
}

/// Exact Fock norm of the Taylor tensor against the Monte Carlo `L²` norm,
/// plus a rerun with twice the steps to expose discretization bias.
pub fn isometry_reports(polys: &[HoloPoly], t: f64, cfg: &McConfig) -> Result<Vec<IsometryReport>> {
    let cfg = cfg.with_t(t);
    let exact: Vec<f64> = polys
        .iter()
        .map(|f| fock_norm_sq(&taylor_tensor(f, f.weighted_degree())?, t))
        .collect::<Result<_>>()?;
    let coarse = estimate_sq_norms(polys, &cfg)?;
    let fine = estimate_sq_norms(polys, &cfg.with_steps(2 * cfg.steps))?;
    Ok(exact
        .into_iter()
        .zip(coarse.into_iter().zip(fine))
        .map(|(exact, (mc, halved))| IsometryReport {
            exact,
            z_score: mc.z_score(exact),
            halving_z: z_ratio((mc.mean - halved.mean).abs(), mc.std_error.hypot(halved.std_error)),
            mc,
            halved,
        })
        .collect())
}

pub fn isometry_report(f: &HoloPoly, t: f64, cfg: &McConfig) -> Result<IsometryReport> {
    Ok(isometry_reports(std::slice::from_ref(f), t, cfg)?.remove(0))
}

/// One output row of a Monte Carlo experiment.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct McRow {
    pub experiment: String,
    pub structure: String,
    pub f: String,
    pub t: f64,
    pub steps: usize,
    pub samples: usize,
    pub seed: u64,
    pub exact: f64,
    pub mc_mean: f64,
    pub std_error: f64,
    pub z_score: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Arc;

    fn cfg(t: f64, steps: usize, samples: usize) -> McConfig {
        McConfig::new(t, steps, samples, 2024, 4).unwrap()
    }

    #[test]
    fn config_validation() {
        assert!(McConfig::new(1.0, 1, 10, 0, 3).is_err());
        assert!(McConfig::new(0.0, 1, 10, 0, 1).is_err());
        assert!(McConfig::new(1.0, 0, 10, 0, 1).is_err());
        assert!(McConfig::new(1.0, 1, 1, 0, 1).is_err());
        assert!(McConfig::new(1.0, 1, 10, 0, 0).is_err());
        assert!(McConfig::new(1.0, 1, 10, 0, 5).is_ok());
    }

    #[test]
    fn tiny_time_endpoint_is_near_identity() {
        let s = HeisenbergStructure::standard_heisenberg(1);
        let g = sample_endpoint(&s, &cfg(1e-6, 10, 4), 0).unwrap();
        assert!(s.homogeneous_norm(&g).unwrap() < 1e-2);
    }

    #[test]
    fn coordinate_moments() {
        let s = HeisenbergStructure::standard_heisenberg(1);
        let c = cfg(1.0, 4, 100_000);
        let cols = sample_functionals(&s, &c, 3, |g, row| {
            row[0] = g.w[0].re;
            row[1] = g.w[0].im;
            row[2] = g.w[0].norm_sqr();
        })
        .unwrap();
        let m = EstimateWithCI::<C64>::from_values(&cols[0], &cols[1]);
        assert!(m.z_score(C64::new(0.0, 0.0)) <= 3.0);
        let v = EstimateWithCI::<f64>::from_values(&cols[2]);
        assert!(v.z_score(1.0) <= 3.0);
    }

    #[test]
    fn constant_is_exact() {
        let s = Arc::new(HeisenbergStructure::standard_heisenberg(1));
        let one = HoloPoly::constant(s, C64::new(1.0, 0.0));
        let c = cfg(1.0, 8, 1000);
        let e = estimate_sq_norm(&one, &c).unwrap();
        assert_eq!((e.mean, e.std_error), (1.0, 0.0));
        let m = estimate_mean(&one, &c).unwrap();
        assert_eq!(m.mean, C64::new(1.0, 0.0));
        let r = isometry_report(&one, 1.0, &c).unwrap();
        assert_eq!((r.exact, r.mc.mean, r.z_score), (1.0, 1.0, 0.0));
    }

    #[test]
    fn determinism_and_stream_dependence() {
        let s = Arc::new(HeisenbergStructure::standard_heisenberg(1));
        let f = HoloPoly::parse(s, "c1 + w1^2").unwrap();
        let c = cfg(1.0, 16, 2000);
        assert_eq!(estimate_sq_norm(&f, &c).unwrap(), estimate_sq_norm(&f, &c).unwrap());
        let other = McConfig { streams: 8, ..c };
        assert_ne!(estimate_sq_norm(&f, &c).unwrap().mean, estimate_sq_norm(&f, &other).unwrap().mean);
    }

    #[test]
    fn abelian_linear_norm() {
        let s = Arc::new(HeisenbergStructure::abelian(1));
        let f = HoloPoly::parse(s, "w1").unwrap();
        let e = estimate_sq_norm(&f, &cfg(1.0, 1, 100_000)).unwrap();
        assert!(e.z_score(1.0) <= 3.0);
    }

    #[test]
    fn martingale_examples() {
        let s = Arc::new(HeisenbergStructure::standard_heisenberg(1));
        let polys = vec![
            HoloPoly::parse(s.clone(), "c1").unwrap(),
            HoloPoly::parse(s, "w1^2 + c1").unwrap(),
        ];
        for m in estimate_means(&polys, &cfg(1.0, 64, 40_000)).unwrap() {
            assert!(m.z_score(C64::new(0.0, 0.0)) <= 3.0);
        }
    }

    #[test]
    fn generator_examples() {
        let ab = Arc::new(HeisenbergStructure::abelian(1));
        let w = HoloPoly::parse(ab.clone(), "w1").unwrap();
        let r = short_time_generator_check(&w, 0.01, &cfg(1.0, 1, 100_000)).unwrap();
        assert!((r.ratio.unwrap() - 1.0).abs() <= 3.0 * r.slope.std_error / r.symbolic);
        let k = HoloPoly::parse(ab, "3 - 2i").unwrap();
        let r = short_time_generator_check(&k, 0.01, &cfg(1.0, 1, 100)).unwrap();
        assert_eq!((r.slope.mean, r.symbolic), (0.0, 0.0));
        let h = Arc::new(HeisenbergStructure::standard_heisenberg(1));
        let c = HoloPoly::parse(h, "c1").unwrap();
        let r = short_time_generator_check(&c, 1e-3, &cfg(1.0, 16, 20_000)).unwrap();
        assert_eq!(r.symbolic, 0.0);
        assert!(r.slope.mean < 1e-3);
    }

    #[test]
    fn fernique_examples() {
        let s = HeisenbergStructure::abelian(1);
        let rows = fernique_diagnostic(&s, &cfg(1.0, 1, 100_000), &[0.0, 0.05, 10.0]).unwrap();
        assert_eq!(rows[0].mean, 1.0);
        assert!(!rows[0].heavy_tail);
        assert!((rows[1].mean - 1.0 / 0.95).abs() < 0.05 / 0.95);
        assert!(!rows[1].heavy_tail);
        assert!(rows[2].heavy_tail);
        assert!(fernique_diagnostic(&s, &cfg(1.0, 1, 100), &[-1.0]).is_err());
    }
}
