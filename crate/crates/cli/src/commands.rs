use std::io::Write;

use anyhow::{Context, Result};
use serde::Serialize;
use subtaylor::calculus::{cylinder_taylor_tensor, projection_coefficient_distances};
use subtaylor::fock::{fejer_truncate, fejer_truncate_quadrature, fock_norm_sq, j0_residual, restrict_basis_norm_sq};
use subtaylor::geometry::{distance_optimize, distance_upper, BracketReport, OptimizeOptions, DEFAULT_GRID};
use subtaylor::mc::{estimate_means, estimate_sq_norms, fernique_diagnostic, isometry_reports, FerniqueRow, McRow};
use subtaylor::{taylor_tensor, GroupElement, HeisenbergStructure, HoloPoly, C64};

use crate::config::{Format, Resolved, StructureSpec};

/// Outcome of a subcommand, mapped onto the process exit code.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Status {
    Ok = 0,
    Statistical = 2,
    Invariant = 3,
}

pub fn emit<T: Serialize>(run: &Resolved, rows: &[T]) -> Result<()> {
    let mut bytes = Vec::new();
    match run.format {
        Format::Csv => {
            let mut w = csv::Writer::from_writer(&mut bytes);
            for r in rows {
                w.serialize(r)?;
            }
            w.flush()?;
        }
        Format::Json => {
            serde_json::to_writer_pretty(&mut bytes, rows)?;
            bytes.push(b'\n');
        }
    }
    match &run.out {
        Some(path) => std::fs::write(path, &bytes).with_context(|| format!("writing {}", path.display()))?,
        None => std::io::stdout().write_all(&bytes)?,
    }
    Ok(())
}

fn mc_row(experiment: &str, s: &HeisenbergStructure, f: &HoloPoly, t: f64, steps: usize, samples: usize, seed: u64) -> McRow {
    McRow {
        experiment: experiment.into(),
        structure: s.label().into(),
        f: f.to_literal(),
        t,
        steps,
        samples,
        seed,
        exact: 0.0,
        mc_mean: 0.0,
        std_error: 0.0,
        z_score: 0.0,
    }
}

const ABELIAN_SUITE: [&str; 6] = ["1", "w1", "w1^2", "w1^3", "w1^4", "w1^5"];

pub fn isometry(run: &Resolved) -> Result<Status> {
    run.check_experiment("isometry")?;
    let s = run.structure_or(StructureSpec::Abelian { n: 1 })?;
    let polys = run.polynomials(&s, &ABELIAN_SUITE)?;
    let default_steps = if s.center_dim() == 0 { 1 } else { 256 };
    let threshold = run.threshold();
    let mut rows = Vec::new();
    let mut failing = Vec::new();
    for t in run.times(&[1.0]) {
        let cfg = run.mc(t, default_steps, 200_000)?;
        for (f, r) in polys.iter().zip(isometry_reports(&polys, t, &cfg)?) {
            let mut row = mc_row("isometry", &s, f, t, cfg.steps, cfg.samples, cfg.seed);
            row.exact = r.exact;
            row.mc_mean = r.mc.mean;
            row.std_error = r.mc.std_error;
            row.z_score = r.z_score;
            if r.z_score > threshold {
                failing.push((f.clone(), t, cfg));
            }
            rows.push(row);
            let mut halved = mc_row("isometry-halved", &s, f, t, 2 * cfg.steps, cfg.samples, cfg.seed);
            halved.exact = r.exact;
            halved.mc_mean = r.halved.mean;
            halved.std_error = r.halved.std_error;
            halved.z_score = r.halved.z_score(r.exact);
            rows.push(halved);
        }
    }
    let mut status = Status::Ok;
    match failing.len() {
        0 => {}
        1 => {
            let (f, t, cfg) = &failing[0];
            let cfg = cfg.with_seed(cfg.seed.wrapping_add(1));
            let r = &isometry_reports(std::slice::from_ref(f), *t, &cfg)?[0];
            let mut row = mc_row("isometry-rerun", &s, f, *t, cfg.steps, cfg.samples, cfg.seed);
            row.exact = r.exact;
            row.mc_mean = r.mc.mean;
            row.std_error = r.mc.std_error;
            row.z_score = r.z_score;
            rows.push(row);
            if r.z_score > threshold {
                status = Status::Statistical;
            }
        }
        _ => status = Status::Statistical,
    }
    emit(run, &rows)?;
    Ok(status)
}

const MARTINGALE_SUITE: [&str; 5] = ["c1", "w1^2 + c1", "w1*w2 - 2*c1^2", "(1+2i) + w2^3 - c1*w1", "c1^2 + w1^4"];

/// Rows report `exact = 0` and `mc_mean = |E f(g_t) − f(e)|`.
pub fn martingale(run: &Resolved) -> Result<Status> {
    run.check_experiment("martingale")?;
    let s = run.structure_or(StructureSpec::Heisenberg { pairs: 1 })?;
    let polys = run.polynomials(&s, &MARTINGALE_SUITE)?;
    let threshold = run.threshold();
    let mut rows = Vec::new();
    let mut failing = Vec::new();
    let e = s.identity();
    for t in run.times(&[1.0]) {
        let cfg = run.mc(t, 128, 100_000)?;
        for (f, m) in polys.iter().zip(estimate_means(&polys, &cfg)?) {
            let fe = f.evaluate(&e)?;
            let mut row = mc_row("martingale", &s, f, t, cfg.steps, cfg.samples, cfg.seed);
            row.mc_mean = (m.mean - fe).norm();
            row.std_error = m.std_error;
            row.z_score = m.z_score(fe);
            if row.z_score > threshold {
                failing.push((f.clone(), fe, cfg));
            }
            rows.push(row);
        }
    }
    let mut status = Status::Ok;
    match failing.len() {
        0 => {}
        1 => {
            let (f, fe, cfg) = &failing[0];
            let cfg = cfg.with_seed(cfg.seed.wrapping_add(1));
            let m = estimate_means(std::slice::from_ref(f), &cfg)?[0];
            let mut row = mc_row("martingale-rerun", &s, f, cfg.t, cfg.steps, cfg.samples, cfg.seed);
            row.mc_mean = (m.mean - fe).norm();
            row.std_error = m.std_error;
            row.z_score = m.z_score(*fe);
            if row.z_score > threshold {
                status = Status::Statistical;
            }
            rows.push(row);
        }
        _ => status = Status::Statistical,
    }
    emit(run, &rows)?;
    Ok(status)
}

#[derive(Serialize)]
struct ProjectionRow {
    structure: String,
    f: String,
    t: f64,
    rank: usize,
    m: usize,
    coefficient_distance: f64,
    restricted_norm_sq: f64,
    cylinder_norm_sq: f64,
}

fn weighted_default() -> StructureSpec {
    StructureSpec::Weighted { n: 8, center: 1, weights: (1..=8).map(|j| 2f64.powi(-j)).collect(), seed: 5 }
}

pub fn projection(run: &Resolved) -> Result<Status> {
    run.check_experiment("projection")?;
    let s = run.structure_or(weighted_default())?;
    let f = run.polynomials(&s, &["w1*w2*w3*w4 + c1^2 + (0.5-1i)*w1^2*c1 + w5*w8 + 2*w2^3"])?.remove(0);
    let t = run.times(&[1.0])[0];
    let deg = f.weighted_degree();
    let rank = run.cfg.rank.unwrap_or(deg.max(1));
    let alpha = taylor_tensor(&f, deg.max(rank))?;
    let distances = projection_coefficient_distances(&f, rank)?;
    let mut rows = Vec::new();
    let mut status = Status::Ok;
    let mut prev = f64::NEG_INFINITY;
    for (i, d) in distances.iter().enumerate() {
        let m = i + 1;
        let norm = restrict_basis_norm_sq(&alpha, t, m)?;
        if norm < prev {
            status = Status::Invariant;
        }
        prev = norm;
        let cyl = fock_norm_sq(&cylinder_taylor_tensor(&f, m, deg.max(rank))?, t)?;
        rows.push(ProjectionRow {
            structure: s.label().into(),
            f: f.to_literal(),
            t,
            rank,
            m,
            coefficient_distance: *d,
            restricted_norm_sq: norm,
            cylinder_norm_sq: cyl,
        });
    }
    if distances.last().is_some_and(|d| *d >= 1e-12) {
        status = Status::Invariant;
    }
    emit(run, &rows)?;
    Ok(status)
}

#[derive(Serialize)]
struct FejerRow {
    structure: String,
    f: String,
    t: f64,
    n: usize,
    residual_norm: f64,
    relative_residual: f64,
    quadrature_diff: f64,
    cutoff_exact: bool,
}

pub fn fejer(run: &Resolved) -> Result<Status> {
    run.check_experiment("fejer")?;
    let s = run.structure_or(StructureSpec::Heisenberg { pairs: 1 })?;
    let polys = run.polynomials(&s, &["1 + w1 + w2^2 + c1 + w1*w2*c1"])?;
    let t = run.times(&[1.0])[0];
    let mut rows = Vec::new();
    let mut status = Status::Ok;
    for f in &polys {
        let deg = f.weighted_degree();
        let alpha = taylor_tensor(f, deg)?;
        let norm = fock_norm_sq(&alpha, t)?.sqrt();
        let mut prev = f64::INFINITY;
        for n in 1..=(2 * deg + 2) {
            let trunc = fejer_truncate(&alpha, n as i64)?;
            let quad = fejer_truncate_quadrature(&alpha, n as i64)?.max_abs_diff(&trunc);
            let residual = fock_norm_sq(&alpha.sub(&trunc)?, t)?.sqrt();
            let cutoff_exact = (0..=trunc.max_rank()).all(|k| {
                (0..trunc.rank(k).len())
                    .all(|i| trunc.word_weight(k, i) < n || trunc.rank(k)[i] == C64::new(0.0, 0.0))
            });
            if !cutoff_exact || quad > 1e-8 || residual > prev {
                status = Status::Invariant;
            }
            prev = residual;
            rows.push(FejerRow {
                structure: s.label().into(),
                f: f.to_literal(),
                t,
                n,
                residual_norm: residual,
                relative_residual: if norm > 0.0 { residual / norm } else { 0.0 },
                quadrature_diff: quad,
                cutoff_exact,
            });
        }
    }
    emit(run, &rows)?;
    Ok(status)
}

#[derive(Serialize)]
struct GeometryRow {
    structure: String,
    target: usize,
    lower: f64,
    construction_upper: f64,
    optimized_upper: f64,
    converged: bool,
    endpoint_error: f64,
    grid_intervals: usize,
}

pub fn geometry(run: &Resolved) -> Result<Status> {
    run.check_experiment("geometry")?;
    let s = run.structure_or(StructureSpec::Heisenberg { pairs: 1 })?;
    let grid = run.cfg.grid.unwrap_or(DEFAULT_GRID);
    let targets: Vec<GroupElement> = if run.cfg.targets.is_empty() {
        default_targets(&s)
    } else {
        run.cfg.targets.iter().map(|t| t.to_element(&s)).collect::<Result<_>>()?
    };
    let mut rows = Vec::new();
    let mut reports: Vec<BracketReport> = Vec::new();
    let mut status = Status::Ok;
    let mut last_witness = None;
    for (i, x) in targets.iter().enumerate() {
        let construction = distance_upper(&s, x, grid)?;
        let opt = distance_optimize(&s, x, &construction.witness, &OptimizeOptions::default())?;
        let err = opt.endpoint_error(x);
        if !(opt.lower <= opt.upper && opt.upper <= construction.upper) || err > 1e-8 {
            status = Status::Invariant;
        }
        rows.push(GeometryRow {
            structure: s.label().into(),
            target: i,
            lower: opt.lower,
            construction_upper: construction.upper,
            optimized_upper: opt.upper,
            converged: opt.converged,
            endpoint_error: err,
            grid_intervals: opt.witness.intervals(),
        });
        reports.push(opt.report(x));
        last_witness = Some(opt.witness);
    }
    if let (Some(path), Some(w)) = (&run.cfg.witness_csv, &last_witness) {
        let full = run.base_dir.join(path);
        std::fs::write(&full, w.to_csv()).with_context(|| format!("writing {}", full.display()))?;
    }
    match run.format {
        Format::Csv => emit(run, &rows)?,
        Format::Json => emit(run, &reports)?,
    }
    Ok(status)
}

fn default_targets(s: &HeisenbergStructure) -> Vec<GroupElement> {
    let (n, nc) = (s.n(), s.center_dim());
    let mut horizontal = vec![C64::new(0.0, 0.0); n];
    if n > 0 {
        horizontal[0] = C64::new(1.0, 0.0);
    }
    let mut center = vec![C64::new(0.0, 0.0); nc];
    if nc > 0 {
        center[0] = C64::new(1.0, 0.0);
    }
    let mixed_w: Vec<C64> = (0..n).map(|j| C64::new(0.6 / (j + 1) as f64, -0.3)).collect();
    let mixed_c: Vec<C64> = (0..nc).map(|l| C64::new(0.8, 0.2 * l as f64)).collect();
    let mut out = vec![GroupElement::new(horizontal, vec![C64::new(0.0, 0.0); nc])];
    if nc > 0 {
        out.push(GroupElement::new(vec![C64::new(0.0, 0.0); n], center));
    }
    out.push(GroupElement::new(mixed_w, mixed_c));
    out
}

pub fn fernique(run: &Resolved) -> Result<Status> {
    run.check_experiment("fernique")?;
    let s = run.structure_or(StructureSpec::Abelian { n: 1 })?;
    let eps = if run.cfg.epsilons.is_empty() { vec![0.0, 0.05, 0.25, 0.5, 1.0, 10.0] } else { run.cfg.epsilons.clone() };
    let t = run.times(&[1.0])[0];
    let default_steps = if s.center_dim() == 0 { 1 } else { 128 };
    let cfg = run.mc(t, default_steps, 200_000)?;
    let rows: Vec<FerniqueRow> = fernique_diagnostic(&s, &cfg, &eps)?;
    emit(run, &rows)?;
    Ok(Status::Ok)
}

#[derive(Serialize)]
struct SelftestRow {
    check: String,
    value: f64,
    tolerance: f64,
    pass: bool,
}

pub fn selftest(run: &Resolved) -> Result<Status> {
    let mut rows = Vec::new();
    let mut status = Status::Ok;
    let mut record = |check: &str, value: f64, tolerance: f64, kind: Status| {
        let pass = value <= tolerance;
        if !pass {
            status = status.max(kind);
        }
        rows.push(SelftestRow { check: check.into(), value, tolerance, pass });
    };

    let h = std::sync::Arc::new(HeisenbergStructure::standard_heisenberg(1));
    let g = h.multiply(
        &GroupElement::from_real(&[1.0, 0.0], &[0.0]),
        &GroupElement::from_real(&[0.0, 1.0], &[0.0]),
    )?;
    let want = GroupElement::from_real(&[1.0, 1.0], &[0.5]);
    let err = g.coords().iter().zip(want.coords()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
    record("group product example", err, 0.0, Status::Invariant);

    let f = HoloPoly::parse(h.clone(), "c1")?;
    let alpha = taylor_tensor(&f, 2)?;
    record("center coordinate Fock norm", (fock_norm_sq(&alpha, 1.0)? - 0.25).abs(), 1e-15, Status::Invariant);
    let p = HoloPoly::parse(h.clone(), "w1^2*c1 + (1-2i)*w2*c1 + w1*w2")?;
    record("J0 residual", j0_residual(&taylor_tensor(&p, 5)?, 5)?, 1e-12, Status::Invariant);

    let ab = std::sync::Arc::new(HeisenbergStructure::abelian(1));
    let polys: Vec<HoloPoly> = (0..=3).map(|k| HoloPoly::monomial(ab.clone(), vec![k], C64::new(1.0, 0.0))).collect();
    let cfg = run.mc(1.0, 1, 100_000)?;
    for (k, e) in estimate_sq_norms(&polys, &cfg)?.iter().enumerate() {
        let exact: f64 = (1..=k).map(|i| i as f64).product();
        record(&format!("Gaussian baseline z-score k={k}"), e.z_score(exact), 3.0, Status::Statistical);
    }
    emit(run, &rows)?;
    Ok(status)
}
