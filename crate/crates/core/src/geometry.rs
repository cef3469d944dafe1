//! Horizontal paths and two-sided estimates of the horizontal
//! (Carnot–Carathéodory) distance from the identity.
//!
//! Paths are piecewise linear in the horizontal coordinate. The center
//! coordinate is the lift `a(t) = ½∫ω(A, Ȧ)`, which the trapezoid rule
//! integrates exactly on each linear piece, so every stored path is
//! genuinely horizontal and its polygonal length is a valid upper bound
//! for the distance between its endpoints.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::calculus::taylor_tensor;
use crate::error::{Error, Result};
use crate::fock::fock_norm_sq;
use crate::poly::HoloPoly;
use crate::structure::{vec_norm, GroupElement, HeisenbergStructure, C64};

/// Default number of grid intervals per path piece.
pub const DEFAULT_GRID: usize = 256;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

#[derive(Clone, Debug)]
pub struct HorizontalPath {
    structure: Arc<HeisenbergStructure>,
    grid: Vec<f64>,
    horizontal: Vec<Vec<C64>>,
    center: Vec<Vec<C64>>,
}

fn uniform_grid(intervals: usize) -> Vec<f64> {
    (0..=intervals).map(|i| i as f64 / intervals as f64).collect()
}

impl HorizontalPath {
    /// Lifts horizontal samples on `grid` to a horizontal path starting at
    /// `(A(t₀), 0)`.
    pub fn lift(s: Arc<HeisenbergStructure>, horizontal: Vec<Vec<C64>>, grid: Vec<f64>) -> Result<Self> {
        if horizontal.len() != grid.len() || grid.len() < 2 {
            return Err(Error::InvalidArgument(format!(
                "need at least two samples matching the grid ({} samples, {} grid points)",
                horizontal.len(),
                grid.len()
            )));
        }
        if grid.windows(2).any(|w| w[1] <= w[0] || !w[1].is_finite()) || grid[0] != 0.0 || grid[grid.len() - 1] != 1.0 {
            return Err(Error::InvalidArgument("grid must increase strictly from 0 to 1".into()));
        }
        if let Some(bad) = horizontal.iter().find(|a| a.len() != s.n()) {
            return Err(Error::DimensionMismatch(format!("sample of length {} for n = {}", bad.len(), s.n())));
        }
        let center = lift_center(&s, &horizontal);
        Ok(Self { structure: s, grid, horizontal, center })
    }

    /// Lifts samples on the uniform grid.
    pub fn from_samples(s: Arc<HeisenbergStructure>, horizontal: Vec<Vec<C64>>) -> Result<Self> {
        let m = horizontal.len().saturating_sub(1).max(1);
        Self::lift(s, horizontal, uniform_grid(m))
    }

    pub fn structure(&self) -> &Arc<HeisenbergStructure> {
        &self.structure
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn horizontal(&self) -> &[Vec<C64>] {
        &self.horizontal
    }

    pub fn center(&self) -> &[Vec<C64>] {
        &self.center
    }

    pub fn intervals(&self) -> usize {
        self.grid.len() - 1
    }

    pub fn endpoint(&self) -> GroupElement {
        GroupElement::new(self.horizontal[self.intervals()].clone(), self.center[self.intervals()].clone())
    }

    /// `Σ ‖ΔA‖`.
    pub fn length(&self) -> f64 {
        self.horizontal
            .windows(2)
            .map(|w| w[1].iter().zip(&w[0]).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt())
            .sum()
    }

    /// Largest deviation of the stored center from a fresh lift, relative
    /// to the squared horizontal scale of the path.
    pub fn lift_consistency_error(&self) -> f64 {
        let fresh = lift_center(&self.structure, &self.horizontal);
        let scale = self.horizontal.iter().map(|a| vec_norm(a)).fold(0.0, f64::max).powi(2).max(f64::MIN_POSITIVE);
        fresh
            .iter()
            .zip(&self.center)
            .map(|(x, y)| x.iter().zip(y).map(|(p, q)| (p - q).norm()).fold(0.0, f64::max))
            .fold(0.0, f64::max)
            / scale
    }

    /// `φ_λ ∘ σ`: horizontal samples scale by `λ`, center by `λ²`.
    pub fn dilate(&self, lambda: f64) -> HorizontalPath {
        let l2 = lambda * lambda;
        HorizontalPath {
            structure: self.structure.clone(),
            grid: self.grid.clone(),
            horizontal: self.horizontal.iter().map(|a| a.iter().map(|z| z * lambda).collect()).collect(),
            center: self.center.iter().map(|a| a.iter().map(|z| z * l2).collect()).collect(),
        }
    }

    /// Concatenation `self * other`, where `other` starts at the identity
    /// and is left-translated to the end of `self`.
    pub fn concat(&self, other: &HorizontalPath) -> Result<HorizontalPath> {
        if !Arc::ptr_eq(&self.structure, &other.structure) && *self.structure != *other.structure {
            return Err(Error::DimensionMismatch("paths live on different structures".into()));
        }
        let base = &self.horizontal[self.intervals()];
        let mut samples = self.horizontal.clone();
        samples.extend(
            other.horizontal[1..]
                .iter()
                .map(|a| a.iter().zip(base).map(|(x, y)| x + y).collect::<Vec<_>>()),
        );
        Self::from_samples(self.structure.clone(), samples)
    }

    /// Rows `t, Re A₁, Im A₁, …, Re a₁, Im a₁, …`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t");
        for j in 1..=self.structure.n() {
            out.push_str(&format!(",re_w{j},im_w{j}"));
        }
        for l in 1..=self.structure.center_dim() {
            out.push_str(&format!(",re_c{l},im_c{l}"));
        }
        out.push('\n');
        for (i, t) in self.grid.iter().enumerate() {
            out.push_str(&format!("{t}"));
            for z in self.horizontal[i].iter().chain(&self.center[i]) {
                out.push_str(&format!(",{},{}", z.re, z.im));
            }
            out.push('\n');
        }
        out
    }
}

fn lift_center(s: &HeisenbergStructure, horizontal: &[Vec<C64>]) -> Vec<Vec<C64>> {
    let mut center = Vec::with_capacity(horizontal.len());
    let mut a = vec![ZERO; s.center_dim()];
    center.push(a.clone());
    for w in horizontal.windows(2) {
        let step: Vec<C64> = w[1].iter().zip(&w[0]).map(|(x, y)| x - y).collect();
        s.omega_add_into(&w[0], &step, C64::new(0.5, 0.0), &mut a);
        center.push(a.clone());
    }
    center
}

/// The segment `t ↦ (tA, 0)`.
pub fn straight_witness(s: Arc<HeisenbergStructure>, a: &[C64], intervals: usize) -> Result<HorizontalPath> {
    if a.len() != s.n() {
        return Err(Error::DimensionMismatch(format!("target of length {} for n = {}", a.len(), s.n())));
    }
    let samples = (0..=intervals).map(|i| a.iter().map(|z| z * (i as f64 / intervals as f64)).collect()).collect();
    HorizontalPath::from_samples(s, samples)
}

/// The closed loop `σ(t) = A cos 2πt + B sin 2πt − A`, sampled as an
/// inscribed polygon. Its lift ends at `(0, πω(A, B))` up to the polygon
/// factor `sin(2π/M)/(2π/M)`.
pub fn center_loop_witness(s: Arc<HeisenbergStructure>, a: &[C64], b: &[C64], intervals: usize) -> Result<HorizontalPath> {
    if a.len() != s.n() || b.len() != s.n() {
        return Err(Error::DimensionMismatch("loop generators must be horizontal".into()));
    }
    let samples = (0..=intervals)
        .map(|i| {
            let th = 2.0 * PI * (i % intervals) as f64 / intervals as f64;
            a.iter().zip(b).map(|(x, y)| x * th.cos() + y * th.sin() - x).collect()
        })
        .collect();
    HorizontalPath::from_samples(s, samples)
}

/// Polygonal loop along `ξᵢ, ξⱼ` whose lift ends exactly at `(0, ε ω(ξᵢ, ξⱼ))`.
fn exact_area_loop(s: &Arc<HeisenbergStructure>, i: usize, j: usize, eps: C64, intervals: usize) -> Result<HorizontalPath> {
    let m = intervals as f64;
    let r = (eps * (2.0 / (m * (2.0 * PI / m).sin()))).sqrt();
    let mut a = vec![ZERO; s.n()];
    let mut b = vec![ZERO; s.n()];
    a[i] = r;
    b[j] = r;
    center_loop_witness(s.clone(), &a, &b, intervals)
}

/// `Σ_ℓ √‖εˡ‖` over the rows of the dual bracket basis; loop pieces of
/// [`distance_upper`] have total length at most `2√π · C · √‖a‖`.
pub fn loop_constant(s: &HeisenbergStructure) -> Result<f64> {
    let basis = s.bracket_basis()?;
    Ok((0..basis.pairs.len()).map(|l| basis.dual.row(l).norm().sqrt()).sum())
}

#[derive(Clone, Debug)]
pub struct DistanceBracket {
    pub lower: f64,
    pub upper: f64,
    pub witness: HorizontalPath,
    /// False when the optimizer gave up and returned its best feasible path.
    pub converged: bool,
}

/// A serializable summary of a [`DistanceBracket`].
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BracketReport {
    pub structure: String,
    pub target_w: Vec<[f64; 2]>,
    pub target_c: Vec<[f64; 2]>,
    pub lower: f64,
    pub upper: f64,
    pub converged: bool,
    pub endpoint_error: f64,
    pub grid_intervals: usize,
}

impl DistanceBracket {
    pub fn endpoint_error(&self, target: &GroupElement) -> f64 {
        let e = self.witness.endpoint();
        e.coords().iter().zip(target.coords()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }

    pub fn report(&self, target: &GroupElement) -> BracketReport {
        let pack = |v: &[C64]| v.iter().map(|z| [z.re, z.im]).collect();
        BracketReport {
            structure: self.witness.structure().label().to_string(),
            target_w: pack(&target.w),
            target_c: pack(&target.c),
            lower: self.lower,
            upper: self.upper,
            converged: self.converged,
            endpoint_error: self.endpoint_error(target),
            grid_intervals: self.witness.intervals(),
        }
    }
}

/// `‖A‖`, the only structure-independent lower bound.
pub fn distance_lower(s: &HeisenbergStructure, x: &GroupElement) -> Result<f64> {
    s.check_element(x)?;
    Ok(vec_norm(&x.w))
}

/// Straight segment to `(A, 0)` followed by one exact-area loop per
/// bracket-basis pair for the center `a`.
pub fn distance_upper(s: &Arc<HeisenbergStructure>, x: &GroupElement, intervals: usize) -> Result<DistanceBracket> {
    s.check_element(x)?;
    let mut path = straight_witness(s.clone(), &x.w, intervals)?;
    if x.c.iter().any(|z| z.norm_sqr() != 0.0) {
        let basis = s.bracket_basis()?;
        for ((i, j), eps) in basis.pairs.iter().zip(basis.coordinates(&x.c)) {
            if eps.norm_sqr() == 0.0 {
                continue;
            }
            path = path.concat(&exact_area_loop(s, *i, *j, eps, intervals)?)?;
        }
    }
    let lower = distance_lower(s, x)?;
    Ok(DistanceBracket { lower, upper: path.length().max(lower), witness: path, converged: true })
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct OptimizeOptions {
    pub rounds: usize,
    pub penalty_start: f64,
    pub penalty_growth: f64,
    pub inner_iters: usize,
    pub tolerance: f64,
}

impl Default for OptimizeOptions {
    fn default() -> Self {
        Self { rounds: 5, penalty_start: 10.0, penalty_growth: 10.0, inner_iters: 400, tolerance: 1e-12 }
    }
}

/// Private optimizer workspace over interior samples `P₁..P_{M−1}`;
/// `P₀ = 0` and `P_M = A` are held fixed.
struct Workspace<'a> {
    s: &'a HeisenbergStructure,
    m: usize,
    target: &'a GroupElement,
    pts: Vec<Vec<C64>>,
}

impl Workspace<'_> {
    fn center(&self) -> Vec<C64> {
        let mut a = vec![ZERO; self.s.center_dim()];
        for w in self.pts.windows(2) {
            self.s.omega_add_into(&w[0], &w[1], C64::new(0.5, 0.0), &mut a);
        }
        a
    }

    fn residual(&self) -> Vec<C64> {
        self.center().iter().zip(&self.target.c).map(|(x, y)| x - y).collect()
    }

    fn energy(&self) -> f64 {
        let m = self.m as f64;
        m * self.pts.windows(2).map(|w| w[1].iter().zip(&w[0]).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>()).sum::<f64>()
    }

    fn objective(&self, mu: f64) -> f64 {
        self.energy() + mu * self.residual().iter().map(|z| z.norm_sqr()).sum::<f64>()
    }

    /// `∂c_ℓ/∂P_{k,j}` for interior `k`, as `jac[k-1][j][ℓ]`.
    fn jacobian(&self) -> Vec<Vec<Vec<C64>>> {
        let (n, nc) = (self.s.n(), self.s.center_dim());
        (1..self.m)
            .map(|k| {
                let diff: Vec<C64> = self.pts[k + 1].iter().zip(&self.pts[k - 1]).map(|(a, b)| a - b).collect();
                (0..n)
                    .map(|j| {
                        let mut row = vec![ZERO; nc];
                        for (i, d) in diff.iter().enumerate() {
                            if d.norm_sqr() == 0.0 {
                                continue;
                            }
                            for (o, w) in row.iter_mut().zip(self.s.omega_pair(j, i)) {
                                *o += w * d * 0.5;
                            }
                        }
                        row
                    })
                    .collect()
            })
            .collect()
    }

    /// `2 ∂Φ/∂P̄` on the interior samples.
    fn gradient(&self, mu: f64) -> Vec<Vec<C64>> {
        let m = self.m as f64;
        let r = self.residual();
        let jac = self.jacobian();
        (1..self.m)
            .map(|k| {
                (0..self.s.n())
                    .map(|j| {
                        let lap = self.pts[k][j] * 2.0 - self.pts[k - 1][j] - self.pts[k + 1][j];
                        let pen: C64 = r.iter().zip(&jac[k - 1][j]).map(|(rl, jl)| rl * jl.conj()).sum();
                        (lap * m + pen * mu) * 2.0
                    })
                    .collect()
            })
            .collect()
    }
}

/// Solves the Dirichlet system `2x_k − x_{k−1} − x_{k+1} = b_k` column-wise.
fn dirichlet_solve(b: &[Vec<C64>]) -> Vec<Vec<C64>> {
    let len = b.len();
    if len == 0 {
        return Vec::new();
    }
    let width = b[0].len();
    let mut cp = vec![0.0; len];
    let mut dp = vec![vec![ZERO; width]; len];
    cp[0] = -0.5;
    for j in 0..width {
        dp[0][j] = b[0][j] / 2.0;
    }
    for k in 1..len {
        let den = 2.0 + cp[k - 1];
        cp[k] = -1.0 / den;
        for j in 0..width {
            dp[k][j] = (b[k][j] + dp[k - 1][j]) / den;
        }
    }
    let mut x = dp.clone();
    for k in (0..len - 1).rev() {
        for j in 0..width {
            x[k][j] = dp[k][j] - cp[k] * x[k + 1][j];
        }
    }
    x
}

/// `Y_ℓ = Lap⁻¹ J_ℓ^H` and the Gram matrix `G = J Lap⁻¹ J^H`.
fn constraint_system(jac: &[Vec<Vec<C64>>], nc: usize) -> (Vec<Vec<Vec<C64>>>, DMatrix<C64>) {
    let ys: Vec<Vec<Vec<C64>>> = (0..nc)
        .map(|l| {
            let col: Vec<Vec<C64>> = jac.iter().map(|row| row.iter().map(|jl| jl[l].conj()).collect()).collect();
            dirichlet_solve(&col)
        })
        .collect();
    let g = DMatrix::<C64>::from_fn(nc, nc, |p, q| {
        jac.iter()
            .zip(&ys[q])
            .map(|(jrow, yrow)| jrow.iter().zip(yrow).map(|(jl, y)| jl[p] * y).sum::<C64>())
            .sum()
    });
    (ys, g)
}

/// Gauss–Newton direction `−½ (M·Lap + μ JᴴJ)⁻¹ g`, applied through the
/// Woodbury identity.
fn gauss_newton_direction(ws: &Workspace, g: &[Vec<C64>], mu: f64) -> Option<Vec<Vec<C64>>> {
    let nc = ws.s.center_dim();
    let m = ws.m as f64;
    let u = dirichlet_solve(g);
    let jac = ws.jacobian();
    let (ys, mut gram) = constraint_system(&jac, nc);
    for l in 0..nc {
        gram[(l, l)] += C64::new(m / mu, 0.0);
    }
    let ju = DVector::<C64>::from_fn(nc, |l, _| {
        jac.iter().zip(&u).map(|(jrow, urow)| jrow.iter().zip(urow).map(|(jl, x)| jl[l] * x).sum::<C64>()).sum()
    });
    let w = gram.lu().solve(&ju)?;
    Some(
        u.iter()
            .enumerate()
            .map(|(k, row)| {
                row.iter()
                    .enumerate()
                    .map(|(j, x)| -(x - (0..nc).map(|l| ys[l][k][j] * w[l]).sum::<C64>()) / (2.0 * m))
                    .collect()
            })
            .collect(),
    )
}

/// Gauss–Newton projection onto `c(P) = a` in the discrete `H¹` metric.
fn restore(ws: &mut Workspace, scale2: f64) -> bool {
    let nc = ws.s.center_dim();
    for _ in 0..30 {
        let r = ws.residual();
        if r.iter().map(|z| z.norm()).fold(0.0, f64::max) <= 1e-14 * scale2 {
            return true;
        }
        let (ys, g) = constraint_system(&ws.jacobian(), nc);
        let Some(coef) = g.lu().solve(&DVector::from_vec(r)) else {
            return false;
        };
        for k in 1..ws.m {
            for j in 0..ws.s.n() {
                let delta: C64 = (0..nc).map(|l| ys[l][k - 1][j] * coef[l]).sum();
                ws.pts[k][j] -= delta;
            }
        }
    }
    let r = ws.residual();
    r.iter().map(|z| z.norm()).fold(0.0, f64::max) <= 1e-12 * scale2
}

/// Penalty descent on the path energy `M Σ‖ΔP‖²` subject to the lifted
/// endpoint equal to `x`, starting from `init`. The result is never worse
/// than the construction of [`distance_upper`] on the same grid size.
pub fn distance_optimize(
    s: &Arc<HeisenbergStructure>,
    x: &GroupElement,
    init: &HorizontalPath,
    opts: &OptimizeOptions,
) -> Result<DistanceBracket> {
    s.check_element(x)?;
    let construction = distance_upper(s, x, init.intervals())?;
    let scale = s.homogeneous_norm(x)?;
    if scale == 0.0 {
        return Ok(construction);
    }
    let scale2 = scale * scale;
    let m = init.intervals();
    if m < 2 {
        return Err(Error::InvalidArgument("initial path needs at least two intervals".into()));
    }
    // re-anchor the initial path to start at 0 and end at A
    let start = init.horizontal()[0].clone();
    let end_shift: Vec<C64> =
        x.w.iter().zip(&init.horizontal()[m]).zip(&start).map(|((t, e), s0)| t - (e - s0)).collect();
    let pts: Vec<Vec<C64>> = init
        .horizontal()
        .iter()
        .enumerate()
        .map(|(k, p)| {
            let f = k as f64 / m as f64;
            p.iter().zip(&start).zip(&end_shift).map(|((z, s0), d)| z - s0 + d * f).collect()
        })
        .collect();
    let mut ws = Workspace { s, m, target: x, pts };

    let mut settled = false;
    let mut mu = opts.penalty_start / scale2;
    for _ in 0..opts.rounds {
        let mut step = 1.0;
        let mut phi = ws.objective(mu);
        settled = false;
        for _ in 0..opts.inner_iters {
            let g = ws.gradient(mu);
            let Some(d) = gauss_newton_direction(&ws, &g, mu) else {
                break;
            };
            let slope: f64 = g.iter().flatten().zip(d.iter().flatten()).map(|(a, b)| (a.conj() * b).re).sum::<f64>();
            if slope >= 0.0 || -slope <= opts.tolerance * phi {
                settled = true;
                break;
            }
            let saved = ws.pts.clone();
            let mut accepted = false;
            while step > 1e-12 {
                for k in 1..m {
                    for j in 0..s.n() {
                        ws.pts[k][j] = saved[k][j] + d[k - 1][j] * step;
                    }
                }
                let trial = ws.objective(mu);
                if trial <= phi + 1e-4 * step * slope {
                    phi = trial;
                    accepted = true;
                    break;
                }
                step *= 0.5;
            }
            if !accepted {
                ws.pts = saved;
                settled = true;
                break;
            }
            step = (step * 2.0).min(1.0);
        }
        mu *= opts.penalty_growth;
    }
    let restored = restore(&mut ws, scale2);
    let path = HorizontalPath::from_samples(s.clone(), ws.pts)?;
    let endpoint_ok = {
        let e = path.endpoint();
        e.coords().iter().zip(x.coords()).all(|(a, b)| (a - b).norm() <= 1e-10 * scale2.max(scale))
    };
    let lower = distance_lower(s, x)?;
    if restored && endpoint_ok && path.length() <= construction.upper {
        Ok(DistanceBracket { lower, upper: path.length().max(lower), witness: path, converged: settled })
    } else {
        Ok(DistanceBracket { converged: restored && endpoint_ok && settled, ..construction })
    }
}

/// `φ_λ ∘ σ`.
pub fn dilate_path(p: &HorizontalPath, lambda: f64) -> HorizontalPath {
    p.dilate(lambda)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PointwiseRow {
    pub abs_f: f64,
    pub fock_norm: f64,
    pub distance: f64,
    pub bound: f64,
    /// True when the distance used is exact (pure-horizontal point).
    pub exact_distance: bool,
    pub holds: bool,
}

/// Checks `|f(g)| ≤ ‖f̂(e)‖_t exp(D²/2t)` with `D` the construction upper
/// bound, which is exact at pure-horizontal points.
pub fn pointwise_bound_check(f: &HoloPoly, t: f64, points: &[GroupElement]) -> Result<Vec<PointwiseRow>> {
    let s = f.structure().clone();
    let norm = fock_norm_sq(&taylor_tensor(f, f.weighted_degree())?, t)?.sqrt();
    points
        .iter()
        .map(|g| {
            let abs_f = f.evaluate(g)?.norm();
            let exact_distance = g.c.iter().all(|z| z.norm_sqr() == 0.0);
            let distance = if exact_distance {
                distance_lower(&s, g)?
            } else {
                distance_upper(&s, g, DEFAULT_GRID)?.upper
            };
            let bound = norm * (distance * distance / (2.0 * t)).exp();
            Ok(PointwiseRow { abs_f, fock_norm: norm, distance, bound, exact_distance, holds: abs_f <= bound * (1.0 + 1e-12) })
        })
        .collect()
}

/// Empirical `(min, max)` of `D(x)/‖x‖` over `points`, with `D` the
/// construction upper bound and `‖·‖` the homogeneous norm.
pub fn comparability_range(s: &Arc<HeisenbergStructure>, points: &[GroupElement]) -> Result<(f64, f64)> {
    let mut lo = f64::INFINITY;
    let mut hi: f64 = 0.0;
    for x in points {
        let h = s.homogeneous_norm(x)?;
        if h == 0.0 {
            continue;
        }
        let r = distance_upper(s, x, DEFAULT_GRID)?.upper / h;
        lo = lo.min(r);
        hi = hi.max(r);
    }
    Ok((lo, hi))
}
