//! Heisenberg-like group instances `G = ℂⁿ × ℂᴺ` with product
//! `(w₁,c₁)·(w₂,c₂) = (w₁+w₂, c₁+c₂+½ω(w₁,w₂))`.
//!
//! Everything is expressed in the fixed standard frame: horizontal basis
//! vectors `ξ₁..ξₙ` and center basis vectors `e₁..e_N`. The skew form is
//! stored dense as `ω[i][j][ℓ]`, the ℓ-th center component of `ω(ξᵢ, ξⱼ)`.

use std::fmt;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;

const SKEW_TOL: f64 = 1e-12;
const RANK_TOL: f64 = 1e-10;

/// A point `(w, c)` of the group.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupElement {
    pub w: Vec<C64>,
    pub c: Vec<C64>,
}

/// A Lie algebra element `h = (A, a)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LieVector {
    pub horizontal: Vec<C64>,
    pub center: Vec<C64>,
}

impl GroupElement {
    pub fn new(w: Vec<C64>, c: Vec<C64>) -> Self {
        Self { w, c }
    }

    pub fn identity(n: usize, center: usize) -> Self {
        Self { w: vec![C64::new(0.0, 0.0); n], c: vec![C64::new(0.0, 0.0); center] }
    }

    pub fn from_real(w: &[f64], c: &[f64]) -> Self {
        Self {
            w: w.iter().map(|&x| C64::new(x, 0.0)).collect(),
            c: c.iter().map(|&x| C64::new(x, 0.0)).collect(),
        }
    }

    /// All coordinates `(w₁..wₙ, c₁..c_N)` in one vector.
    pub fn coords(&self) -> Vec<C64> {
        self.w.iter().chain(self.c.iter()).copied().collect()
    }

    pub fn is_identity(&self) -> bool {
        self.w.iter().chain(self.c.iter()).all(|z| z.norm_sqr() == 0.0)
    }

    pub fn to_lie(&self) -> LieVector {
        LieVector { horizontal: self.w.clone(), center: self.c.clone() }
    }
}

impl LieVector {
    pub fn new(horizontal: Vec<C64>, center: Vec<C64>) -> Self {
        Self { horizontal, center }
    }

    pub fn zero(n: usize, center: usize) -> Self {
        Self {
            horizontal: vec![C64::new(0.0, 0.0); n],
            center: vec![C64::new(0.0, 0.0); center],
        }
    }

    /// The `j`-th basis vector of `ℂⁿ⁺ᴺ` (horizontal indices first).
    pub fn basis(n: usize, center: usize, j: usize) -> Self {
        let mut h = Self::zero(n, center);
        if j < n {
            h.horizontal[j] = C64::new(1.0, 0.0);
        } else {
            h.center[j - n] = C64::new(1.0, 0.0);
        }
        h
    }

    pub fn coords(&self) -> Vec<C64> {
        self.horizontal.iter().chain(self.center.iter()).copied().collect()
    }

    pub fn is_horizontal(&self) -> bool {
        self.center.iter().all(|z| z.norm_sqr() == 0.0)
    }

    pub fn to_group(&self) -> GroupElement {
        GroupElement { w: self.horizontal.clone(), c: self.center.clone() }
    }

    pub fn add(&self, other: &LieVector) -> LieVector {
        LieVector {
            horizontal: zip_add(&self.horizontal, &other.horizontal),
            center: zip_add(&self.center, &other.center),
        }
    }

    pub fn scale(&self, s: C64) -> LieVector {
        LieVector {
            horizontal: self.horizontal.iter().map(|z| z * s).collect(),
            center: self.center.iter().map(|z| z * s).collect(),
        }
    }
}

fn zip_add(a: &[C64], b: &[C64]) -> Vec<C64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn vec_norm(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Lexicographically first horizontal pairs `(i, j)`, `i < j`, whose
/// brackets `ω(ξᵢ, ξⱼ)` form a basis of the center, plus the dual basis.
#[derive(Clone, Debug)]
pub struct BracketBasis {
    pub pairs: Vec<(usize, usize)>,
    /// `dual[(ℓ, m)]`: `εˡ(a) = Σ_m dual[(ℓ, m)] a_m`.
    pub dual: DMatrix<C64>,
}

impl BracketBasis {
    /// Coordinates `εˡ(a)` of a center vector in the bracket basis.
    pub fn coordinates(&self, a: &[C64]) -> Vec<C64> {
        (0..self.pairs.len())
            .map(|l| (0..a.len()).map(|m| self.dual[(l, m)] * a[m]).sum())
            .collect()
    }
}

/// One Heisenberg-like group instance.
#[derive(Clone, Debug, PartialEq)]
pub struct HeisenbergStructure {
    n: usize,
    center: usize,
    omega: Vec<C64>,
    hs_norm_sq: f64,
    label: String,
}

#[derive(Serialize, Deserialize)]
struct StructureDoc {
    n: usize,
    #[serde(rename = "N")]
    center: usize,
    omega: Vec<[f64; 2]>,
    label: String,
}

impl HeisenbergStructure {
    /// Builds a structure from a flat row-major `ω[i][j][ℓ]` array,
    /// rejecting arrays that are not skew in `(i, j)`.
    pub fn new(n: usize, center: usize, omega: Vec<C64>, label: impl Into<String>) -> Result<Self> {
        if omega.len() != n * n * center {
            return Err(Error::Structure(format!(
                "omega has {} entries, expected n*n*N = {}",
                omega.len(),
                n * n * center
            )));
        }
        let scale = omega.iter().map(|z| z.norm()).fold(1.0, f64::max);
        for i in 0..n {
            for j in 0..n {
                for l in 0..center {
                    let a = omega[(i * n + j) * center + l];
                    let b = omega[(j * n + i) * center + l];
                    if !(a + b).norm().is_finite() || (a + b).norm() > SKEW_TOL * scale {
                        return Err(Error::Structure(format!(
                            "omega is not skew: ω[{i}][{j}][{l}] = {a}, ω[{j}][{i}][{l}] = {b}"
                        )));
                    }
                }
            }
        }
        let hs_norm_sq = omega.iter().map(|z| z.norm_sqr()).sum();
        Ok(Self { n, center, omega, hs_norm_sq, label: label.into() })
    }

    /// Like [`HeisenbergStructure::new`] but also requires Hörmander's condition.
    pub fn new_hormander(
        n: usize,
        center: usize,
        omega: Vec<C64>,
        label: impl Into<String>,
    ) -> Result<Self> {
        let s = Self::new(n, center, omega, label)?;
        s.check_hormander()?;
        Ok(s)
    }

    /// The flat abelian group `ℂⁿ` (no center).
    pub fn abelian(n: usize) -> Self {
        Self { n, center: 0, omega: Vec::new(), hs_norm_sq: 0.0, label: format!("abelian-{n}") }
    }

    /// `n = 2·n_pairs`, `N = 1`, `ω(w, z) = Σ_p w_{2p-1} z_{2p} − w_{2p} z_{2p-1}`.
    pub fn standard_heisenberg(n_pairs: usize) -> Self {
        let n = 2 * n_pairs;
        let mut omega = vec![C64::new(0.0, 0.0); n * n];
        for p in 0..n_pairs {
            let (a, b) = (2 * p, 2 * p + 1);
            omega[a * n + b] = C64::new(1.0, 0.0);
            omega[b * n + a] = C64::new(-1.0, 0.0);
        }
        let label = format!("heisenberg-{n_pairs}");
        Self { n, center: 1, hs_norm_sq: 2.0 * n_pairs as f64, omega, label }
    }

    /// Seeded random skew tensor with `ω[i][j][·]` scaled by `√(qᵢqⱼ)`.
    /// Fails unless the result satisfies Hörmander's condition.
    pub fn weighted_family(n: usize, center: usize, weights: &[f64], seed: u64) -> Result<Self> {
        if weights.len() != n {
            return Err(Error::InvalidArgument(format!(
                "expected {n} weights, got {}",
                weights.len()
            )));
        }
        if weights.iter().any(|&q| q <= 0.0 || !q.is_finite()) {
            return Err(Error::InvalidArgument("weights must be positive and finite".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut omega = vec![C64::new(0.0, 0.0); n * n * center];
        for i in 0..n {
            for j in (i + 1)..n {
                let scale = (weights[i] * weights[j]).sqrt();
                for l in 0..center {
                    let re: f64 = StandardNormal.sample(&mut rng);
                    let im: f64 = StandardNormal.sample(&mut rng);
                    let z = C64::new(re, im) * scale;
                    omega[(i * n + j) * center + l] = z;
                    omega[(j * n + i) * center + l] = -z;
                }
            }
        }
        Self::new_hormander(n, center, omega, format!("weighted-{n}x{center}-seed{seed}"))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Center dimension `N`.
    pub fn center_dim(&self) -> usize {
        self.center
    }

    /// Total complex dimension `n + N`.
    pub fn dim(&self) -> usize {
        self.n + self.center
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn omega_raw(&self) -> &[C64] {
        &self.omega
    }

    #[inline]
    pub fn omega(&self, i: usize, j: usize, l: usize) -> C64 {
        self.omega[(i * self.n + j) * self.center + l]
    }

    /// `ω(ξᵢ, ξⱼ)` as a center vector.
    pub fn omega_pair(&self, i: usize, j: usize) -> &[C64] {
        let start = (i * self.n + j) * self.center;
        &self.omega[start..start + self.center]
    }

    /// Cached `‖ω‖²_HS = Σ_{i,j} ‖ω(ξᵢ,ξⱼ)‖²`.
    pub fn hs_norm_sq(&self) -> f64 {
        self.hs_norm_sq
    }

    /// `ω(x, y)` for horizontal vectors, accumulated into `out`.
    pub fn omega_add_into(&self, x: &[C64], y: &[C64], scale: C64, out: &mut [C64]) {
        let n = self.n;
        for i in 0..n {
            if x[i].norm_sqr() == 0.0 {
                continue;
            }
            for j in 0..n {
                if i == j || y[j].norm_sqr() == 0.0 {
                    continue;
                }
                let xy = x[i] * y[j] * scale;
                let row = &self.omega[(i * n + j) * self.center..(i * n + j + 1) * self.center];
                for (o, w) in out.iter_mut().zip(row) {
                    *o += xy * w;
                }
            }
        }
    }

    pub fn omega_apply(&self, x: &[C64], y: &[C64]) -> Vec<C64> {
        let mut out = vec![C64::new(0.0, 0.0); self.center];
        self.omega_add_into(x, y, C64::new(1.0, 0.0), &mut out);
        out
    }

    fn check_group(&self, g: &GroupElement) -> Result<()> {
        if g.w.len() != self.n || g.c.len() != self.center {
            return Err(Error::DimensionMismatch(format!(
                "element has dims ({}, {}), structure '{}' has ({}, {})",
                g.w.len(),
                g.c.len(),
                self.label,
                self.n,
                self.center
            )));
        }
        Ok(())
    }

    pub fn check_lie(&self, h: &LieVector) -> Result<()> {
        if h.horizontal.len() != self.n || h.center.len() != self.center {
            return Err(Error::DimensionMismatch(format!(
                "vector has dims ({}, {}), structure '{}' has ({}, {})",
                h.horizontal.len(),
                h.center.len(),
                self.label,
                self.n,
                self.center
            )));
        }
        Ok(())
    }

    pub fn check_element(&self, g: &GroupElement) -> Result<()> {
        self.check_group(g)
    }

    pub fn identity(&self) -> GroupElement {
        GroupElement::identity(self.n, self.center)
    }

    pub fn multiply(&self, g1: &GroupElement, g2: &GroupElement) -> Result<GroupElement> {
        self.check_group(g1)?;
        self.check_group(g2)?;
        let w = zip_add(&g1.w, &g2.w);
        let mut c = zip_add(&g1.c, &g2.c);
        self.omega_add_into(&g1.w, &g2.w, C64::new(0.5, 0.0), &mut c);
        Ok(GroupElement { w, c })
    }

    pub fn inverse(&self, g: &GroupElement) -> Result<GroupElement> {
        self.check_group(g)?;
        Ok(GroupElement { w: g.w.iter().map(|z| -z).collect(), c: g.c.iter().map(|z| -z).collect() })
    }

    /// `[(A₁,a₁),(A₂,a₂)] = (0, ω(A₁,A₂))`.
    pub fn bracket(&self, h1: &LieVector, h2: &LieVector) -> Result<LieVector> {
        self.check_lie(h1)?;
        self.check_lie(h2)?;
        Ok(LieVector {
            horizontal: vec![C64::new(0.0, 0.0); self.n],
            center: self.omega_apply(&h1.horizontal, &h2.horizontal),
        })
    }

    /// `√(‖w‖² + ‖c‖)`; the center norm enters to the first power.
    pub fn homogeneous_norm(&self, g: &GroupElement) -> Result<f64> {
        self.check_group(g)?;
        let w2: f64 = g.w.iter().map(|z| z.norm_sqr()).sum();
        Ok((w2 + vec_norm(&g.c)).sqrt())
    }

    /// Parabolic dilation `(w, c) ↦ (λw, λ²c)`.
    pub fn dilate_scale(&self, lambda: f64, g: &GroupElement) -> Result<GroupElement> {
        self.check_group(g)?;
        if !(lambda > 0.0) {
            return Err(Error::InvalidArgument(format!("dilation factor must be positive, got {lambda}")));
        }
        Ok(GroupElement {
            w: g.w.iter().map(|z| z * lambda).collect(),
            c: g.c.iter().map(|z| z * (lambda * lambda)).collect(),
        })
    }

    /// Phase rotation `(A, a) ↦ (e^{iθ}A, e^{2iθ}a)`.
    pub fn dilate_phase<T: PhaseRotate>(&self, theta: f64, x: &T) -> Result<T> {
        x.check_dims(self)?;
        Ok(x.rotate(theta))
    }

    /// Zeroes horizontal coordinates with (1-based) index above `m`.
    pub fn project(&self, m: usize, g: &GroupElement) -> Result<GroupElement> {
        self.check_group(g)?;
        if m > self.n {
            return Err(Error::InvalidArgument(format!("projection rank {m} exceeds n = {}", self.n)));
        }
        let mut out = g.clone();
        for z in out.w.iter_mut().skip(m) {
            *z = C64::new(0.0, 0.0);
        }
        Ok(out)
    }

    /// Rank of the matrix whose rows are `ω(ξᵢ, ξⱼ)`, `i < j`.
    pub fn hormander_rank(&self) -> usize {
        let n = self.n;
        if self.center == 0 || n < 2 {
            return 0;
        }
        let rows = n * (n - 1) / 2;
        let mut m = DMatrix::<C64>::zeros(rows, self.center);
        let mut r = 0;
        for i in 0..n {
            for j in (i + 1)..n {
                for l in 0..self.center {
                    m[(r, l)] = self.omega(i, j, l);
                }
                r += 1;
            }
        }
        let sv = m.singular_values();
        let smax = sv.iter().cloned().fold(0.0, f64::max);
        if smax <= f64::MIN_POSITIVE {
            return 0;
        }
        sv.iter().filter(|&&s| s > RANK_TOL * smax).count()
    }

    pub fn satisfies_hormander(&self) -> bool {
        self.hormander_rank() == self.center
    }

    pub fn check_hormander(&self) -> Result<()> {
        let rank = self.hormander_rank();
        if rank < self.center {
            return Err(Error::Hormander { rank, center: self.center });
        }
        Ok(())
    }

    /// Greedy selection of the lexicographically first basis pairs whose
    /// brackets span the center.
    pub fn bracket_basis(&self) -> Result<BracketBasis> {
        let nc = self.center;
        let mut pairs = Vec::new();
        let mut ortho: Vec<Vec<C64>> = Vec::new();
        'outer: for i in 0..self.n {
            for j in (i + 1)..self.n {
                if pairs.len() == nc {
                    break 'outer;
                }
                let v = self.omega_pair(i, j).to_vec();
                let vnorm = vec_norm(&v);
                if vnorm == 0.0 {
                    continue;
                }
                let mut r = v.clone();
                for q in &ortho {
                    let dot: C64 = q.iter().zip(&r).map(|(a, b)| a.conj() * b).sum();
                    for (x, y) in r.iter_mut().zip(q) {
                        *x -= dot * y;
                    }
                }
                let rnorm = vec_norm(&r);
                if rnorm > RANK_TOL * vnorm {
                    ortho.push(r.iter().map(|z| z / rnorm).collect());
                    pairs.push((i, j));
                }
            }
        }
        if pairs.len() < nc {
            return Err(Error::Hormander { rank: pairs.len(), center: nc });
        }
        let omega_mat =
            DMatrix::<C64>::from_fn(nc, nc, |m, l| self.omega(pairs[l].0, pairs[l].1, m));
        let dual = omega_mat
            .try_inverse()
            .ok_or_else(|| Error::Structure("bracket basis matrix is singular".into()))?;
        Ok(BracketBasis { pairs, dual })
    }

    pub fn to_json(&self) -> String {
        let doc = StructureDoc {
            n: self.n,
            center: self.center,
            omega: self.omega.iter().map(|z| [z.re, z.im]).collect(),
            label: self.label.clone(),
        };
        serde_json::to_string(&doc).expect("structure serializes")
    }

    /// Parses and validates a structure document. Hörmander's condition is
    /// enforced unless the center is trivial.
    pub fn from_json(text: &str) -> Result<Self> {
        let doc: StructureDoc = serde_json::from_str(text)?;
        let omega = doc.omega.iter().map(|p| C64::new(p[0], p[1])).collect();
        if doc.center == 0 {
            Self::new(doc.n, 0, omega, doc.label)
        } else {
            Self::new_hormander(doc.n, doc.center, omega, doc.label)
        }
    }
}

impl fmt::Display for HeisenbergStructure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (n={}, N={})", self.label, self.n, self.center)
    }
}

/// Types acted on by the phase dilation `φ_θ`.
pub trait PhaseRotate: Sized {
    fn rotate(&self, theta: f64) -> Self;
    fn check_dims(&self, s: &HeisenbergStructure) -> Result<()>;
}

impl PhaseRotate for LieVector {
    fn rotate(&self, theta: f64) -> Self {
        let p1 = C64::from_polar(1.0, theta);
        let p2 = C64::from_polar(1.0, 2.0 * theta);
        LieVector {
            horizontal: self.horizontal.iter().map(|z| z * p1).collect(),
            center: self.center.iter().map(|z| z * p2).collect(),
        }
    }

    fn check_dims(&self, s: &HeisenbergStructure) -> Result<()> {
        s.check_lie(self)
    }
}

impl PhaseRotate for GroupElement {
    fn rotate(&self, theta: f64) -> Self {
        self.to_lie().rotate(theta).to_group()
    }

    fn check_dims(&self, s: &HeisenbergStructure) -> Result<()> {
        s.check_group(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn random_element(s: &HeisenbergStructure, rng: &mut ChaCha8Rng) -> GroupElement {
        let mut draw = || {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            c(re, im)
        };
        GroupElement {
            w: (0..s.n()).map(|_| draw()).collect(),
            c: (0..s.center_dim()).map(|_| draw()).collect(),
        }
    }

    fn close(a: &GroupElement, b: &GroupElement, tol: f64) -> bool {
        let scale = 1.0 + vec_norm(&a.coords()).max(vec_norm(&b.coords()));
        a.coords().iter().zip(b.coords()).all(|(x, y)| (x - y).norm() <= tol * scale)
    }

    #[test]
    fn identity_and_inverse() {
        let s = HeisenbergStructure::standard_heisenberg(1);
        let g = GroupElement::new(vec![c(1.0, 2.0), c(-0.5, 0.3)], vec![c(0.7, -1.0)]);
        let e = s.identity();
        assert_eq!(s.multiply(&g, &e).unwrap(), g);
        assert_eq!(s.multiply(&e, &g).unwrap(), g);
        let ginv = s.inverse(&g).unwrap();
        assert_eq!(ginv.w, vec![c(-1.0, -2.0), c(0.5, -0.3)]);
        assert!(s.multiply(&g, &ginv).unwrap().is_identity());
        assert_eq!(s.inverse(&ginv).unwrap(), g);
        assert_eq!(s.inverse(&e).unwrap(), e);
    }

    #[test]
    fn heisenberg_product_by_hand() {
        let s = HeisenbergStructure::standard_heisenberg(1);
        let x = GroupElement::from_real(&[1.0, 0.0], &[0.0]);
        let y = GroupElement::from_real(&[0.0, 1.0], &[0.0]);
        let xy = s.multiply(&x, &y).unwrap();
        assert_eq!(xy, GroupElement::from_real(&[1.0, 1.0], &[0.5]));
    }

    #[test]
    fn bracket_examples() {
        let s = HeisenbergStructure::standard_heisenberg(1);
        let h1 = LieVector::basis(2, 1, 0);
        let h2 = LieVector::basis(2, 1, 1);
        assert_eq!(s.bracket(&h1, &h2).unwrap().center, vec![c(1.0, 0.0)]);
        assert_eq!(s.bracket(&h1, &h1).unwrap(), LieVector::zero(2, 1));
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let w = HeisenbergStructure::weighted_family(4, 2, &[1.0; 4], 9).unwrap();
        for _ in 0..20 {
            let h = random_element(&w, &mut rng).to_lie();
            let k = random_element(&w, &mut rng).to_lie();
            let sum = w.bracket(&h, &k).unwrap().add(&w.bracket(&k, &h).unwrap());
            assert!(vec_norm(&sum.coords()) < 1e-12);
        }
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let s = HeisenbergStructure::standard_heisenberg(1);
        let bad = GroupElement::identity(3, 1);
        assert!(matches!(s.multiply(&bad, &s.identity()), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn homogeneous_norm_examples() {
        let s = HeisenbergStructure::standard_heisenberg(1);
        assert_eq!(s.homogeneous_norm(&s.identity()).unwrap(), 0.0);
        let g = GroupElement::new(vec![c(3.0, 0.0), c(0.0, 4.0)], vec![c(0.0, 0.0)]);
        assert!((s.homogeneous_norm(&g).unwrap() - 5.0).abs() < 1e-15);
        let g = GroupElement::new(vec![c(0.0, 0.0); 2], vec![c(0.0, 4.0)]);
        assert!((s.homogeneous_norm(&g).unwrap() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn associativity_and_dilations() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for s in [
            HeisenbergStructure::standard_heisenberg(2),
            HeisenbergStructure::weighted_family(5, 3, &[1.0, 0.5, 0.25, 0.125, 0.0625], 4).unwrap(),
        ] {
            for _ in 0..1000 {
                let (a, b, d) =
                    (random_element(&s, &mut rng), random_element(&s, &mut rng), random_element(&s, &mut rng));
                let left = s.multiply(&s.multiply(&a, &b).unwrap(), &d).unwrap();
                let right = s.multiply(&a, &s.multiply(&b, &d).unwrap()).unwrap();
                assert!(close(&left, &right, 1e-12));
            }
            for _ in 0..100 {
                let (a, b) = (random_element(&s, &mut rng), random_element(&s, &mut rng));
                for lambda in [0.3, 1.0, 2.5] {
                    let lhs = s.dilate_scale(lambda, &s.multiply(&a, &b).unwrap()).unwrap();
                    let rhs = s
                        .multiply(&s.dilate_scale(lambda, &a).unwrap(), &s.dilate_scale(lambda, &b).unwrap())
                        .unwrap();
                    assert!(close(&lhs, &rhs, 1e-12));
                    let na = s.homogeneous_norm(&s.dilate_scale(lambda, &a).unwrap()).unwrap();
                    assert!((na - lambda * s.homogeneous_norm(&a).unwrap()).abs() < 1e-12 * na.max(1.0));
                }
                let theta = 0.7;
                let (h, k) = (a.to_lie(), b.to_lie());
                let lhs = s.dilate_phase(theta, &s.bracket(&h, &k).unwrap()).unwrap();
                let rhs = s
                    .bracket(&s.dilate_phase(theta, &h).unwrap(), &s.dilate_phase(theta, &k).unwrap())
                    .unwrap();
                assert!(close(&lhs.to_group(), &rhs.to_group(), 1e-12));
                let twice = s.dilate_phase(0.4, &s.dilate_phase(0.3, &a).unwrap()).unwrap();
                assert!(close(&twice, &s.dilate_phase(0.7, &a).unwrap(), 1e-12));
                let prod = s.dilate_phase(theta, &s.multiply(&a, &b).unwrap()).unwrap();
                let prod2 = s
                    .multiply(&s.dilate_phase(theta, &a).unwrap(), &s.dilate_phase(theta, &b).unwrap())
                    .unwrap();
                assert!(close(&prod, &prod2, 1e-12));
            }
        }
    }

    #[test]
    fn phase_pi_flips_horizontal_only() {
        let s = HeisenbergStructure::standard_heisenberg(1);
        let h = LieVector::new(vec![c(1.0, 2.0), c(3.0, -1.0)], vec![c(0.5, 0.5)]);
        let r = s.dilate_phase(std::f64::consts::PI, &h).unwrap();
        let expect = LieVector::new(vec![c(-1.0, -2.0), c(-3.0, 1.0)], vec![c(0.5, 0.5)]);
        assert!(close(&r.to_group(), &expect.to_group(), 1e-15));
        assert_eq!(s.dilate_phase(0.0, &h).unwrap(), h);
    }

    #[test]
    fn skew_form_properties() {
        let s = HeisenbergStructure::weighted_family(4, 2, &[1.0, 2.0, 0.5, 0.1], 21).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let x = random_element(&s, &mut rng).w;
            let y = random_element(&s, &mut rng).w;
            assert!(vec_norm(&s.omega_apply(&x, &x)) < 1e-12 * (1.0 + vec_norm(&x).powi(2)));
            let alpha = c(0.3, -1.7);
            let ax: Vec<C64> = x.iter().map(|z| z * alpha).collect();
            let lhs = s.omega_apply(&ax, &y);
            let rhs: Vec<C64> = s.omega_apply(&x, &y).iter().map(|z| z * alpha).collect();
            assert!(lhs.iter().zip(&rhs).all(|(a, b)| (a - b).norm() < 1e-12 * (1.0 + b.norm())));
        }
    }

    #[test]
    fn hormander_ranks() {
        for k in 1..6 {
            assert_eq!(HeisenbergStructure::standard_heisenberg(k).hormander_rank(), 1);
        }
        let zero = HeisenbergStructure::new(3, 2, vec![c(0.0, 0.0); 18], "zero").unwrap();
        assert_eq!(zero.hormander_rank(), 0);
        assert!(matches!(zero.check_hormander(), Err(Error::Hormander { rank: 0, center: 2 })));
        let w = HeisenbergStructure::weighted_family(4, 2, &[1.0; 4], 1).unwrap();
        assert_eq!(w.hormander_rank(), 2);
        for seed in 0..20 {
            let s = HeisenbergStructure::weighted_family(2, 1, &[1.0, 1.0], seed).unwrap();
            assert_eq!(s.hormander_rank(), 1);
        }
        assert!(matches!(
            HeisenbergStructure::weighted_family(1, 1, &[1.0], 0),
            Err(Error::Hormander { rank: 0, center: 1 })
        ));
    }

    #[test]
    fn weighted_family_hs_norm_is_dominated_by_leading_block() {
        let weights: Vec<f64> = (1..=8).map(|j| 2f64.powi(-j)).collect();
        let s = HeisenbergStructure::weighted_family(8, 1, &weights, 7).unwrap();
        let direct: f64 = s.omega_raw().iter().map(|z| z.norm_sqr()).sum();
        assert!((direct - s.hs_norm_sq()).abs() < 1e-14);
        let block = |lo: usize, hi: usize| -> f64 {
            (lo..hi)
                .flat_map(|i| (lo..hi).map(move |j| (i, j)))
                .map(|(i, j)| s.omega(i, j, 0).norm_sqr())
                .sum()
        };
        assert!(block(0, 4) > 50.0 * block(4, 8));
    }

    #[test]
    fn projection_edges() {
        let s = HeisenbergStructure::standard_heisenberg(2);
        let g = GroupElement::from_real(&[1.0, 2.0, 3.0, 4.0], &[5.0]);
        assert_eq!(s.project(4, &g).unwrap(), g);
        assert_eq!(s.project(0, &g).unwrap(), GroupElement::from_real(&[0.0; 4], &[5.0]));
        assert_eq!(s.project(2, &g).unwrap(), GroupElement::from_real(&[1.0, 2.0, 0.0, 0.0], &[5.0]));
    }

    #[test]
    fn broken_skewness_is_rejected() {
        let mut omega = HeisenbergStructure::standard_heisenberg(1).omega_raw().to_vec();
        omega[1] = c(2.0, 0.0);
        assert!(matches!(HeisenbergStructure::new(2, 1, omega, "bad"), Err(Error::Structure(_))));
    }

    #[test]
    fn json_round_trip_is_exact() {
        let s = HeisenbergStructure::weighted_family(4, 2, &[1.0, 0.3, 0.7, 1e-3], 17).unwrap();
        let text = s.to_json();
        let back = HeisenbergStructure::from_json(&text).unwrap();
        assert_eq!(back, s);
        assert_eq!(back.to_json(), text);
        let ab = HeisenbergStructure::abelian(2);
        assert_eq!(HeisenbergStructure::from_json(&ab.to_json()).unwrap(), ab);
    }

    #[test]
    fn bracket_basis_is_lexicographic() {
        let s = HeisenbergStructure::standard_heisenberg(2);
        let b = s.bracket_basis().unwrap();
        assert_eq!(b.pairs, vec![(0, 1)]);
        assert_eq!(b.coordinates(&[c(2.0, 1.0)]), vec![c(2.0, 1.0)]);
        let w = HeisenbergStructure::weighted_family(4, 2, &[1.0; 4], 3).unwrap();
        let bb = w.bracket_basis().unwrap();
        assert_eq!(bb.pairs[0], (0, 1));
        let a = vec![c(0.3, -0.2), c(1.5, 0.25)];
        let eps = bb.coordinates(&a);
        let mut rebuilt = vec![c(0.0, 0.0); 2];
        for (l, &(i, j)) in bb.pairs.iter().enumerate() {
            for m in 0..2 {
                rebuilt[m] += eps[l] * w.omega(i, j, m);
            }
        }
        assert!(rebuilt.iter().zip(&a).all(|(x, y)| (x - y).norm() < 1e-12));
    }
}
