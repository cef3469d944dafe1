//! Left-invariant calculus of holomorphic polynomials.
//!
//! For `h = (A, a)` the left-invariant field is
//! `(h̃f)(g) = f'(g)(A, a + ½ω(w, A))` at `g = (w, c)`. Taylor tensors use
//! the convention that the leftmost tensor slot is the outermost
//! derivative: `⟨f̂ₖ(e), h₁⊗⋯⊗hₖ⟩ = (h̃₁⋯h̃ₖ f)(e)`.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::poly::{Exponents, HoloPoly};
use crate::structure::{GroupElement, HeisenbergStructure, LieVector, C64};
use crate::tensor::GradedTensor;

/// Longest word accepted by [`partition_derivative`].
pub const MAX_WORD_LEN: usize = 8;

/// An ordered list `(h₁, …, hₖ)` standing for the operator `h̃₁⋯h̃ₖ`.
#[derive(Clone, Debug)]
pub struct DerivativeWord {
    letters: Vec<LieVector>,
}

impl DerivativeWord {
    pub fn new(s: &HeisenbergStructure, letters: Vec<LieVector>) -> Result<Self> {
        for h in &letters {
            s.check_lie(h)?;
        }
        Ok(Self { letters })
    }

    /// Word of basis vectors given by letter indices (horizontal first).
    pub fn basis(s: &HeisenbergStructure, indices: &[usize]) -> Self {
        let letters =
            indices.iter().map(|&j| LieVector::basis(s.n(), s.center_dim(), j)).collect();
        Self { letters }
    }

    pub fn letters(&self) -> &[LieVector] {
        &self.letters
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }
}

/// `g ↦ f'(g)(A, a + ½ω(w, A))`.
pub fn lie_derive(f: &HoloPoly, h: &LieVector) -> Result<HoloPoly> {
    let s = f.structure();
    s.check_lie(h)?;
    let n = s.n();
    let nc = s.center_dim();
    // linear part (A, a)
    let mut out: BTreeMap<Exponents, C64> = BTreeMap::new();
    let constant = h.coords();
    // ½ω(w, A)_ℓ = Σᵢ wᵢ · coeff[i][ℓ]
    let mut coeff = vec![C64::new(0.0, 0.0); n * nc];
    for i in 0..n {
        for l in 0..nc {
            let mut acc = C64::new(0.0, 0.0);
            for (j, aj) in h.horizontal.iter().enumerate() {
                acc += s.omega(i, j, l) * aj;
            }
            coeff[i * nc + l] = acc * 0.5;
        }
    }
    for (e, c) in f.terms() {
        for (idx, v) in constant.iter().enumerate() {
            if e[idx] == 0 || v.norm_sqr() == 0.0 {
                continue;
            }
            let mut e2 = e.clone();
            e2[idx] -= 1;
            *out.entry(e2).or_insert(C64::new(0.0, 0.0)) += c * v * e[idx] as f64;
        }
        for l in 0..nc {
            let k = e[n + l];
            if k == 0 {
                continue;
            }
            for i in 0..n {
                let q = coeff[i * nc + l];
                if q.norm_sqr() == 0.0 {
                    continue;
                }
                let mut e2 = e.clone();
                e2[n + l] -= 1;
                e2[i] += 1;
                *out.entry(e2).or_insert(C64::new(0.0, 0.0)) += c * q * k as f64;
            }
        }
    }
    Ok(HoloPoly::from_terms(f.structure().clone(), out))
}

/// `h̃₁⋯h̃ₖ f` as a polynomial, applying `h̃ₖ` first.
pub fn iterated_lie_derive(f: &HoloPoly, word: &DerivativeWord) -> Result<HoloPoly> {
    let mut p = f.clone();
    for h in word.letters().iter().rev() {
        p = lie_derive(&p, h)?;
    }
    Ok(p)
}

/// All iterated left-invariant derivatives along basis words, evaluated at
/// the identity, up to `max_rank`.
pub fn taylor_tensor(f: &HoloPoly, max_rank: usize) -> Result<GradedTensor> {
    let degree = f.weighted_degree();
    if max_rank < degree {
        return Err(Error::Truncation { max_rank, degree });
    }
    let s = f.structure().clone();
    let d = s.dim();
    let basis: Vec<LieVector> = (0..d).map(|j| LieVector::basis(s.n(), s.center_dim(), j)).collect();
    let mut out = GradedTensor::zeros(s.clone(), max_rank);
    let zero_exp = vec![0u32; d];
    let mut level: Vec<Option<HoloPoly>> = vec![Some(f.clone())];
    out.rank_mut(0)[0] = f.coefficient(&zero_exp);
    for k in 1..=degree {
        let mut next: Vec<Option<HoloPoly>> = Vec::with_capacity(level.len() * d);
        for h in &basis {
            for p in &level {
                let derived = match p {
                    Some(p) => {
                        let q = lie_derive(p, h)?;
                        if q.is_zero() {
                            None
                        } else {
                            Some(q)
                        }
                    }
                    None => None,
                };
                next.push(derived);
            }
        }
        // next is indexed by j * d^{k-1} + idx(rest), i.e. first slot most significant
        let rank = out.rank_mut(k);
        for (idx, p) in next.iter().enumerate() {
            if let Some(p) = p {
                rank[idx] = p.coefficient(&zero_exp);
            }
        }
        level = next;
    }
    Ok(out)
}

fn multilinear_derivative(f: &HoloPoly, vectors: &[Vec<C64>], g: &[C64]) -> C64 {
    let mut p = f.clone();
    for v in vectors {
        if p.is_zero() {
            return C64::new(0.0, 0.0);
        }
        p = p.directional(v);
    }
    p.evaluate_coords(g)
}

/// Visits every partition of `0..k` into blocks of size one or two. Pairs
/// are reported as `(p, q)` with `p < q`.
pub fn for_each_partition(k: usize, mut visit: impl FnMut(&[(usize, usize)], &[usize])) {
    fn rec(
        used: &mut Vec<bool>,
        pairs: &mut Vec<(usize, usize)>,
        singles: &mut Vec<usize>,
        visit: &mut dyn FnMut(&[(usize, usize)], &[usize]),
    ) {
        let Some(first) = used.iter().position(|u| !u) else {
            visit(pairs, singles);
            return;
        };
        used[first] = true;
        singles.push(first);
        rec(used, pairs, singles, visit);
        singles.pop();
        for q in (first + 1)..used.len() {
            if used[q] {
                continue;
            }
            used[q] = true;
            pairs.push((first, q));
            rec(used, pairs, singles, visit);
            pairs.pop();
            used[q] = false;
        }
        used[first] = false;
    }
    let mut used = vec![false; k];
    rec(&mut used, &mut Vec::new(), &mut Vec::new(), &mut visit);
}

/// Closed-form `(h̃₁⋯h̃ₖ f)(g)` as a sum over partitions into singletons and
/// pairs: each pair `{p < q}` contributes `½[h_p, h_q]`, each singleton the
/// field value `h̃_p(g)`, fed to the linear derivative `f^{(j)}(g)`.
pub fn partition_derivative(f: &HoloPoly, word: &DerivativeWord, g: &GroupElement) -> Result<C64> {
    let s = f.structure();
    s.check_element(g)?;
    if word.len() > MAX_WORD_LEN {
        return Err(Error::WordTooLong(word.len()));
    }
    for h in word.letters() {
        s.check_lie(h)?;
    }
    let fields: Vec<Vec<C64>> = word
        .letters()
        .iter()
        .map(|h| {
            let mut center = h.center.clone();
            s.omega_add_into(&g.w, &h.horizontal, C64::new(0.5, 0.0), &mut center);
            h.horizontal.iter().chain(center.iter()).copied().collect()
        })
        .collect();
    let zero_h = vec![C64::new(0.0, 0.0); s.n()];
    let coords = g.coords();
    let mut total = C64::new(0.0, 0.0);
    for_each_partition(word.len(), |pairs, singles| {
        let mut vectors = Vec::with_capacity(pairs.len() + singles.len());
        for &(p, q) in pairs {
            let br = s.omega_apply(&word.letters()[p].horizontal, &word.letters()[q].horizontal);
            vectors.push(zero_h.iter().copied().chain(br.iter().map(|z| z * 0.5)).collect());
        }
        for &p in singles {
            vectors.push(fields[p].clone());
        }
        total += multilinear_derivative(f, &vectors, &coords);
    });
    Ok(total)
}

/// `Γ_P(w, w') = ½(0, ω(w, w') − ω(Pw, Pw'))` for the rank-`m` coordinate projection.
pub fn gamma_defect(
    s: &HeisenbergStructure,
    m: usize,
    g1: &GroupElement,
    g2: &GroupElement,
) -> Result<LieVector> {
    s.check_element(g1)?;
    s.check_element(g2)?;
    let n = s.n();
    if m > n {
        return Err(Error::InvalidArgument(format!("projection rank {m} exceeds n = {n}")));
    }
    let mut center = vec![C64::new(0.0, 0.0); s.center_dim()];
    for i in 0..n {
        for j in 0..n {
            if i < m && j < m {
                continue;
            }
            let x = g1.w[i] * g2.w[j] * 0.5;
            if x.norm_sqr() == 0.0 {
                continue;
            }
            for (o, w) in center.iter_mut().zip(s.omega_pair(i, j)) {
                *o += w * x;
            }
        }
    }
    Ok(LieVector::new(vec![C64::new(0.0, 0.0); s.n()], center))
}

/// Taylor tensor of the cylinder function `f ∘ π_m`, by symbolic composition.
pub fn cylinder_taylor_tensor(f: &HoloPoly, m: usize, max_rank: usize) -> Result<GradedTensor> {
    let n = f.structure().n();
    if m > n {
        return Err(Error::InvalidArgument(format!("projection rank {m} exceeds n = {n}")));
    }
    taylor_tensor(&f.compose_projection(m), max_rank)
}

/// Taylor tensor of `f ∘ π_m` evaluated as `⟨f̂(e), κₖ(word)⟩`, where `κₖ`
/// sums over partitions: each pair contributes `Γ_P` of its two letters and
/// each singleton its projection `π h`, singletons keeping their order.
pub fn cylinder_taylor_tensor_kappa(f: &HoloPoly, m: usize, max_rank: usize) -> Result<GradedTensor> {
    let s = f.structure().clone();
    let n = s.n();
    let nc = s.center_dim();
    if m > n {
        return Err(Error::InvalidArgument(format!("projection rank {m} exceeds n = {n}")));
    }
    let full = taylor_tensor(f, max_rank)?;
    let mut out = GradedTensor::zeros(s.clone(), max_rank);
    out.rank_mut(0)[0] = full.rank(0)[0];
    for k in 1..=max_rank {
        let size = full.rank(k).len();
        for idx in 0..size {
            let word = out.index_word(k, idx);
            let mut value = C64::new(0.0, 0.0);
            for_each_partition(k, |pairs, singles| {
                // projected singletons: horizontal letters at index >= m vanish
                if singles.iter().any(|&p| word[p] < n && word[p] >= m) {
                    return;
                }
                let mut gammas: Vec<&[C64]> = Vec::with_capacity(pairs.len());
                for &(p, q) in pairs {
                    let (a, b) = (word[p], word[q]);
                    if a >= n || b >= n || (a < m && b < m) {
                        return;
                    }
                    gammas.push(s.omega_pair(a, b));
                }
                let scale = 0.5f64.powi(pairs.len() as i32);
                // Σ over center components of each Γ
                let mut prefix = vec![0usize; pairs.len()];
                loop {
                    let mut coeff = C64::new(scale, 0.0);
                    for (g, &l) in gammas.iter().zip(&prefix) {
                        coeff *= g[l];
                    }
                    if coeff.norm_sqr() != 0.0 {
                        let mut letters: Vec<usize> = prefix.iter().map(|&l| n + l).collect();
                        letters.extend(singles.iter().map(|&p| word[p]));
                        value += coeff * full.get(&letters);
                    }
                    let mut slot = 0;
                    loop {
                        if slot == prefix.len() {
                            return;
                        }
                        prefix[slot] += 1;
                        if prefix[slot] < nc {
                            break;
                        }
                        prefix[slot] = 0;
                        slot += 1;
                    }
                }
            });
            out.rank_mut(k)[idx] = value;
        }
    }
    Ok(out)
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

/// `Σₖ (1/k!) ⟨αₖ, g^{⊗k}⟩` with `g` read as a Lie algebra element.
pub fn reconstruct(alpha: &GradedTensor, g: &GroupElement) -> Result<C64> {
    alpha.structure().check_element(g)?;
    let x = g.coords();
    let d = x.len();
    let mut total = C64::new(0.0, 0.0);
    for k in 0..=alpha.max_rank() {
        let mut v: Vec<C64> = alpha.rank(k).to_vec();
        for _ in 0..k {
            let len = v.len() / d;
            v = (0..len).map(|i| (0..d).map(|j| v[i * d + j] * x[j]).sum()).collect();
        }
        total += v[0] / factorial(k);
    }
    Ok(total)
}

/// The polynomial `g ↦ Σₖ (1/k!) ⟨αₖ, g^{⊗k}⟩`.
pub fn reconstruct_poly(alpha: &GradedTensor) -> HoloPoly {
    let s = alpha.structure().clone();
    let d = s.dim();
    let mut map: BTreeMap<Exponents, C64> = BTreeMap::new();
    for k in 0..=alpha.max_rank() {
        let inv = 1.0 / factorial(k);
        for (idx, z) in alpha.rank(k).iter().enumerate() {
            if z.norm_sqr() == 0.0 {
                continue;
            }
            let mut e = vec![0u32; d];
            for j in alpha.index_word(k, idx) {
                e[j] += 1;
            }
            *map.entry(e).or_insert(C64::new(0.0, 0.0)) += z * inv;
        }
    }
    HoloPoly::from_terms(s, map)
}

/// Distance `‖f̂ₖ(e) − (f∘π_m)^ₖ(e)‖ₖ` over horizontal words, for `m = 1..=n`.
pub fn projection_coefficient_distances(f: &HoloPoly, k: usize) -> Result<Vec<f64>> {
    let s: &Arc<HeisenbergStructure> = f.structure();
    let n = s.n();
    let max_rank = f.weighted_degree().max(k);
    let full = taylor_tensor(f, max_rank)?;
    let idx = full.restricted_word_indices(k, n);
    (1..=n)
        .map(|m| {
            let cyl = cylinder_taylor_tensor(f, m, max_rank)?;
            let a = full.rank(k);
            let b = cyl.rank(k);
            Ok(idx.iter().map(|&i| (a[i] - b[i]).norm_sqr()).sum::<f64>().sqrt())
        })
        .collect()
}
