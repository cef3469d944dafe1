//! Horizontal Fock norms and the operations on graded tensors that go with
//! them: the `J⁰` test, the `Ψ` pullback, phase rotation, and Fejér
//! truncation.
//!
//! `‖α‖²_t = Σₖ (tᵏ/k!) Σ |⟨αₖ, η_{j₁}⊗⋯⊗η_{jₖ}⟩|²`, the inner sum running
//! over purely horizontal words only.

use std::f64::consts::PI;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::structure::C64;
use crate::tensor::GradedTensor;

fn factorial(k: usize) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

/// `Σₖ (tᵏ/k!) Σ_{words ⊂ {1..m}^k} ⟨α, word⟩ conj⟨β, word⟩`.
fn restricted_inner(alpha: &GradedTensor, beta: &GradedTensor, t: f64, m: usize) -> C64 {
    let r = alpha.max_rank().min(beta.max_rank());
    let mut total = C64::new(0.0, 0.0);
    for k in 0..=r {
        let weight = t.powi(k as i32) / factorial(k);
        let (a, b) = (alpha.rank(k), beta.rank(k));
        let s: C64 = alpha.restricted_word_indices(k, m).iter().map(|&i| a[i] * b[i].conj()).sum();
        total += s * weight;
    }
    total
}

fn check_time(t: f64) -> Result<()> {
    if t <= 0.0 || !t.is_finite() {
        return Err(Error::InvalidArgument(format!("time must be positive, got {t}")));
    }
    Ok(())
}

pub fn fock_norm_sq(alpha: &GradedTensor, t: f64) -> Result<f64> {
    check_time(t)?;
    let n = alpha.structure().n();
    Ok(restricted_inner(alpha, alpha, t, n).re)
}

/// Sesquilinear (linear in `α`) horizontal Fock inner product.
pub fn fock_inner(alpha: &GradedTensor, beta: &GradedTensor, t: f64) -> Result<C64> {
    check_time(t)?;
    alpha.check_same(beta)?;
    let n = alpha.structure().n();
    let r = alpha.max_rank().max(beta.max_rank());
    Ok(restricted_inner(&alpha.with_max_rank(r), &beta.with_max_rank(r), t, n))
}

/// The Fock norm with horizontal letters restricted to `ξ₁..ξ_m`.
pub fn restrict_basis_norm_sq(alpha: &GradedTensor, t: f64, m: usize) -> Result<f64> {
    check_time(t)?;
    let n = alpha.structure().n();
    if m > n {
        return Err(Error::InvalidArgument(format!("restriction rank {m} exceeds n = {n}")));
    }
    Ok(restricted_inner(alpha, alpha, t, m).re)
}

/// `max |⟨α, u⊗(h⊗k − k⊗h − [h,k])⊗v⟩|` over basis words `u, v` and basis
/// letters `h, k`, for generator words of total length `≤ max_word_len`.
pub fn j0_residual(alpha: &GradedTensor, max_word_len: usize) -> Result<f64> {
    if max_word_len > alpha.max_rank() {
        return Err(Error::InvalidArgument(format!(
            "word length {max_word_len} exceeds stored rank {}",
            alpha.max_rank()
        )));
    }
    let s = alpha.structure();
    let (n, d) = (s.n(), s.dim());
    let mut worst: f64 = 0.0;
    for k in 2..=max_word_len {
        let rank = alpha.rank(k);
        let lower = alpha.rank(k - 1);
        for p in 0..=(k - 2) {
            let q = k - 2 - p;
            let dq = d.pow(q as u32);
            for u in 0..d.pow(p as u32) {
                for h in 0..d {
                    for kk in 0..d {
                        for v in 0..dq {
                            let hk = ((u * d + h) * d + kk) * dq + v;
                            let kh = ((u * d + kk) * d + h) * dq + v;
                            let mut r = rank[hk] - rank[kh];
                            if h < n && kk < n {
                                for (l, w) in s.omega_pair(h, kk).iter().enumerate() {
                                    r -= w * lower[(u * d + n + l) * dq + v];
                                }
                            }
                            worst = worst.max(r.norm());
                        }
                    }
                }
            }
        }
    }
    Ok(worst)
}

/// Images `ψ(letter)` as sparse horizontal words: `ψ(ηⱼ) = ηⱼ` and
/// `ψ(e_m) = Σ_ℓ εˡ(e_m) (A_ℓ ⊗ B_ℓ − B_ℓ ⊗ A_ℓ)`.
fn psi_letters(alpha: &GradedTensor) -> Result<Vec<Vec<(Vec<usize>, C64)>>> {
    let s = alpha.structure();
    let n = s.n();
    let basis = s.bracket_basis()?;
    let mut out: Vec<Vec<(Vec<usize>, C64)>> = (0..n).map(|j| vec![(vec![j], C64::new(1.0, 0.0))]).collect();
    for m in 0..s.center_dim() {
        let mut img = Vec::new();
        for (l, &(a, b)) in basis.pairs.iter().enumerate() {
            let eps = basis.dual[(l, m)];
            if eps.norm_sqr() == 0.0 {
                continue;
            }
            img.push((vec![a, b], eps));
            img.push((vec![b, a], -eps));
        }
        out.push(img);
    }
    Ok(out)
}

/// `α ∘ Ψ`: the value on any word is `α` evaluated on the horizontal
/// expansion of that word, so only the horizontal entries of `α` are read.
/// Entries whose expansion exceeds the stored rank read `α` as zero there.
pub fn psi_pullback(alpha: &GradedTensor) -> Result<GradedTensor> {
    let images = psi_letters(alpha)?;
    let mut out = GradedTensor::zeros(alpha.structure().clone(), alpha.max_rank());
    out.rank_mut(0)[0] = alpha.rank(0)[0];
    for k in 1..=alpha.max_rank() {
        for idx in 0..alpha.rank(k).len() {
            let word = alpha.index_word(k, idx);
            let mut expansion: Vec<(Vec<usize>, C64)> = vec![(Vec::new(), C64::new(1.0, 0.0))];
            for &letter in &word {
                let mut next = Vec::with_capacity(expansion.len() * images[letter].len());
                for (prefix, c) in &expansion {
                    for (piece, c2) in &images[letter] {
                        let mut w = prefix.clone();
                        w.extend_from_slice(piece);
                        next.push((w, c * c2));
                    }
                }
                expansion = next;
            }
            let value: C64 = expansion.iter().map(|(w, c)| c * alpha.get(w)).sum();
            out.rank_mut(k)[idx] = value;
        }
    }
    Ok(out)
}

/// `α ∘ Φ_θ`: the entry at a word of weighted degree `ℓ` picks up `e^{iℓθ}`.
pub fn phase_pullback(alpha: &GradedTensor, theta: f64) -> GradedTensor {
    let mut out = alpha.clone();
    for k in 0..=alpha.max_rank() {
        for idx in 0..alpha.rank(k).len() {
            let l = alpha.word_weight(k, idx) as f64;
            out.rank_mut(k)[idx] *= C64::from_polar(1.0, l * theta);
        }
    }
    out
}

/// Fourier coefficient `(1 − ℓ/n)₊` of the Fejér kernel `F_n`.
pub fn fejer_multiplier(weight: usize, n_fejer: usize) -> f64 {
    (1.0 - weight as f64 / n_fejer as f64).max(0.0)
}

/// `α(n) = ∫ F_n(θ) α∘Φ_θ dθ` via the exact Fourier multipliers.
pub fn fejer_truncate(alpha: &GradedTensor, n_fejer: i64) -> Result<GradedTensor> {
    if n_fejer <= 0 {
        return Err(Error::InvalidArgument(format!("Fejér order must be positive, got {n_fejer}")));
    }
    let nf = n_fejer as usize;
    let mut out = alpha.clone();
    for k in 0..=alpha.max_rank() {
        for idx in 0..alpha.rank(k).len() {
            let m = fejer_multiplier(alpha.word_weight(k, idx), nf);
            out.rank_mut(k)[idx] *= m;
        }
    }
    Ok(out)
}

/// `F_n(θ) = sin²(nθ/2) / (2πn sin²(θ/2))`, normalized to unit mass on `[−π, π]`.
pub fn fejer_kernel(n_fejer: usize, theta: f64) -> f64 {
    let n = n_fejer as f64;
    let den = (theta / 2.0).sin();
    if den.abs() < 1e-12 {
        return n / (2.0 * PI);
    }
    let num = (n * theta / 2.0).sin();
    num * num / (2.0 * PI * n * den * den)
}

/// Node count that makes the trapezoid rule exact for `F_n(θ) e^{iℓθ}`
/// with `ℓ ≤ 2·max_rank`.
pub fn fejer_quadrature_nodes(n_fejer: usize, max_rank: usize) -> usize {
    (4 * n_fejer).max(n_fejer + 2 * max_rank + 1)
}

/// Cross-check of [`fejer_truncate`] by trapezoid quadrature in `θ`.
pub fn fejer_truncate_quadrature(alpha: &GradedTensor, n_fejer: i64) -> Result<GradedTensor> {
    if n_fejer <= 0 {
        return Err(Error::InvalidArgument(format!("Fejér order must be positive, got {n_fejer}")));
    }
    let nf = n_fejer as usize;
    let nodes = fejer_quadrature_nodes(nf, alpha.max_rank());
    let dtheta = 2.0 * PI / nodes as f64;
    let mut out = GradedTensor::zeros(alpha.structure().clone(), alpha.max_rank());
    for q in 0..nodes {
        let theta = -PI + q as f64 * dtheta;
        let w = fejer_kernel(nf, theta) * dtheta;
        let rotated = phase_pullback(alpha, theta);
        for k in 0..=alpha.max_rank() {
            for (o, z) in out.rank_mut(k).iter_mut().zip(rotated.rank(k)) {
                *o += z * w;
            }
        }
    }
    Ok(out)
}

/// Re-expresses `α` in the rotated horizontal frame `ξ'ⱼ = Σᵢ U[i][j] ξᵢ`;
/// center letters are left alone.
pub fn reframe_horizontal(alpha: &GradedTensor, unitary: &DMatrix<C64>) -> Result<GradedTensor> {
    let s = alpha.structure();
    let (n, d) = (s.n(), s.dim());
    if unitary.nrows() != n || unitary.ncols() != n {
        return Err(Error::DimensionMismatch(format!("frame change must be {n}×{n}")));
    }
    // full change of basis on ℂ^{n+N}: new letter j = Σ_i M[i][j] old letter i
    let mut m = DMatrix::<C64>::identity(d, d);
    m.view_mut((0, 0), (n, n)).copy_from(unitary);
    let mut out = alpha.clone();
    for k in 1..=alpha.max_rank() {
        let mut v = alpha.rank(k).to_vec();
        // contract each slot in turn
        for slot in 0..k {
            let stride = d.pow((k - 1 - slot) as u32);
            let mut next = vec![C64::new(0.0, 0.0); v.len()];
            for idx in 0..v.len() {
                let letter = (idx / stride) % d;
                let base = idx - letter * stride;
                let mut acc = C64::new(0.0, 0.0);
                for i in 0..d {
                    let mij = m[(i, letter)];
                    if mij.norm_sqr() != 0.0 {
                        acc += mij * v[base + i * stride];
                    }
                }
                next[idx] = acc;
            }
            v = next;
        }
        out.rank_mut(k).copy_from_slice(&v);
    }
    Ok(out)
}
