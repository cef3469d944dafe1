//! Finite-rank functionals on the tensor algebra over `ℂⁿ⁺ᴺ`.
//!
//! Rank `k` is a dense array of `(n+N)^k` entries, row-major over words
//! `(j₁, …, jₖ)` with the first slot most significant. Letters `0..n` are
//! horizontal basis vectors `ηⱼ = (ξⱼ, 0)`, letters `n..n+N` are center
//! basis vectors.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::poly::same_structure;
use crate::structure::{HeisenbergStructure, C64};

#[derive(Clone, Debug)]
pub struct GradedTensor {
    structure: Arc<HeisenbergStructure>,
    ranks: Vec<Vec<C64>>,
}

#[derive(Serialize, Deserialize)]
struct TensorDoc {
    n: usize,
    #[serde(rename = "N")]
    center: usize,
    max_rank: usize,
    ranks: Vec<Vec<[f64; 2]>>,
}

impl GradedTensor {
    pub fn zeros(structure: Arc<HeisenbergStructure>, max_rank: usize) -> Self {
        let d = structure.dim();
        let ranks = (0..=max_rank).map(|k| vec![C64::new(0.0, 0.0); d.pow(k as u32)]).collect();
        Self { structure, ranks }
    }

    /// A tensor with only a rank-0 component.
    pub fn scalar(structure: Arc<HeisenbergStructure>, value: C64) -> Self {
        let mut t = Self::zeros(structure, 0);
        t.ranks[0][0] = value;
        t
    }

    pub fn from_ranks(structure: Arc<HeisenbergStructure>, ranks: Vec<Vec<C64>>) -> Result<Self> {
        let d = structure.dim();
        if ranks.is_empty() {
            return Err(Error::InvalidArgument("a tensor needs at least the rank-0 part".into()));
        }
        for (k, r) in ranks.iter().enumerate() {
            if r.len() != d.pow(k as u32) {
                return Err(Error::DimensionMismatch(format!(
                    "rank {k} has {} entries, expected {}",
                    r.len(),
                    d.pow(k as u32)
                )));
            }
        }
        Ok(Self { structure, ranks })
    }

    pub fn structure(&self) -> &Arc<HeisenbergStructure> {
        &self.structure
    }

    pub fn max_rank(&self) -> usize {
        self.ranks.len() - 1
    }

    pub fn dim(&self) -> usize {
        self.structure.dim()
    }

    pub fn rank(&self, k: usize) -> &[C64] {
        &self.ranks[k]
    }

    pub fn rank_mut(&mut self, k: usize) -> &mut [C64] {
        &mut self.ranks[k]
    }

    pub fn ranks(&self) -> &[Vec<C64>] {
        &self.ranks
    }

    pub fn word_index(&self, word: &[usize]) -> usize {
        let d = self.dim();
        word.iter().fold(0, |acc, &j| acc * d + j)
    }

    pub fn index_word(&self, k: usize, mut idx: usize) -> Vec<usize> {
        let d = self.dim();
        let mut w = vec![0; k];
        for slot in (0..k).rev() {
            w[slot] = idx % d;
            idx /= d;
        }
        w
    }

    /// Entry at a basis word; words longer than the stored rank read as zero.
    pub fn get(&self, word: &[usize]) -> C64 {
        match self.ranks.get(word.len()) {
            Some(r) => r[self.word_index(word)],
            None => C64::new(0.0, 0.0),
        }
    }

    pub fn set(&mut self, word: &[usize], value: C64) {
        let idx = self.word_index(word);
        self.ranks[word.len()][idx] = value;
    }

    /// Weighted degree of the word at `idx` in rank `k`: horizontal letters
    /// count 1, center letters count 2.
    pub fn word_weight(&self, k: usize, idx: usize) -> usize {
        let n = self.structure.n();
        self.index_word(k, idx).iter().map(|&j| if j < n { 1 } else { 2 }).sum()
    }

    /// Pads or truncates to `max_rank`.
    pub fn with_max_rank(&self, max_rank: usize) -> Self {
        let mut t = Self::zeros(self.structure.clone(), max_rank);
        for k in 0..=max_rank.min(self.max_rank()) {
            t.ranks[k].copy_from_slice(&self.ranks[k]);
        }
        t
    }

    pub fn sub(&self, other: &GradedTensor) -> Result<GradedTensor> {
        self.check_same(other)?;
        let r = self.max_rank().max(other.max_rank());
        let a = self.with_max_rank(r);
        let b = other.with_max_rank(r);
        let ranks = a
            .ranks
            .iter()
            .zip(&b.ranks)
            .map(|(x, y)| x.iter().zip(y).map(|(p, q)| p - q).collect())
            .collect();
        Ok(GradedTensor { structure: self.structure.clone(), ranks })
    }

    pub fn add(&self, other: &GradedTensor) -> Result<GradedTensor> {
        self.sub(&other.scale(C64::new(-1.0, 0.0)))
    }

    pub fn scale(&self, s: C64) -> GradedTensor {
        GradedTensor {
            structure: self.structure.clone(),
            ranks: self.ranks.iter().map(|r| r.iter().map(|z| z * s).collect()).collect(),
        }
    }

    /// Largest absolute entry difference over all words of all ranks.
    pub fn max_abs_diff(&self, other: &GradedTensor) -> f64 {
        match self.sub(other) {
            Ok(d) => d.ranks.iter().flatten().map(|z| z.norm()).fold(0.0, f64::max),
            Err(_) => f64::INFINITY,
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.ranks.iter().flatten().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub(crate) fn check_same(&self, other: &GradedTensor) -> Result<()> {
        if !same_structure(&self.structure, &other.structure) {
            return Err(Error::DimensionMismatch(format!(
                "tensors live on different structures '{}' and '{}'",
                self.structure.label(),
                other.structure.label()
            )));
        }
        Ok(())
    }

    /// Row-major indices (within rank `k`) of words whose letters are all
    /// horizontal with index `< m`.
    pub fn restricted_word_indices(&self, k: usize, m: usize) -> Vec<usize> {
        let d = self.dim();
        let m = m.min(self.structure.n());
        let mut out = vec![0usize];
        for _ in 0..k {
            let mut next = Vec::with_capacity(out.len() * m);
            for &base in &out {
                for j in 0..m {
                    next.push(base * d + j);
                }
            }
            out = next;
        }
        out
    }

    pub fn to_json(&self) -> String {
        let doc = TensorDoc {
            n: self.structure.n(),
            center: self.structure.center_dim(),
            max_rank: self.max_rank(),
            ranks: self.ranks.iter().map(|r| r.iter().map(|z| [z.re, z.im]).collect()).collect(),
        };
        serde_json::to_string(&doc).expect("tensor serializes")
    }

    pub fn from_json(structure: Arc<HeisenbergStructure>, text: &str) -> Result<Self> {
        let doc: TensorDoc = serde_json::from_str(text)?;
        if doc.n != structure.n() || doc.center != structure.center_dim() {
            return Err(Error::DimensionMismatch(format!(
                "tensor document has (n, N) = ({}, {}), structure has ({}, {})",
                doc.n,
                doc.center,
                structure.n(),
                structure.center_dim()
            )));
        }
        if doc.ranks.len() != doc.max_rank + 1 {
            return Err(Error::InvalidArgument("max_rank does not match the number of ranks".into()));
        }
        let ranks = doc.ranks.iter().map(|r| r.iter().map(|p| C64::new(p[0], p[1])).collect()).collect();
        Self::from_ranks(structure, ranks)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn word_indexing_round_trips() {
        let s = Arc::new(HeisenbergStructure::standard_heisenberg(1));
        let t = GradedTensor::zeros(s, 3);
        for idx in 0..27 {
            let w = t.index_word(3, idx);
            assert_eq!(t.word_index(&w), idx);
        }
        assert_eq!(t.word_index(&[1, 0, 2]), 9 + 2);
        assert_eq!(t.word_weight(3, t.word_index(&[1, 0, 2])), 4);
    }

    #[test]
    fn restricted_words_are_horizontal() {
        let s = Arc::new(HeisenbergStructure::standard_heisenberg(2));
        let t = GradedTensor::zeros(s, 2);
        let idx = t.restricted_word_indices(2, 2);
        let words: Vec<Vec<usize>> = idx.iter().map(|&i| t.index_word(2, i)).collect();
        assert_eq!(words, vec![vec![0, 0], vec![0, 1], vec![1, 0], vec![1, 1]]);
        assert_eq!(t.restricted_word_indices(0, 2), vec![0]);
        assert!(t.restricted_word_indices(3, 0).is_empty());
    }

    #[test]
    fn json_round_trip() {
        let s = Arc::new(HeisenbergStructure::standard_heisenberg(1));
        let mut t = GradedTensor::zeros(s.clone(), 2);
        t.set(&[], C64::new(1.5, -0.25));
        t.set(&[0, 1], C64::new(0.5, 0.0));
        t.set(&[2], C64::new(-1e-300, 3.0));
        let back = GradedTensor::from_json(s.clone(), &t.to_json()).unwrap();
        assert_eq!(back.ranks(), t.ranks());
        let other = Arc::new(HeisenbergStructure::abelian(3));
        assert!(GradedTensor::from_json(other, &t.to_json()).is_err());
    }

    #[test]
    fn get_beyond_rank_is_zero() {
        let s = Arc::new(HeisenbergStructure::abelian(1));
        let t = GradedTensor::scalar(s, C64::new(2.0, 0.0));
        assert_eq!(t.get(&[]), C64::new(2.0, 0.0));
        assert_eq!(t.get(&[0, 0]), C64::new(0.0, 0.0));
    }
}
