//! Sparse holomorphic polynomials in the coordinates `(w₁..wₙ, c₁..c_N)`.
//!
//! Monomials are keyed by exponent vectors of length `n + N` and kept in
//! lexicographic order. The weighted degree counts `w`-exponents once and
//! `c`-exponents twice.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use rand::seq::IndexedRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::structure::{GroupElement, HeisenbergStructure, C64};

pub type Exponents = Vec<u32>;

#[derive(Clone, Debug)]
pub struct HoloPoly {
    structure: Arc<HeisenbergStructure>,
    terms: BTreeMap<Exponents, C64>,
    weighted_degree: usize,
}

pub(crate) fn same_structure(a: &Arc<HeisenbergStructure>, b: &Arc<HeisenbergStructure>) -> bool {
    Arc::ptr_eq(a, b) || a == b
}

fn weighted_degree_of(n: usize, e: &[u32]) -> usize {
    e.iter().enumerate().map(|(i, &k)| if i < n { k as usize } else { 2 * k as usize }).sum()
}

impl HoloPoly {
    pub fn zero(structure: Arc<HeisenbergStructure>) -> Self {
        Self { structure, terms: BTreeMap::new(), weighted_degree: 0 }
    }

    pub fn constant(structure: Arc<HeisenbergStructure>, value: C64) -> Self {
        let d = structure.dim();
        Self::from_terms(structure, [(vec![0; d], value)])
    }

    /// The coordinate function `x_idx`, with horizontal indices first
    /// (`idx < n` is `w_{idx+1}`, otherwise `c_{idx-n+1}`).
    pub fn coordinate(structure: Arc<HeisenbergStructure>, idx: usize) -> Self {
        let mut e = vec![0; structure.dim()];
        e[idx] = 1;
        Self::from_terms(structure, [(e, C64::new(1.0, 0.0))])
    }

    pub fn monomial(structure: Arc<HeisenbergStructure>, exponents: Exponents, coeff: C64) -> Self {
        Self::from_terms(structure, [(exponents, coeff)])
    }

    /// Builds a polynomial, summing duplicate monomials and dropping zeros.
    pub fn from_terms(
        structure: Arc<HeisenbergStructure>,
        terms: impl IntoIterator<Item = (Exponents, C64)>,
    ) -> Self {
        let mut map: BTreeMap<Exponents, C64> = BTreeMap::new();
        let d = structure.dim();
        for (e, c) in terms {
            assert_eq!(e.len(), d, "exponent vector length must be n + N");
            *map.entry(e).or_insert(C64::new(0.0, 0.0)) += c;
        }
        Self::from_map(structure, map)
    }

    fn from_map(structure: Arc<HeisenbergStructure>, mut terms: BTreeMap<Exponents, C64>) -> Self {
        terms.retain(|_, c| c.norm_sqr() != 0.0);
        let n = structure.n();
        let weighted_degree = terms.keys().map(|e| weighted_degree_of(n, e)).max().unwrap_or(0);
        Self { structure, terms, weighted_degree }
    }

    pub fn structure(&self) -> &Arc<HeisenbergStructure> {
        &self.structure
    }

    pub fn terms(&self) -> &BTreeMap<Exponents, C64> {
        &self.terms
    }

    pub fn coefficient(&self, e: &[u32]) -> C64 {
        self.terms.get(e).copied().unwrap_or(C64::new(0.0, 0.0))
    }

    pub fn weighted_degree(&self) -> usize {
        self.weighted_degree
    }

    pub fn recompute_weighted_degree(&self) -> usize {
        let n = self.structure.n();
        self.terms.keys().map(|e| weighted_degree_of(n, e)).max().unwrap_or(0)
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    fn check_same(&self, other: &HoloPoly) -> Result<()> {
        if !same_structure(&self.structure, &other.structure) {
            return Err(Error::DimensionMismatch(format!(
                "polynomials live on different structures '{}' and '{}'",
                self.structure.label(),
                other.structure.label()
            )));
        }
        Ok(())
    }

    pub fn add(&self, other: &HoloPoly) -> Result<HoloPoly> {
        self.check_same(other)?;
        let mut map = self.terms.clone();
        for (e, c) in &other.terms {
            *map.entry(e.clone()).or_insert(C64::new(0.0, 0.0)) += c;
        }
        Ok(Self::from_map(self.structure.clone(), map))
    }

    pub fn sub(&self, other: &HoloPoly) -> Result<HoloPoly> {
        self.add(&other.scale(C64::new(-1.0, 0.0)))
    }

    pub fn scale(&self, s: C64) -> HoloPoly {
        let map = self.terms.iter().map(|(e, c)| (e.clone(), c * s)).collect();
        Self::from_map(self.structure.clone(), map)
    }

    pub fn mul(&self, other: &HoloPoly) -> Result<HoloPoly> {
        self.check_same(other)?;
        let mut map: BTreeMap<Exponents, C64> = BTreeMap::new();
        for (e1, c1) in &self.terms {
            for (e2, c2) in &other.terms {
                let e: Exponents = e1.iter().zip(e2).map(|(a, b)| a + b).collect();
                *map.entry(e).or_insert(C64::new(0.0, 0.0)) += c1 * c2;
            }
        }
        Ok(Self::from_map(self.structure.clone(), map))
    }

    /// `∂f/∂x_idx`.
    pub fn partial(&self, idx: usize) -> HoloPoly {
        let mut map: BTreeMap<Exponents, C64> = BTreeMap::new();
        for (e, c) in &self.terms {
            if e[idx] == 0 {
                continue;
            }
            let mut e2 = e.clone();
            e2[idx] -= 1;
            *map.entry(e2).or_insert(C64::new(0.0, 0.0)) += c * e[idx] as f64;
        }
        Self::from_map(self.structure.clone(), map)
    }

    /// Linear directional derivative `f'(·)v` for a fixed `v ∈ ℂⁿ⁺ᴺ`.
    pub fn directional(&self, v: &[C64]) -> HoloPoly {
        let mut map: BTreeMap<Exponents, C64> = BTreeMap::new();
        for (e, c) in &self.terms {
            for (idx, vi) in v.iter().enumerate() {
                if e[idx] == 0 || vi.norm_sqr() == 0.0 {
                    continue;
                }
                let mut e2 = e.clone();
                e2[idx] -= 1;
                *map.entry(e2).or_insert(C64::new(0.0, 0.0)) += c * vi * e[idx] as f64;
            }
        }
        Self::from_map(self.structure.clone(), map)
    }

    pub fn evaluate(&self, g: &GroupElement) -> Result<C64> {
        self.structure.check_element(g)?;
        Ok(self.evaluate_coords(&g.coords()))
    }

    /// Evaluates at raw coordinates `(w, c)`; the caller guarantees length `n + N`.
    pub fn evaluate_coords(&self, x: &[C64]) -> C64 {
        let maxdeg = self.terms.keys().flat_map(|e| e.iter().copied()).max().unwrap_or(0) as usize;
        let powers: Vec<Vec<C64>> = x
            .iter()
            .map(|&xi| {
                let mut p = Vec::with_capacity(maxdeg + 1);
                let mut acc = C64::new(1.0, 0.0);
                for _ in 0..=maxdeg {
                    p.push(acc);
                    acc *= xi;
                }
                p
            })
            .collect();
        self.terms
            .iter()
            .map(|(e, c)| e.iter().enumerate().fold(*c, |acc, (i, &k)| acc * powers[i][k as usize]))
            .sum()
    }

    /// The cylinder function `f ∘ π_m`: horizontal coordinates above `m` are set to zero.
    pub fn compose_projection(&self, m: usize) -> HoloPoly {
        let n = self.structure.n();
        let map = self
            .terms
            .iter()
            .filter(|(e, _)| e[m.min(n)..n].iter().all(|&k| k == 0))
            .map(|(e, c)| (e.clone(), *c))
            .collect();
        Self::from_map(self.structure.clone(), map)
    }

    /// Largest coefficient difference; infinite when structures differ.
    pub fn max_coeff_diff(&self, other: &HoloPoly) -> f64 {
        if self.check_same(other).is_err() {
            return f64::INFINITY;
        }
        let mut worst: f64 = 0.0;
        for (e, c) in &self.terms {
            worst = worst.max((c - other.coefficient(e)).norm());
        }
        for (e, c) in &other.terms {
            if !self.terms.contains_key(e) {
                worst = worst.max(c.norm());
            }
        }
        worst
    }

    /// All exponent vectors of weighted degree `≤ max_weighted_degree`.
    pub fn monomials_up_to(structure: &HeisenbergStructure, max_weighted_degree: usize) -> Vec<Exponents> {
        fn rec(
            idx: usize,
            n: usize,
            d: usize,
            budget: usize,
            cur: &mut Exponents,
            out: &mut Vec<Exponents>,
        ) {
            if idx == d {
                out.push(cur.clone());
                return;
            }
            let w = if idx < n { 1 } else { 2 };
            let mut k = 0;
            while k * w <= budget {
                cur[idx] = k as u32;
                rec(idx + 1, n, d, budget - k * w, cur, out);
                k += 1;
            }
            cur[idx] = 0;
        }
        let mut out = Vec::new();
        let mut cur = vec![0; structure.dim()];
        rec(0, structure.n(), structure.dim(), max_weighted_degree, &mut cur, &mut out);
        out.sort();
        out
    }

    /// A random polynomial with `n_terms` distinct monomials of weighted
    /// degree at most `max_weighted_degree` and standard complex Gaussian
    /// coefficients.
    pub fn random<R: Rng + ?Sized>(
        structure: Arc<HeisenbergStructure>,
        rng: &mut R,
        max_weighted_degree: usize,
        n_terms: usize,
    ) -> HoloPoly {
        let all = Self::monomials_up_to(&structure, max_weighted_degree);
        let picked: Vec<&Exponents> = all.choose_multiple(rng, n_terms.min(all.len())).collect();
        let terms = picked.into_iter().map(|e| {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            (e.clone(), C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2)
        });
        Self::from_terms(structure, terms.collect::<Vec<_>>())
    }

    /// Emits the literal form `(re+imi) * w1^2 * c1 + ...`.
    pub fn to_literal(&self) -> String {
        if self.terms.is_empty() {
            return "0".to_string();
        }
        let n = self.structure.n();
        let mut parts = Vec::with_capacity(self.terms.len());
        for (e, c) in &self.terms {
            let sign = if c.im.is_sign_negative() { '-' } else { '+' };
            let mut s = format!("({}{}{}i)", c.re, sign, c.im.abs());
            for (i, &k) in e.iter().enumerate() {
                if k == 0 {
                    continue;
                }
                let var = if i < n { format!("w{}", i + 1) } else { format!("c{}", i - n + 1) };
                if k == 1 {
                    s.push_str(&format!(" * {var}"));
                } else {
                    s.push_str(&format!(" * {var}^{k}"));
                }
            }
            parts.push(s);
        }
        parts.join(" + ")
    }

    /// Parses a polynomial literal. Accepts the emitted form plus ordinary
    /// shorthand such as `w1*w2 + 2*c1 - 0.5i*w1^3`.
    pub fn parse(structure: Arc<HeisenbergStructure>, text: &str) -> Result<HoloPoly> {
        let mut p = Parser { s: text.as_bytes(), pos: 0, structure };
        let poly = p.expr()?;
        p.skip_ws();
        if p.pos != p.s.len() {
            return Err(p.err("unexpected trailing input"));
        }
        Ok(poly)
    }
}

impl PartialEq for HoloPoly {
    fn eq(&self, other: &Self) -> bool {
        same_structure(&self.structure, &other.structure) && self.terms == other.terms
    }
}

impl fmt::Display for HoloPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_literal())
    }
}

struct Parser<'a> {
    s: &'a [u8],
    pos: usize,
    structure: Arc<HeisenbergStructure>,
}

impl Parser<'_> {
    fn err(&self, msg: &str) -> Error {
        Error::Parse { pos: self.pos, msg: msg.to_string() }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.s.len() && self.s[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.s.get(self.pos).copied()
    }

    fn constant(&self, z: C64) -> HoloPoly {
        HoloPoly::constant(self.structure.clone(), z)
    }

    fn expr(&mut self) -> Result<HoloPoly> {
        let mut negate = false;
        match self.peek() {
            Some(b'+') => self.pos += 1,
            Some(b'-') => {
                self.pos += 1;
                negate = true;
            }
            _ => {}
        }
        let mut acc = self.term()?;
        if negate {
            acc = acc.scale(C64::new(-1.0, 0.0));
        }
        loop {
            match self.peek() {
                Some(b'+') => {
                    self.pos += 1;
                    let t = self.term()?;
                    acc = acc.add(&t)?;
                }
                Some(b'-') => {
                    self.pos += 1;
                    let t = self.term()?;
                    acc = acc.sub(&t)?;
                }
                _ => return Ok(acc),
            }
        }
    }

    fn term(&mut self) -> Result<HoloPoly> {
        let mut acc = self.factor()?;
        while self.peek() == Some(b'*') {
            self.pos += 1;
            let f = self.factor()?;
            acc = acc.mul(&f)?;
        }
        Ok(acc)
    }

    fn factor(&mut self) -> Result<HoloPoly> {
        match self.peek() {
            Some(b'(') => {
                if let Some(z) = self.try_complex_literal() {
                    return Ok(self.constant(z));
                }
                self.pos += 1;
                let inner = self.expr()?;
                if self.peek() != Some(b')') {
                    return Err(self.err("expected ')'"));
                }
                self.pos += 1;
                Ok(inner)
            }
            Some(b'i') => {
                self.pos += 1;
                Ok(self.constant(C64::new(0.0, 1.0)))
            }
            Some(b'w') | Some(b'c') => self.variable(),
            Some(b) if b.is_ascii_digit() || b == b'.' => {
                let v = self.number()?;
                if self.s.get(self.pos) == Some(&b'i') {
                    self.pos += 1;
                    Ok(self.constant(C64::new(0.0, v)))
                } else {
                    Ok(self.constant(C64::new(v, 0.0)))
                }
            }
            Some(_) => Err(self.err("unexpected character")),
            None => Err(self.err("unexpected end of input")),
        }
    }

    /// Exact fast path for `(re±imi)` so that signed zeros survive.
    fn try_complex_literal(&mut self) -> Option<C64> {
        let start = self.pos;
        let res = (|| {
            self.pos += 1;
            self.skip_ws();
            let re_neg = self.eat(b'-');
            let re = self.number().ok()?;
            self.skip_ws();
            let im_neg = match self.s.get(self.pos)? {
                b'+' => false,
                b'-' => true,
                _ => return None,
            };
            self.pos += 1;
            self.skip_ws();
            let im = self.number().ok()?;
            if !self.eat(b'i') {
                return None;
            }
            self.skip_ws();
            if !self.eat(b')') {
                return None;
            }
            Some(C64::new(if re_neg { -re } else { re }, if im_neg { -im } else { im }))
        })();
        if res.is_none() {
            self.pos = start;
        }
        res
    }

    fn eat(&mut self, b: u8) -> bool {
        if self.s.get(self.pos) == Some(&b) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn number(&mut self) -> Result<f64> {
        let start = self.pos;
        while self.pos < self.s.len() && (self.s[self.pos].is_ascii_digit() || self.s[self.pos] == b'.') {
            self.pos += 1;
        }
        if self.pos < self.s.len() && (self.s[self.pos] == b'e' || self.s[self.pos] == b'E') {
            let save = self.pos;
            self.pos += 1;
            if self.pos < self.s.len() && (self.s[self.pos] == b'+' || self.s[self.pos] == b'-') {
                self.pos += 1;
            }
            let digits = self.pos;
            while self.pos < self.s.len() && self.s[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
            if digits == self.pos {
                self.pos = save;
            }
        }
        let text = std::str::from_utf8(&self.s[start..self.pos]).expect("ascii");
        text.parse::<f64>().map_err(|_| Error::Parse { pos: start, msg: format!("bad number '{text}'") })
    }

    fn index(&mut self) -> Result<usize> {
        let start = self.pos;
        while self.pos < self.s.len() && self.s[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        let text = std::str::from_utf8(&self.s[start..self.pos]).expect("ascii");
        text.parse::<usize>().map_err(|_| Error::Parse { pos: start, msg: "expected an integer".into() })
    }

    fn variable(&mut self) -> Result<HoloPoly> {
        let kind = self.s[self.pos];
        self.pos += 1;
        let at = self.pos;
        let idx = self.index()?;
        let (n, nc) = (self.structure.n(), self.structure.center_dim());
        let slot = match kind {
            b'w' if (1..=n).contains(&idx) => idx - 1,
            b'c' if (1..=nc).contains(&idx) => n + idx - 1,
            _ => {
                return Err(Error::Parse {
                    pos: at,
                    msg: format!("variable {}{idx} is out of range for n={n}, N={nc}", kind as char),
                })
            }
        };
        let mut power = 1u32;
        if self.peek() == Some(b'^') {
            self.pos += 1;
            self.skip_ws();
            power = self.index()? as u32;
        }
        let mut e = vec![0; self.structure.dim()];
        e[slot] = power;
        Ok(HoloPoly::monomial(self.structure.clone(), e, C64::new(1.0, 0.0)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn heis() -> Arc<HeisenbergStructure> {
        Arc::new(HeisenbergStructure::standard_heisenberg(1))
    }

    #[test]
    fn evaluate_examples() {
        let s = heis();
        let one = HoloPoly::constant(s.clone(), C64::new(1.0, 0.0));
        let g = GroupElement::from_real(&[3.0, -1.0], &[2.0]);
        assert_eq!(one.evaluate(&g).unwrap(), C64::new(1.0, 0.0));
        let c1 = HoloPoly::parse(s.clone(), "c1").unwrap();
        assert_eq!(c1.evaluate(&s.identity()).unwrap(), C64::new(0.0, 0.0));
        let f = HoloPoly::parse(s.clone(), "w1*w2 + c1").unwrap();
        let g = GroupElement::from_real(&[1.0, 2.0], &[3.0]);
        assert_eq!(f.evaluate(&g).unwrap(), C64::new(5.0, 0.0));
    }

    #[test]
    fn weighted_degree_counts_center_twice() {
        let s = heis();
        let f = HoloPoly::parse(s.clone(), "w1^3 + c1^2 + w2*c1").unwrap();
        assert_eq!(f.weighted_degree(), 4);
        assert_eq!(f.recompute_weighted_degree(), 4);
        assert_eq!(HoloPoly::zero(s).weighted_degree(), 0);
    }

    #[test]
    fn parser_shorthand() {
        let s = heis();
        let f = HoloPoly::parse(s.clone(), "-2i*w1^2 + (1+2i)*(w2 - c1) - 3").unwrap();
        assert_eq!(f.coefficient(&[2, 0, 0]), C64::new(0.0, -2.0));
        assert_eq!(f.coefficient(&[0, 1, 0]), C64::new(1.0, 2.0));
        assert_eq!(f.coefficient(&[0, 0, 1]), C64::new(-1.0, -2.0));
        assert_eq!(f.coefficient(&[0, 0, 0]), C64::new(-3.0, 0.0));
        assert!(HoloPoly::parse(s.clone(), "w3").is_err());
        assert!(HoloPoly::parse(s.clone(), "w1 +").is_err());
        assert!(HoloPoly::parse(s, "w1 ) ").is_err());
    }

    #[test]
    fn projection_drops_cut_coordinates() {
        let s = Arc::new(HeisenbergStructure::standard_heisenberg(2));
        let f = HoloPoly::parse(s.clone(), "w1*w3 + w2 + c1 + w4^2").unwrap();
        let g = f.compose_projection(2);
        assert_eq!(g, HoloPoly::parse(s, "w2 + c1").unwrap());
    }

    #[test]
    fn monomial_enumeration() {
        let s = heis();
        let all = HoloPoly::monomials_up_to(&s, 2);
        // 1, w1, w2, w1², w1w2, w2², c1
        assert_eq!(all.len(), 7);
        assert!(all.windows(2).all(|p| p[0] < p[1]));
    }

    proptest! {
        #[test]
        fn literal_round_trip(seed in any::<u64>(), deg in 0usize..5, terms in 1usize..8) {
            let s = Arc::new(HeisenbergStructure::weighted_family(3, 2, &[1.0, 0.5, 0.25], 1).unwrap());
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let f = HoloPoly::random(s.clone(), &mut rng, deg, terms);
            let text = f.to_literal();
            let back = HoloPoly::parse(s, &text).unwrap();
            prop_assert_eq!(&back, &f);
            prop_assert_eq!(back.to_literal(), text);
        }

        #[test]
        fn product_evaluates_pointwise(seed in any::<u64>()) {
            let s = heis();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let f = HoloPoly::random(s.clone(), &mut rng, 3, 4);
            let g = HoloPoly::random(s.clone(), &mut rng, 3, 4);
            let x = [C64::new(0.3, -0.1), C64::new(-1.2, 0.4), C64::new(0.5, 0.5)];
            let lhs = f.mul(&g).unwrap().evaluate_coords(&x);
            let rhs = f.evaluate_coords(&x) * g.evaluate_coords(&x);
            prop_assert!((lhs - rhs).norm() < 1e-10 * (1.0 + rhs.norm()));
        }
    }
}
