#![allow(dead_code)]

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use subtaylor::{GroupElement, HeisenbergStructure, HoloPoly, C64};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn heisenberg() -> Arc<HeisenbergStructure> {
    Arc::new(HeisenbergStructure::standard_heisenberg(1))
}

/// `(n, N) = (4, 2)` with a seeded Hörmander form.
pub fn random_4x2() -> Arc<HeisenbergStructure> {
    Arc::new(HeisenbergStructure::weighted_family(4, 2, &[1.0; 4], 31).unwrap())
}

pub fn weighted_8x1() -> Arc<HeisenbergStructure> {
    let q: Vec<f64> = (1..=8).map(|j| 2f64.powi(-j)).collect();
    Arc::new(HeisenbergStructure::weighted_family(8, 1, &q, 5).unwrap())
}

pub fn normal_c<R: Rng>(rng: &mut R, sd: f64) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im) * (sd / 2f64.sqrt())
}

pub fn random_element<R: Rng>(s: &HeisenbergStructure, rng: &mut R, sd: f64) -> GroupElement {
    GroupElement::new(
        (0..s.n()).map(|_| normal_c(rng, sd)).collect(),
        (0..s.center_dim()).map(|_| normal_c(rng, sd * sd)).collect(),
    )
}

/// Seeded random polynomials with five terms each.
pub fn poly_suite(s: &Arc<HeisenbergStructure>, seed: u64, count: usize, max_wdeg: usize) -> Vec<HoloPoly> {
    let mut r = rng(seed);
    (0..count).map(|_| HoloPoly::random(s.clone(), &mut r, max_wdeg, 5)).collect()
}
