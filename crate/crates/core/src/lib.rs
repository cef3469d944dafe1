//! Holomorphic functions on complex step-two nilpotent groups: the group
//! law, left-invariant calculus, Taylor coefficients in a horizontal Fock
//! space, Monte Carlo heat-kernel norms, and sub-Riemannian distance
//! estimates.

pub mod calculus;
pub mod error;
pub mod fock;
pub mod geometry;
pub mod mc;
pub mod poly;
pub mod structure;
pub mod tensor;

pub use calculus::{lie_derive, taylor_tensor, DerivativeWord};
pub use error::{Error, Result};
pub use poly::HoloPoly;
pub use structure::{GroupElement, HeisenbergStructure, LieVector, C64};
pub use tensor::GradedTensor;
