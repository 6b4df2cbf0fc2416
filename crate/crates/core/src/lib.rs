//! Numerical core for studying benign overfitting of the minimum ℓ2-norm
//! interpolant in anisotropic linear regression.
//!
//! The crate is `no_std` (it only needs `alloc`) and is organised around the
//! covariance spectrum of the design:
//!
//! - [`spectrum`]: trace and effective-rank functionals, Gaussian mean width,
//!   Dvoretsky dimension, `k*_b`, `k**`, the complexity fixed point `R_N`, the
//!   `J1`/`J2` split and thresholded inverse weights.
//! - [`sampler`]: seeded Gaussian and heavy-tailed designs, noise and responses.
//! - [`interpolant`]: the minimum-norm interpolant, ridge, the head/tail
//!   (self-induced regularisation) decomposition and risk functionals.
//! - [`checks`]: empirical event checks for the random-matrix properties the
//!   risk bounds rest on (Dvoretsky-Milman, isomorphy, restricted isomorphy...).
//! - [`bounds`]: closed-form rates, lower bound and the benign-overfitting
//!   classifier.
//!
//! All coordinates are expressed in the eigenbasis of Σ unless a
//! [`Spectrum`] carries an explicit basis.

#![no_std]
#![forbid(unsafe_code)]
// `!(x >= 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod bounds;
pub mod checks;
mod error;
pub mod interpolant;
pub mod linalg;
pub mod sampler;
pub mod seed;
pub mod spectrum;

pub use error::{Error, Result};
pub use spectrum::{FeatureSplit, GeometryConstants, LStarMethod, Spectrum};

pub use nalgebra::{DMatrix, DVector};
