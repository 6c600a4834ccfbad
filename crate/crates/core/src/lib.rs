//! Onset of phototactic bioconvection in a scattering algal suspension.
//!
//! The crate is layered bottom-up: [`numerics`] kernels, the basic-state
//! [`radiative`] field, the equilibrium concentration in [`basestate`], the
//! perturbed radiation in [`perturb`] and the eigenvalue problem in
//! [`stability`].

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

#[cfg(feature = "lapack")]
extern crate openblas_src as _;

pub mod error;
pub mod numerics;
pub mod par;
pub mod radiative;
pub mod basestate;
pub mod perturb;
pub mod stability;
pub mod config;
pub mod output;
pub mod cache;
pub mod runner;

pub use error::{Error, Result};
