//! Stochastic epidemic modelling and inference.
//!
//! The crate is split along the workflow it supports:
//!
//! * [`dist`]: probability mass/density functions and samplers, including the
//!   ν-overdispersed replacements for Poisson and Binomial draws.
//! * [`epi`]: deterministic (forward Euler) and Chain-Binomial SIR, SEIR and
//!   SEIAR steppers plus percentile-band ensembles.
//! * [`smc`]: a bootstrap particle filter scoring parameter sets against an
//!   observed infection series.
//! * [`mcmc`]: a Metropolis(-Hastings) chain driven by particle-filter scores.
//! * [`sysid`]: least squares, Gram-Schmidt orthogonalisation, FROLS term
//!   selection and Volterra candidate generation.
//!
//! The crate is `no_std` (it needs `alloc`). Enable `std` for
//! `std::error::Error` interop and `parallel` to spread particles and ensemble
//! trajectories over a rayon pool. Results do not depend on the thread count:
//! every particle and trajectory owns a random stream derived from the run seed.
#![cfg_attr(not(feature = "std"), no_std)]
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod dist;
pub mod epi;
mod error;
mod math;
pub mod mcmc;
pub mod rng;
pub mod smc;
pub mod sysid;

pub use error::{Error, Result};
