//! Numerical core for studying smoothed empirical measures on the flat torus:
//! Fourier analysis, negative Sobolev norms, kernel density estimates,
//! optimal transport solvers and the bounds that tie them together.
//!
//! The crate is `no_std` and only needs an allocator.

#![no_std]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod bounds;
pub mod density;
mod error;
mod fft;
pub mod kernel;
pub mod ot;
pub mod quadrature;
pub mod rate;
pub mod rng;
pub mod spectral;
pub mod torus;

pub use error::{Error, Result};
