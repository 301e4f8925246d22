//! Experiment harness for empirical transport rates on the flat torus.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod error;
pub mod experiments;
pub mod io;
pub mod plot;

pub use error::LabError;
