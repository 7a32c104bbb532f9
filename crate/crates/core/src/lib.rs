//! Simulation and verification of continuous-state branching processes with
//! immigration, subordinators and extremal shot-noise processes.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod cumulant;
pub mod error;
pub mod limitlab;
pub mod magnitude;
pub mod mechanisms;
pub mod quadrature;
pub mod renormalize;
pub mod sampling;

pub use error::{Error, Result};
pub use magnitude::Magnitude;
