//! Moment-method toolkit for the 2x2 parabolic cascade system
//!
//! ```text
//! d/dt y1 - y1'' = 1_omega v,
//! d/dt y2 - y2'' + p y1' + q y1 = 0,      on (0, pi) x (0, T),
//! ```
//!
//! with Dirichlet conditions. The crate computes the coupling indices and
//! adjoint eigenstructure, classifies approximate controllability,
//! estimates minimal control times, builds biorthogonal exponential
//! families, synthesizes null controls by the moment method and checks
//! them with a sine-Galerkin simulator.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod biortho;
pub mod classify;
pub mod cli;
pub mod error;
pub mod funcspace;
pub mod moments;
pub mod simulate;
pub mod spectral;
pub mod transform;

pub use error::{Error, Result};
