//! Simulation and reconstruction of phase-space quasi-probability
//! distributions for atoms oscillating in the wells of a 1-D optical lattice.
//!
//! The crate is organised bottom-up:
//!
//! * [`oscillator`]: truncated Fock-space states and operators, and direct
//!   evaluation of the Husimi and Wigner functions from a density matrix.
//! * [`lattice`]: lattice geometry, light-shift depth, the single-well
//!   bound-state solver and well dynamics.
//! * [`prep`]: ground, near-coherent and inverted state preparation plus the
//!   inhomogeneous dephasing channel.
//! * [`tomography`]: the rotate/displace/measure protocol, the Wigner
//!   estimator with its loss bounds, Gaussian fits and normalization analyses.

// `!(x > 0.0)` is used on purpose: it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod constants;
pub mod error;
pub mod lattice;
pub mod oscillator;
pub mod prep;
pub mod quadrature;
pub mod tomography;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
