//! Subspace expansion with dual-state purification.
//!
//! The crate simulates noisy layered circuits with dense density matrices,
//! estimates traces of products of noisy states and their duals (both exactly
//! and through simulated measurement gadgets), assembles power, fault and
//! divide-and-conquer subspace matrices, and solves the resulting pencils
//! under injected shot noise.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cost;
pub mod error;
pub mod experiment;
pub mod gevp;
pub mod pauli;
pub mod purification;
pub mod shotnoise;
pub mod sim;
pub mod subspace;
pub mod vqe;

pub use error::{Error, Result};
pub use num_complex::Complex64;
pub use pauli::{build_ising, Axis, FactorizedTerm, PauliString, PauliSum, PauliTerm, SystemPartition};
