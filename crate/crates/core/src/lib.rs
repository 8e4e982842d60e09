//! Open diffusive contact processes, their generalization with
//! neighbour-dependent death rates, and the lattice SIR model, together with
//! their dual processes.
//!
//! Everything here is `no_std` with `alloc`. Three routes are provided for
//! every quantity: exact finite-state linear algebra ([`exact`]), closed-form
//! evaluation ([`small_lattice`], [`gdcp`], [`sir`]) and Gillespie simulation
//! ([`mc`]).
#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod error;
pub mod generator;
pub mod lattice;
pub mod mc;
mod math;
pub mod sparse;
pub mod duality;
pub mod sir;
pub mod exact;
pub mod small_lattice;
pub mod gdcp;
pub mod quadrature;

pub use error::{Error, Result};
