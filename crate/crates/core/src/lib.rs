//! Time-optimal state transfer on constrained spin lattices.
//!
//! The crate is `no_std` and only needs an allocator.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod elliptic;
pub mod error;
pub mod lattice;
pub mod ode;
pub mod oracles;
pub mod propagator;
pub mod qbe;
pub mod reduced;
pub mod shooting;
pub mod spline;
pub mod trajectories;
pub mod warmstart;

pub use error::{Error, Result};
pub use lattice::{
    build_hamiltonian, constraint_norm, probability_currents, trace_norm_squared, Basis, CouplingMatrix,
    HermitianOperator, LatticeSpec, Mask, WeightProfile, C64,
};
