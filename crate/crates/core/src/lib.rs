//! Exact and renormalization-group solvers for pairing Hamiltonians.
//!
//! * [`model`]: pairing Hamiltonians, the three exactly solvable families and
//!   the reduced BCS model, plus JSON model files.
//! * [`exactdiag`]: the seniority-zero pair basis, matrix-free Hamiltonian
//!   action, a restarted Lanczos solver and a dense full-spectrum oracle.
//! * [`dmrg`]: infinite-algorithm DMRG with particle and hole blocks.
//! * [`cli`]: the `pairsolve` command-line front end.
//!
//! Data-parallel loops run on rayon when the `parallel` feature is enabled
//! (the default); [`Execution::Sequential`] forces the serial path.

pub mod cli;
pub mod dmrg;
pub mod exactdiag;
pub mod model;
mod parallel;

pub use parallel::Execution;
