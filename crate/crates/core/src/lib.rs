//! Ground- and excited-state solvers for small active-space Hamiltonians on a
//! simulated noisy quantum device.

pub mod ansatz;
pub mod error;
pub mod estimation;
pub mod fci;
pub mod fermion;
pub mod fixtures;
pub mod mapping;
pub mod mitigation;
pub mod pauli;
pub mod rng;
pub mod sim;
pub mod solvers;

pub use error::{Error, Result};
