//! Entanglement-Hamiltonian tomography for XXZ chains: models, state
//! preparation, Pauli measurements, noise, fitting, and verification.

pub mod analysis;
pub mod eht;
pub mod error;
pub mod linalg;
pub mod measurement;
pub mod noise;
pub mod optimize;
pub mod pipeline;
pub mod spinmodel;
pub mod statekit;

pub use error::{Error, Result};
