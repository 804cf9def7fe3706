//! Cavity-mediated entangling gates between double-quantum-dot spin qubits.
//!
//! The crate builds the full N-DQD + resonator Hamiltonian, extracts
//! effective spin-spin couplings both numerically and through a two-stage
//! Schrieffer-Wolff reduction, simulates pulsed gate sequences and scores the
//! resulting two-qubit processes, optionally under quasistatic charge noise.

pub mod error;
pub mod linalg;
pub mod ops;
pub mod model;
pub mod optimize;
pub mod gates;
pub mod effective;
pub mod dynamics;
pub mod noise;
pub mod experiments;

pub use error::{Error, ErrorKind, Result};
