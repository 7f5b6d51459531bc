//! Simulation and search for heralded storage of single-photon polarization
//! qubits in the Zeeman sublevels of a single trapped Ca+ ion.
//!
//! The storage pipeline absorbs an 854 nm photon on D5/2 - P3/2, lets the
//! ion decay to S1/2 while emitting a 393 nm herald photon, and conditions
//! on detecting that herald in a chosen polarization basis. For a given
//! initial atomic state, beam/detection geometry and detection basis, the
//! crate computes the herald-conditioned photon-to-atom transfer matrix, its
//! relative efficiency and validity, verifies the built-in scheme catalog,
//! and searches parameter space for new valid schemes.

pub mod angular;
pub mod error;
pub mod process;
pub mod schemes;
pub mod search;
pub mod state;

pub use error::{Error, Result};

/// Complex amplitude type used throughout.
pub type C64 = num_complex::Complex64;
