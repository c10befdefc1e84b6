//! Multiplicity-lifted graded R-matrices, the inhomogeneous spin chains they
//! generate, and numerical checks of the nested algebraic Bethe ansatz
//! against exact diagonalization.

pub mod bethe;
pub mod chain;
pub mod error;
pub mod graded_space;
pub mod rmatrix;
pub mod spectra;

pub use error::{Error, Result};
pub use graded_space::{enumerate_states, LiftConvention, ModelSpec, SpectralOperator, StateIndex};
pub use num_complex::Complex64;
