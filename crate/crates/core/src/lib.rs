//! Two-detector simulation of a single bosonic field mode and null tests of
//! the coherent-state hypothesis.

pub mod brute_force_oracle;
pub mod correlator_engine;
pub mod error;
pub mod experiment_cli;
pub mod field_states;
mod fock;
pub mod joint_evolution;
pub mod measurement_channels;
pub mod physical_params;
mod svg;

pub use error::{Error, ErrorKind, Result};
pub use fock::PairBasis;
