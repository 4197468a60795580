//! Adiabatic evolution of disordered transverse-field Ising chains.
//!
//! The crate covers the full pipeline: the chain Hamiltonian and its
//! cosine-ramp schedule ([`model`]), the instantaneous spectrum and minimum
//! gap ([`spectrum`]), unitary propagation ([`propagation`]), duration
//! calibration ([`calibration`]), Gaussian disorder ensembles
//! ([`ensemble`]), adiabaticity figures of merit ([`conditions`]) and the
//! batch pipeline behind the command-line tool ([`pipeline`]).

pub mod calibration;
pub mod conditions;
pub mod config;
pub mod ensemble;
pub mod error;
pub mod io;
pub mod model;
pub mod pipeline;
pub mod propagation;
pub mod spectrum;
pub mod stats;

pub use error::{Error, Result};
pub use model::{ChainParams, Schedule};
