//! Correlation functions and photon transport for weakly driven
//! U(1)-symmetric open quantum systems.
//!
//! In the weak-drive limit, every steady-state observable of a Markovian open
//! system whose Hamiltonian conserves total excitation number reduces to a
//! finite set of scattering amplitudes obtained by solving small linear
//! systems — no density-matrix evolution required. This crate implements that
//! reduction:
//!
//! - [`model`] declares systems (bosonic/qubit sites, number-conserving
//!   couplings, decay channels, coherent drives) with JSON (de)serialization;
//! - [`excitation`] enumerates excitation-number blocks and builds block
//!   operators;
//! - [`engine`] solves and caches the resolvent linear systems;
//! - [`amplitude`] assembles multi-photon emission amplitudes;
//! - [`correlator`] exposes equal-time correlation functions `g^(n)`,
//!   cross-correlations, dynamical (two-tone) correlations, and transmission;
//! - [`lindblad`] provides an independent brute-force master-equation oracle
//!   for validating the analytic pipeline;
//! - [`models`] holds ready-made model builders (cavity QED, dimerized
//!   chains, waveguide arrays) and their closed-form references;
//! - [`sweep`] runs parameter sweeps and writes deterministic CSV.

pub mod amplitude;
pub mod correlator;
pub mod engine;
pub mod error;
pub mod excitation;
pub mod lindblad;
pub mod model;
pub mod models;
pub mod sweep;

pub use error::{Error, Result};
pub use model::{ModelSpec, SystemModel};

/// Crate version string, embedded in CSV output headers.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
