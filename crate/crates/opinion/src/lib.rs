//! Hidden-preference Ising opinion model on the `N x N` torus.
//!
//! Agents in strip `A` prefer `+1`, agents in strip `B` prefer `-1`, and
//! agents in the two neutral strips have no preference. The crate evaluates
//! energies exactly, builds the named configuration families and reference
//! paths, analyses small landscapes exhaustively, and simulates the
//! Metropolis dynamics.

pub mod config;
pub mod dynamics;
pub mod error;
pub mod landscape;
pub mod lattice;
pub mod paths;
pub mod polyomino;
pub mod recurrence;
pub mod stats;
pub mod union_find;
pub mod verification;

pub use config::SpinConfiguration;
pub use error::{ModelError, SpecError};
pub use lattice::{ModelSpec, Regime, Region, Site};

/// Exact energy. Integer-valued whenever alpha is an integer.
pub type Energy = num_rational::Rational64;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
