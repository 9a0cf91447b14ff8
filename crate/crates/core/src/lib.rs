//! Fock-space simulation of polarization-entangled photon states produced by
//! two independent pair sources whose outputs are merged on polarizing beam
//! splitters, plus Bell-test and entanglement-based key distribution tooling
//! built on top of it.

pub mod cli;
pub mod entanglement;
pub mod error;
pub mod fock;
pub mod optics;
pub mod qkd;
pub mod stats;

pub use error::{Error, Result};
