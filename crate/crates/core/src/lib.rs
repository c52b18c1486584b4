//! Statistics of two-party Bell tests in which each side alternates between
//! threshold photon counting and binned homodyne detection.
//!
//! The crate is organised bottom-up:
//!
//! * [`fock`] builds two-mode states in a truncated photon-number basis.
//! * [`quadrature`] evaluates oscillator eigenfunctions, their overlaps on
//!   intervals, and the effect operators of binned quadrature measurements.
//! * [`measurement`] turns measurement settings into exact 2×2 outcome tables.
//! * [`channels`] applies photon loss.
//! * [`bell`] evaluates CHSH and Clauser-Horne functionals.
//! * [`experiments`] contains the scans, optimizers, efficiency frontier and a
//!   Monte Carlo sampler.
//! * [`cli`] wraps the experiments as a command-line tool writing CSV.

pub mod bell;
pub mod channels;
pub mod cli;
mod error;
pub mod experiments;
pub mod fock;
pub mod integrate;
pub mod measurement;
pub mod quadrature;

pub use error::{Error, Result};
