//! Transition probabilities of driven two-level systems: exact propagation
//! of the adiabatic-basis amplitude equations, Stokes-graph analysis of the
//! associated Schrödinger-form potentials, and adiabatic-limit formulas.

pub mod adiabatic;
pub mod cli;
pub mod dynamics;
pub mod error;
pub mod fields;
pub mod numerics;
pub mod stokes;

pub use error::{Error, Result};
