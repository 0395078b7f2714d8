//! Single-particle dynamics in a parabolic optical lattice under the
//! single-band tight-binding approximation.

pub mod config;
pub mod dynamics;
pub mod error;
pub mod experiments;
pub mod model;
pub mod output;
pub mod pendulum;
pub mod phasespace;
pub mod spectrum;
mod tridiag;

pub use error::{Error, Result};
