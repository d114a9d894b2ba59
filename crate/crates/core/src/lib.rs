//! Pseudo-spectral simulation of the stochastic electron-MHD system on the
//! three-torus with fractional resistivity and transport noise, together
//! with executable checks of the identities and estimates it relies on.

pub mod checkpoint;
pub mod config;
pub mod diagnostics;
pub mod ensemble;
pub mod error;
mod fft;
pub mod hall;
pub mod integrator;
pub mod littlewood_paley;
pub mod noise;
pub mod oracles;
pub mod random;
pub mod spectral;
pub mod verification;

pub use error::{Error, Result};
