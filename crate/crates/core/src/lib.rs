//! Simulation of heralded remote entanglement between two atom-cavity nodes.
//!
//! Frequencies are stored in units of 2π·MHz (the convention of the usual parameter
//! tables) and times in µs. Matrix entries handed to the integrators are angular
//! frequencies in rad/µs, i.e. the stored value multiplied by 2π.

pub mod cart;
pub mod emission;
pub mod error;
pub mod experiments;
pub mod grid;
pub mod interference;
pub mod par;
pub mod quantum;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;

/// Converts a frequency in 2π·MHz into an angular frequency in rad/µs.
#[inline]
pub fn angular(x: f64) -> f64 {
    std::f64::consts::TAU * x
}

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
