//! Synthetic PMU data: power-system simulation, a weight-clipped Wasserstein
//! GAN over current-phasor sequences, and swing-equation realism scoring.
//!
//! The crate is `no_std` and needs only `alloc`. File formats, the command
//! line and parallel drivers live in the `pmu-synth` companion crate.
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod error;
pub mod ident;
pub mod linalg;
pub mod nn;
pub mod signal;
pub mod sim;
pub mod wgan;

pub use error::{Error, Result};
