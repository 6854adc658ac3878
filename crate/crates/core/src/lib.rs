//! Simulation of transverse two-photon amplitudes through paraxial optics,
//! Airy-accelerating spectral masks, coincidence scans and separability
//! witnesses.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod biphoton;
pub mod config;
pub mod error;
pub mod experiment;
pub mod grid;
pub mod mask;
pub mod measurement;
pub mod propagation;
pub mod special;
pub mod witness;

pub use error::{Error, Result};
pub use grid::{ComplexField, Domain, Spectrum, TransverseGrid};
