//! Numerical laboratory for the stochastic Burgers flow on the unit torus.
//!
//! The crate simulates the multiplicative stochastic heat equation, recovers
//! Burgers solutions through the Hopf-Cole transformation, evolves the
//! Fokker-Planck derivative field with a positivity-preserving finite-volume
//! scheme, samples directed-polymer paths and densities on the cylinder, and
//! compares white-noise winding statistics against the Brownian-bridge law.
//!
//! Start with the runnable examples (`cargo run --release --example ...`),
//! one per major capability, or the thin `bjs` CLI for batch experiments.

pub mod burgers;
pub mod config;
pub mod environment;
pub mod error;
pub mod experiment;
pub mod field;
pub mod fokker_planck;
pub mod grid;
pub mod kernels;
pub mod noise;
pub mod polymer;
pub mod report;
pub mod she;
pub mod spectral;
pub mod stats;
pub mod white_noise;

pub use error::{Error, Result};
pub use field::{DensityField, FieldHistory, ScalarField};
pub use grid::TorusGrid;
pub use noise::{CovarianceSpec, NoiseRealization};
