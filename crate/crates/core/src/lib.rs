//! Numerical core for frequency-response surrogates.
//!
//! Ground truth comes from a closed-form driven oscillator and a cantilevered
//! 3D frame-element beam; surrogates are small fully connected networks
//! trained from scratch on the generated curves. Everything here is `no_std`
//! with `alloc`; file formats, the CLI, and parallel sweeps live in the
//! `fem-surrogate` crate.
#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod beam;
pub mod dataset;
pub mod grid;
pub mod mlp;
pub mod numerics;
pub mod oscillator;
pub mod surrogate;

pub use beam::{BeamSpec, RayleighDamping, ResponseTable};
pub use dataset::{ResponseSample, ScaleScheme, SplitDataset};
pub use grid::FrequencyGrid;
pub use oscillator::OscillatorParams;
