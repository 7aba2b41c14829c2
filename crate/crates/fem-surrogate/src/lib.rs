//! File formats, parallel sweeps, plots, and the command-line front end
//! around [`fem_surrogate_core`].

pub mod cli;
pub mod data;
pub mod model_file;
pub mod plot;
pub mod report;
pub mod sweep;

pub use fem_surrogate_core as core;
