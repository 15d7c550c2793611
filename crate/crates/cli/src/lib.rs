//! Command implementations behind the `orient` binary: dataset
//! generation, model training, conformal calibration, mesh orientation,
//! evaluation, and the rotation-sweep experiment.  Everything is a plain
//! function over validated configs so tests can drive commands
//! in-process.

pub mod artifacts;
pub mod commands;
pub mod config;
pub mod dataset;
