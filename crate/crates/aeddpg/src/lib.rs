//! Threaded runner, file formats and command line for AE-DDPG experiments.

pub use aeddpg_core as core;

pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod diagnostics;
pub mod envs;
pub mod error;
pub mod experiment;
pub mod metrics;
pub mod runner;
pub mod shared;
pub mod snapshot;
pub mod spectral;
pub mod summary;

pub use error::{Error, Result};
