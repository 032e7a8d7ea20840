//! Config files, run orchestration and result files for lattice
//! phase-space tomography simulations.
//!
//! A run goes `parse_config → run → emit`. [`compare`] checks a bundle
//! against direct evaluation of the prepared state.

pub mod compare;
pub mod config;
pub mod error;
pub mod output;
pub mod runner;
pub mod sweep;
pub mod units;

pub use compare::{compare, CompareReport};
pub use config::{parse_config, ConfigError, NoiseMode, RunConfig};
pub use error::RunError;
pub use output::{emit, load_bundle, write_cross_sections};
pub use runner::{run, run_with_threads, ResultBundle};
