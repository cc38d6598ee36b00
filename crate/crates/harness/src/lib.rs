//! Experiment driver: surrogates, the BO loop, suites and their artifacts.

pub mod bo;
pub mod cli;
pub mod config;
pub mod error;
pub mod models;
pub mod output;
pub mod plot;
pub mod suite;

pub use cli::cli_main;
pub use config::ExperimentConfig;
pub use error::{HarnessError, Result};
