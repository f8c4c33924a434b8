//! Configuration-driven front end: simulate data, run the filter, score it.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod io;
pub mod plot;
pub mod run;

pub use config::ExperimentConfig;
pub use error::CliError;
