//! Command-line drivers and the HTTP service for the bounce pipeline.

pub mod commands;
pub mod error;
pub mod service;
pub mod store;

pub use error::{CliError, Failure};
