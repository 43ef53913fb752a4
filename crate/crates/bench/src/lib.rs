//! Batch front end for the `lzqnd-core` engines: configuration, CSV output,
//! parameter sweeps and the acceptance suite.

pub mod acceptance;
pub mod commands;
pub mod config;
pub mod error;
pub mod output;
pub mod sweep;

pub use config::Config;
pub use error::{BenchError, Result};
