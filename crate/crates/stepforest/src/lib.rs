//! File formats, run configuration and the command-line driver for
//! `stepforest-core`.
//!
//! * [`io`]: feature and OHLCV CSV readers, model JSON, and every CSV output.
//! * [`config`]: the TOML run configuration.
//! * [`cli`]: the `stepforest` subcommands.

pub mod cli;
pub mod config;
pub mod error;
pub mod io;

pub use error::{IoError, Result};
