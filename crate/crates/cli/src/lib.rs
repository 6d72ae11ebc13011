//! Batch pipeline, file formats, and configuration for learned KKL
//! observers. The numerical machinery lives in `kkl-core`; this crate adds
//! everything that touches an operating system: JSON/CSV files, per-system
//! presets, and the `kkl` command-line interface.

pub mod config;
pub mod error;
pub mod formats;
pub mod pipeline;

pub use error::{CliError, Result};
