//! File formats, plots and the command-line driver for `stirpat-core`.
//!
//! - [`panel_csv`] - panel input files and reject lists
//! - [`documents`] - JSON models, scenarios and design sidecars
//! - [`tables`] - CSV outputs
//! - [`svg`] - charts
//! - [`cli`] - the `stirpat-lab` commands

pub mod cli;
pub mod documents;
mod error;
pub mod fsutil;
pub mod panel_csv;
pub mod runner;
pub mod svg;
pub mod tables;

pub use error::{LabError, Result};
