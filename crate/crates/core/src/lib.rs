//! Carbon-emission modelling on city panels, built around the STIRPAT
//! drivers: population (P), affluence (A = GDP/P), industrial structure
//! (I = GDP_ind/GDP) and energy intensity (E = En/GDP).
//!
//! The crate is `no_std` and only needs an allocator. File formats, plotting
//! and the command-line driver live in the `stirpat-lab` companion crate.
//!
//! # Module structure
//!
//! - [`panel`] - raw city-year records and their validation
//! - [`features`] - driver derivation, design matrices, year split
//! - [`linreg`] - log-linear least squares (QR based)
//! - [`kernel`] - Nadaraya-Watson regression with a Gaussian kernel
//! - [`forest`] - bagged CART forest with leaf co-occurrence weights
//! - [`nn`] - feed-forward network trained by backpropagation
//! - [`metrics`] - MSE and bias (mean absolute error)
//! - [`model`] - the uniform fitted-model wrapper used by the protocol
//! - [`protocol`] - fit/predict comparison of all methods and variants
//! - [`scenario`] - +1% sensitivity and compounded scenario paths
//! - [`synth`] - seeded synthetic panels

#![no_std]
#![warn(missing_debug_implementations, rust_2018_idioms)]

extern crate alloc;

mod error;
mod linalg;
mod math;

pub mod features;
pub mod forest;
pub mod kernel;
pub mod linreg;
pub mod metrics;
pub mod model;
pub mod nn;
pub mod panel;
pub mod protocol;
pub mod scenario;
pub mod synth;

pub use error::{Error, Result, SplitSide};
pub use features::{build_design, derive_features, split_by_year, DesignMatrix, FeatureRow};
pub use model::{Drivers, FittedModel, Method, Variant};
pub use panel::{validate_dataset, PanelDataset, PanelRecord};
