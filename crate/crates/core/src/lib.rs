//! Gene selection for microarray data with an MRMR prefilter and a binary
//! horse herd optimizer.
//!
//! The pipeline: [`dataset`] loading and discretization, [`filters`] MRMR
//! ranking, a [`hoa`] herd whose continuous velocities are mapped to bit
//! masks by [`binarize`], fitness from cross-validated [`classifiers`], and
//! the end-to-end driver in [`select`]. [`stats`] holds the Friedman and
//! post-hoc tests used to compare algorithms.

pub mod binarize;
pub mod classifiers;
pub mod dataset;
pub mod error;
pub mod filters;
pub mod hoa;
pub mod rng;
pub mod select;
pub mod special;
pub mod stats;

pub use error::{Error, Result};
