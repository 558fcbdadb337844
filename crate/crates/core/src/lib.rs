//! Item calibration toolkit: item bank and expert screening, response
//! ingestion and participant screening, classical test theory statistics,
//! Bayesian 2PL calibration, evidence-based item selection, and simulation.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bank;
pub mod ctt;
pub mod error;
pub mod irt;
pub mod refine;
pub mod responses;
pub mod scoring;
pub mod screening;
pub mod simulate;
pub mod stats;

pub use error::{Error, Result};
