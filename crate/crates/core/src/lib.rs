//! Correspondence analysis, multiple correspondence analysis, and the
//! multilogit-bilinear model for categorical data.
//!
//! MCA of an indicator matrix is the one-step (second-order) estimate of the
//! multilogit-bilinear model around independence; this crate provides both
//! sides of that connection, the majorization fitter for the model, and a
//! simulation harness comparing the two.

pub mod bilinear;
pub mod biplot;
pub mod cli;
pub mod corresp;
pub mod error;
pub mod export;
pub mod lowrank;
pub mod mca;
pub mod multilogit;
pub mod simulate;
pub mod tables;

pub use error::{Error, Result};
