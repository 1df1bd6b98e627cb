//! Deployment reliability control for binary classifiers.
//!
//! The crate evaluates a scorer over chronological windows, tracks each
//! window's reliability state (AUC, ECE, Brier) and the drift of its inputs
//! against recent history, and runs intervention policies that decide at
//! every window boundary whether to recalibrate, retrain, do both, or leave
//! the deployed model alone. A threshold sweep over the drift-triggered
//! policy maps the trade-off between intervention cost and reliability
//! volatility, and a block bootstrap over windows attaches confidence
//! intervals to the volatility figures.
//!
//! Runnable walkthroughs live in `examples/`; `relcontrol` is the CLI.

// `!(x > y)` is used deliberately so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bootstrap;
pub mod calibration;
pub mod cli;
pub mod data;
pub mod drift;
mod error;
pub mod metrics;
pub mod morc;
pub mod policy;
pub mod predictor;
pub mod report;
pub mod synthetic;

pub use error::{Error, Result};
