//! Projected ensembles of bottlenecked random circuits: Haar sampling,
//! circuit evolution, moment operators and design distances, closed-form
//! theory, exact oracles, and the experiment runner.

// `!(x > 0.0)` is used deliberately so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod circuit;
pub mod ensemble;
pub mod error;
pub mod oracle;
pub mod randmat;
pub mod runner;
pub mod stats;
pub mod theory;
pub mod verify;

pub use error::{Error, Result};
