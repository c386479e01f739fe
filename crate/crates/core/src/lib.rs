// Negated comparisons are used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod coordination;
pub mod curve;
pub mod error;
pub mod netsim;
pub mod planning;
pub mod resilience;
pub mod sim;
pub mod tracker;

pub use error::{Error, Result};
