// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod error;
pub mod first_best;
pub mod hjbvi;
pub mod incentive;
pub mod model;
pub mod numerics;
pub mod report;
pub mod simulate;

pub use error::{Error, InvalidParam, Result};
pub use model::{ModelParams, Primitives, RawParams};
