#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod certify;
pub mod cli;
pub mod error;
pub mod expr;
pub mod fields;
pub mod frequency;
pub mod quad;
pub mod solutions;

pub use error::{Error, Result};
