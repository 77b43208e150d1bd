#![allow(clippy::neg_cmp_op_on_partial_ord)]
pub mod channel;
pub mod error;
pub mod linalg;
pub mod loewner;
pub mod mor;
pub mod pipeline;
pub mod quant;
pub mod rateless;
pub mod transform;
pub mod wire;

pub use error::{Error, ErrorKind, Result, Stage};
pub use linalg::{CMatrix, C64};
