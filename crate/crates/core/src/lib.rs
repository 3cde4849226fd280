// Negated comparisons below are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod datasets;
pub mod error;
pub mod evaluation;
pub mod kernels;
pub mod losses;
pub mod models;
pub mod projection;
pub mod qp;
pub mod seed;
pub mod theory;

pub use datasets::{Dataset, LabeledSample};
pub use error::{Error, Result};
pub use losses::{Label, LossParams};
