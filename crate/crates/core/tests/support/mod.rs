//! Independent oracles shared by the integration and acceptance tests. None of
//! this code calls into the solver or trainers it is used to check.
#![allow(dead_code)]

pub mod active_set;
pub mod svm_dual;
