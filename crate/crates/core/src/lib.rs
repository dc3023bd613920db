//! Hybrid Bayesian-network engine with a library of product-safety idioms.

// Parameter checks are written `!(x > 0.0)` so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod catalog;
pub mod expr;
pub mod graph;
pub mod idioms;
pub mod inference;
pub mod io;
pub mod oracle;
