// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod amrdriver;
pub mod cli;
pub mod error;
pub mod estimator;
pub mod fespace;
pub mod geometry;
pub mod image;
pub mod mesh;
pub mod quadrature;
pub mod regsolver;
pub mod verify;
