#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::excessive_precision)]

pub mod cli;
pub mod dynamics;
pub mod error;
pub mod fields;
pub mod geometry;
pub mod hamiltonians;
pub mod numeric;
pub mod quadrature;
