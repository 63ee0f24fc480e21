#![allow(clippy::neg_cmp_op_on_partial_ord)]

//! Path-integral propagators for Noether-reducible time-dependent potentials.

pub mod acceptance;
pub mod error;
pub mod gauge;
pub mod ode;
pub mod profiles;
pub mod quad;
pub mod reduction;
pub mod semigroup;
pub mod slicing;
pub mod symmetry;

pub use error::{Error, ErrorKind, Result};
