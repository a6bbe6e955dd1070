//! Moving-boundary solver for a thin brackish layer trapped between sea ice
//! and a freshwater false bottom, posed as a system of Volterra equations
//! for the interface gradients.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::too_many_arguments)]

pub mod cli;
pub mod error;
pub mod exec;
pub mod fields;
pub mod kernels;
pub mod model;
pub mod oracle;
pub mod quad;
pub mod reference;
pub mod volterra;

pub use error::{Error, Result};
pub use exec::Execution;
