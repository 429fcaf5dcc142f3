//! Exact finite-volume statistical mechanics of the diagonal Bose gas with
//! two condensation mechanisms, and the thermodynamic-limit formulas it
//! converges to.

// `!(x > 0.0)` rejects NaN along with the out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::excessive_precision)]

pub mod canonical;
pub mod error;
pub mod experiments;
pub mod grand;
pub mod lattice;
pub mod numeric;
pub mod single_mode;
pub mod specfun;
pub mod tdlimit;

pub use error::{Error, Result};
