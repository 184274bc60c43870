#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod collection;
pub mod conformal;
pub mod error;
pub mod experiments;
pub mod pde;
pub mod quantum;
pub mod robust;
pub mod spectral;
pub mod stats;
pub mod surrogate;

pub use error::{Error, Result};
