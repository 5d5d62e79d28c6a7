#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod b7;
pub mod classify;
pub mod error;
pub mod fit;
pub mod instanton;
pub mod io;
pub mod ode;
pub mod rng;
pub mod taubnut;

pub use error::{Error, Result};
