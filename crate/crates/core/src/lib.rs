//! Two-species competing first-passage growth on `Z^d`.

pub mod analysis;
pub mod competition;
pub mod duality2d;
pub mod error;
pub mod fpp;
pub mod harness;
pub mod lattice;
pub mod passage;

pub use error::{Error, Result};
