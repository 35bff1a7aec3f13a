#![cfg_attr(not(any(feature = "std", test)), no_std)]

extern crate alloc;

pub mod error;
pub mod gaussian;
pub mod homodyne;
pub mod sdp;
pub mod states;
pub mod stats;
pub mod steering;
pub mod sweep;
mod linalg;
pub mod tolerance;
pub mod witness;

pub use error::{Error, Result};
pub use gaussian::{CovarianceMatrix, Partition, SymplecticMatrix, WilliamsonForm};
pub use linalg::{doubled_embedding, matrix_rows};
pub use tolerance::Tolerances;
