//! Optimal experimental design for universal differential equations.

pub mod ann;
pub mod cli;
pub mod design;
pub mod error;
pub mod estimate;
pub mod fim;
pub mod models;
pub mod numerics;
pub mod sensitivity;

pub use error::{Error, Result};
