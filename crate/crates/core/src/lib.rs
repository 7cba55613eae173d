//! Three-layer network training over an emulated homomorphic slot-vector layer.

pub mod data;
pub mod encoding;
pub mod engine;
pub mod error;
pub mod experiment;
pub mod linalg;
pub mod loss;
pub mod nn;
pub mod par;

pub use error::{Error, Result};
