//! Source code clone detection with a small transformer encoder whose pooled
//! output is fused with an execution-output similarity feature.
//!
//! The numeric core is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix the precision used by the pipeline.

pub mod codeparse;
pub mod config;
pub mod corpus;
pub mod error;
pub mod evalx;
pub mod model;
pub mod outfeature;
pub mod scalar;
pub mod seed;
pub mod synthetic;
pub mod train;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Default precision of the pipeline.
pub type Real = f64;
pub type Params = model::Parameters<f64>;
pub type Params32 = model::Parameters<f32>;
pub type Grads = model::Parameters<f64>;
pub type Trace = model::ForwardTrace<f64>;
pub type Checkpoint = model::Checkpoint<f64>;
