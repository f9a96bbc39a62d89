//! Exact vertex weights, path sampling, four-point relations and telegraph
//! equation solvers for the stochastic higher spin six vertex model.

pub mod error;
pub mod fourpoint;
pub mod profile;
pub mod qnum;
pub mod quadrature;
pub mod sampler;
pub mod scaling;
pub mod telegraph;
pub mod weights;

pub use error::{Error, Result};
pub use qnum::{Rational, Scalar};
pub use scaling::{make_scaling, ScalingContext};
pub use weights::{ModelParams, VertexConfig};
