//! Light-field angular super-resolution toolkit.
//!
//! Builds dense view grids from sparsely sampled light fields: macro-pixel
//! layout transforms and synthetic ground-truth scenes ([`lf`]), the
//! disentangling convolution contracts ([`disentangle`]), the DDASR network
//! family ([`net`]), a training harness ([`train`]), quantitative metrics
//! ([`metrics`]), and the block-traversal strategy for memory-bounded
//! reconstruction of mid-density grids ([`btas`]).

pub mod btas;
pub mod disentangle;
pub mod error;
pub mod lf;
pub mod metrics;
pub mod net;
pub mod runtime;
pub mod tensor;
pub mod train;
pub mod visuals;

pub use error::{Error, Result};
pub use lf::{LightField, MacPI};
pub use net::{ModelState, NetworkConfig};
