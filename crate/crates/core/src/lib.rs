//! Concept discovery for co-evolving time series.
//!
//! The pipeline cuts a multichannel series into non-overlapping patches,
//! normalizes each patch, and trains an autoencoder built from
//! Kolmogorov-Arnold layers (B-spline edge activations). A self-representation
//! matrix sits between the encoder and the decoder, so every latent patch is
//! rebuilt as a sparse combination of the others. A group penalty on
//! consecutive column differences keeps that matrix temporally smooth.
//! Concept boundaries are then read off the column-difference profile.
//! Segments are grouped into recurring concepts, and the concept history
//! drives a simple forecaster.
//!
//! The crate is `no_std` and needs only `alloc`. File formats, configuration
//! and the command-line tool live in the companion `kansr` crate.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

pub mod concepts;
pub mod error;
pub mod forecast;
pub mod ingest;
pub mod kan;
pub mod linalg;
pub mod metrics;
pub mod patching;
pub mod rng;
pub mod selfrep;

pub use error::{Error, Result};
pub use linalg::Matrix;
