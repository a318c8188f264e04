//! Graph wavelet Gaussian processes.
//!
//! Spectral filters on the normalized graph Laplacian, polynomial
//! approximations fitted against an estimated spectral density, and GP
//! regression and classification built on the filtered covariance.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod datasets;
pub mod density;
pub mod error;
pub mod experiments;
pub mod filters;
pub mod gp;
pub mod graph;
pub mod interp;
pub mod poly;
pub mod sparse;
pub mod synth;

pub use error::{Error, Result};
pub use filters::{FilterSpec, MotherWavelet, SpectralFilter};
pub use graph::{Graph, NormalizedLaplacian, SpectralDecomposition};
