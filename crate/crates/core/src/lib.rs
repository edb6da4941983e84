//! Speech-emotion-recognition engine: a log-Mel audio front end with
//! SpecAugment-style masking, a multi-resolution high-resolution CNN
//! classifier, and a deterministic cross-entropy/Adam training loop, all on
//! top of a small reverse-mode autodiff tape.
//!
//! The numeric kernels are generic over [`scalar::Scalar`] (`f32`/`f64`);
//! the pipeline itself is instantiated at `f64` through the aliases exported
//! at the crate root, which is the precision every tolerance and file format
//! in this crate assumes.

pub mod adam;
pub mod augment;
pub mod data;
pub mod dsp;
pub mod error;
pub mod gradcheck;
pub mod graph;
mod kernels;
pub mod model;
pub mod persist;
pub mod rng;
pub mod scalar;
pub mod synth;
pub mod tensor;
pub mod train;
pub mod verify;

pub use error::{Error, Result};
pub use graph::{OpKind, Var};
pub use rng::Rng;

/// Dense `f64` tensor, the pipeline's universal value type.
pub type Tensor = tensor::Tensor<f64>;
/// `f64` computation tape.
pub type Graph = graph::Graph<f64>;
/// `f64` convolution parameters.
pub type ConvParams = tensor::ConvParams<f64>;
