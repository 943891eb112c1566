//! One-shot verification of slaughter cuts from images.
//!
//! The crate covers the whole pipeline: classical segmentation of the cut
//! region ([`imaging`]), stochastic augmentation ([`augmentation`]), a small
//! reverse-mode autodiff engine ([`autodiff`]), a configurable separable-conv
//! feature extractor ([`backbone`]), the shared-weight pair network
//! ([`siamese`]), pair-sampling training ([`training`]), control-set
//! classification ([`inference`]), evaluation ([`metrics`]) and dataset
//! handling including a synthetic generator ([`datakit`]).

pub mod augmentation;
pub mod autodiff;
pub mod backbone;
pub mod datakit;
pub mod error;
pub mod imaging;
pub mod inference;
pub mod kv;
pub mod metrics;
pub mod rng;
pub mod siamese;
pub mod training;

pub use error::{Error, ErrorClass, Result};
