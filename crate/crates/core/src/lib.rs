//! Training-free few-shot classification over precomputed embedding caches,
//! together with the measurements used to study intra-modal overlap:
//! similarity-distribution intersection, Proxy-A-Distance and per-channel
//! feature variance.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, experiment
//! configuration and the command line live in the `imo` crate.

#![no_std]
extern crate alloc;

pub mod classifiers;
pub mod embedding;
pub mod error;
pub mod harness;
pub mod kernels;
pub mod matrix;
pub mod metrics;
pub mod rng;
pub mod synth;

pub use classifiers::{
    ape_logits, ape_refine, clip_logits, evaluate, plusplus_logits, tip_adapter_logits,
    tip_x_logits, ChannelMask, HyperParams, LogitsBundle, Method, MethodInputs,
};
pub use embedding::{build_cache, CacheModel, EmbeddingSet, TextClassifier};
pub use error::{Error, Result};
pub use matrix::Mat;
