//! File formats, experiment configuration, parallel runner and report
//! emitters around [`imo_core`].

pub mod config;
pub mod error;
pub mod imoe;
pub mod manifest;
pub mod report;
pub mod runner;
pub mod synth_io;

pub use error::{Error, Result};
pub use imoe::{read_embedding_set, write_embedding_set};
