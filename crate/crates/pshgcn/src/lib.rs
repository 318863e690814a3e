//! Datasets, synthetic generation, file formats and the command line for
//! [`pshgcn_core`].

pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod dataset;
mod error;
pub mod fsutil;
pub mod pipeline;
pub mod store;
pub mod suite;
pub mod synth;

pub use error::{Error, Result};
