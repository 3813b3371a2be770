//! File formats, text-generation backends and the pipeline commands for
//! poster layout trees. The computation lives in `postree-core`.

pub mod backend;
pub mod config;
pub mod dataset;
pub mod embed;
pub mod error;
pub mod fsio;
pub mod index_file;
pub mod pgm;
pub mod pipeline;
pub mod seed;

pub use error::{Error, ErrorBody};
