//! File formats, pipeline stages and the command line for the `umse`
//! summarization evaluator. The algorithms live in `umse-core`.

pub mod cli;
pub mod config;
mod error;
pub mod formats;
pub mod jsonl;
pub mod pipeline;

pub use error::{Error, Result};
