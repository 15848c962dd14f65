//! Unified multi-scenario summarization evaluation.
//!
//! The crate is `no_std` (it needs `alloc`) and holds every algorithm of the
//! toolkit: corpus preparation, BM25 retrieval, self-supervised pair
//! construction, the prefix-conditioned transformer scorer with its manual
//! backward pass, training, and rank-correlation meta-evaluation. File
//! formats, JSONL and the command line live in the `umse` crate.
//!
//! Enable the `std` feature to let the matrix kernels detect CPU features at
//! runtime, and `serde` to derive serialization for the public data types.

#![cfg_attr(not(any(feature = "std", test)), no_std)]

extern crate alloc;

pub mod corpus;
pub mod datagen;
mod error;
pub mod linalg;
pub mod math;
pub mod metaeval;
pub mod model;
pub mod retrieval;
mod scenario;
pub mod training;

pub use error::{Error, Result};
pub use scenario::Scenario;
