//! On-disk artifacts: vocabulary text file, BM25 index and model
//! checkpoint. The binary layouts are described in `docs/formats.md`; all
//! integers and floats are little-endian.

mod binio;
mod checkpoint;
mod index;
mod vocab;

pub use checkpoint::{read_checkpoint, write_checkpoint, CHECKPOINT_MAGIC};
pub use index::{read_index, write_index, INDEX_MAGIC};
pub use vocab::{read_vocab, write_vocab};
