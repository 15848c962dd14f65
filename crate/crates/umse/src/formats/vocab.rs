use std::fs;
use std::path::Path;

use umse_core::corpus::{Vocabulary, NUM_SPECIAL};

use crate::{Error, Result};

/// One regular token per line; line `k` (0-based) holds id `k + 4`. The
/// special tokens are implicit.
pub fn write_vocab(path: &Path, vocab: &Vocabulary) -> Result<()> {
    let mut out = String::new();
    for t in vocab.regular_tokens() {
        out.push_str(t);
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn read_vocab(path: &Path) -> Result<Vocabulary> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let tokens: Vec<&str> = text.lines().collect();
    if let Some(i) = tokens.iter().position(|t| t.is_empty()) {
        return Err(Error::parse(path, i + 1, "empty token"));
    }
    Vocabulary::from_tokens(tokens, 0).map_err(|e| Error::format(path, format!("{e} (ids start at {NUM_SPECIAL})")))
}
