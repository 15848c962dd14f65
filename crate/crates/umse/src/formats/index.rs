use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use umse_core::retrieval::Bm25Index;

use super::binio::{put_f64, put_str, put_u32, put_u64, read_all, write_all, Reader};
use crate::{Error, Result};

pub const INDEX_MAGIC: &[u8; 8] = b"UMSEIDX1";

/// Stores the BM25 parameters and each document's token sequence; the
/// postings are rebuilt on load, which reproduces the index exactly.
pub fn write_index(path: &Path, index: &Bm25Index) -> Result<()> {
    let mut buf = Vec::new();
    buf.extend_from_slice(INDEX_MAGIC);
    put_u64(&mut buf, index.vocab_size() as u64);
    put_f64(&mut buf, index.k1());
    put_f64(&mut buf, index.b());
    put_u64(&mut buf, index.n_docs() as u64);
    for (d, id) in index.doc_ids().iter().enumerate() {
        put_str(&mut buf, id);
        let terms = index.doc_terms(d);
        put_u32(&mut buf, terms.len() as u32);
        for &t in terms {
            put_u32(&mut buf, t);
        }
    }
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    write_all(BufWriter::new(f), &buf).map_err(|e| Error::io(path, e))
}

pub fn read_index(path: &Path) -> Result<Bm25Index> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    let bytes = read_all(f).map_err(|e| Error::io(path, e))?;
    let bad = |m: String| Error::format(path, m);
    let mut r = Reader::new(&bytes);
    if r.take(8).map_err(bad)? != INDEX_MAGIC {
        return Err(Error::format(path, "not a UMSEIDX1 index file"));
    }
    let vocab_size = r.u64().map_err(bad)? as usize;
    let k1 = r.f64().map_err(bad)?;
    let b = r.f64().map_err(bad)?;
    let n = r.u64().map_err(bad)? as usize;
    let mut ids = Vec::with_capacity(n.min(1 << 20));
    let mut docs = Vec::with_capacity(n.min(1 << 20));
    for _ in 0..n {
        ids.push(r.str().map_err(bad)?);
        let len = r.u32().map_err(bad)? as usize;
        let mut toks = Vec::with_capacity(len.min(1 << 20));
        for _ in 0..len {
            toks.push(r.u32().map_err(bad)?);
        }
        docs.push(toks);
    }
    r.finish().map_err(bad)?;
    Bm25Index::from_token_docs(docs, ids, vocab_size, k1, b).map_err(|e| Error::format(path, e.to_string()))
}
