use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use umse_core::model::{ModelConfig, ModelParameters};

use super::binio::{put_f64, put_str, put_u32, put_u64, read_all, write_all, Reader};
use crate::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 9] = b"UMSECKPT1";

pub fn write_checkpoint(path: &Path, params: &ModelParameters) -> Result<()> {
    let mut buf = Vec::new();
    buf.extend_from_slice(CHECKPOINT_MAGIC);
    let config = serde_json::to_string(&params.config).expect("model config serializes");
    put_str(&mut buf, &config);
    put_u32(&mut buf, params.layout.tensors.len() as u32);
    for t in &params.layout.tensors {
        put_str(&mut buf, &t.name);
        put_u32(&mut buf, t.shape.len() as u32);
        for &d in &t.shape {
            put_u64(&mut buf, d as u64);
        }
        for &v in &params.values[t.range()] {
            put_f64(&mut buf, v);
        }
    }
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    write_all(BufWriter::new(f), &buf).map_err(|e| Error::io(path, e))
}

pub fn read_checkpoint(path: &Path) -> Result<ModelParameters> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    let bytes = read_all(f).map_err(|e| Error::io(path, e))?;
    let bad = |m: String| Error::format(path, m);
    let mut r = Reader::new(&bytes);
    if r.take(CHECKPOINT_MAGIC.len()).map_err(bad)? != CHECKPOINT_MAGIC {
        return Err(Error::format(path, "not a UMSECKPT1 checkpoint"));
    }
    let config: ModelConfig = serde_json::from_str(&r.str().map_err(bad)?)
        .map_err(|e| Error::format(path, format!("model config: {e}")))?;
    let n = r.u32().map_err(bad)? as usize;
    let mut tensors = Vec::with_capacity(n.min(4096));
    for _ in 0..n {
        let name = r.str().map_err(bad)?;
        let ndim = r.u32().map_err(bad)? as usize;
        let mut shape = Vec::with_capacity(ndim.min(8));
        for _ in 0..ndim {
            shape.push(r.u64().map_err(bad)? as usize);
        }
        let numel = shape
            .iter()
            .try_fold(1usize, |a, &d| a.checked_mul(d))
            .ok_or_else(|| Error::format(path, format!("tensor {name}: shape overflow")))?;
        let raw = r
            .take(numel.checked_mul(8).ok_or_else(|| Error::format(path, "tensor too large"))?)
            .map_err(bad)?;
        let data = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        tensors.push((name, shape, data));
    }
    r.finish().map_err(bad)?;
    ModelParameters::from_named(config, tensors).map_err(|e| Error::format(path, e.to_string()))
}
