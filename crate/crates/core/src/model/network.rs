//! Pre-norm transformer encoder over a packed batch, with its exact
//! reverse-mode gradient.
//!
//! Sequences are stacked row-wise into one `N × z` matrix so the dense
//! projections run as single large products; attention is evaluated per
//! sequence, with keys limited to the sequence's non-pad prefix.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::layout::{Layout, Slot};
use super::params::{LayerOffsets, ModelParameters};
use crate::corpus::PAD;
use crate::linalg::{gemm, MatMut, MatRef};
use crate::math;
use crate::{Error, Result};

pub(crate) const LN_EPS: f64 = 1e-5;
const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2 / pi)
const GELU_K: f64 = 0.044_715;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Segment {
    pub start: usize,
    pub len: usize,
    pub valid: usize,
}

#[derive(Debug, Clone, Default)]
struct LnCache {
    xhat: Vec<f64>,
    rstd: Vec<f64>,
}

#[derive(Debug, Clone)]
struct LayerCache {
    ln1: LnCache,
    a: Vec<f64>,
    qkv: Vec<f64>,
    probs: Vec<f64>,
    ctx: Vec<f64>,
    attn_mask: Option<Vec<f64>>,
    ln2: LnCache,
    b: Vec<f64>,
    hpre: Vec<f64>,
    htanh: Vec<f64>,
    hact: Vec<f64>,
    ffn_mask: Option<Vec<f64>>,
}

/// Everything the backward pass needs from one forward pass.
#[derive(Debug, Clone)]
pub struct EncoderCache {
    pub segments: Vec<Segment>,
    slots: Vec<Slot>,
    positions: Vec<usize>,
    emb_mask: Option<Vec<f64>>,
    layers: Vec<LayerCache>,
    final_ln: LnCache,
    /// Final token representations, `rows × z`.
    pub hidden: Vec<f64>,
}

impl EncoderCache {
    pub fn rows(&self) -> usize {
        self.positions.len()
    }

    /// Hidden rows of segment `i`.
    pub fn segment_hidden(&self, i: usize, z: usize) -> &[f64] {
        let s = self.segments[i];
        &self.hidden[s.start * z..(s.start + s.len) * z]
    }
}

fn layer_norm(x: &[f64], gain: &[f64], bias: &[f64], z: usize, out: &mut [f64], cache: &mut LnCache) {
    let rows = x.len() / z;
    cache.xhat.resize(x.len(), 0.0);
    cache.rstd.resize(rows, 0.0);
    for r in 0..rows {
        let row = &x[r * z..(r + 1) * z];
        let mean = row.iter().sum::<f64>() / z as f64;
        let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / z as f64;
        let rstd = 1.0 / math::sqrt(var + LN_EPS);
        cache.rstd[r] = rstd;
        for j in 0..z {
            let xh = (row[j] - mean) * rstd;
            cache.xhat[r * z + j] = xh;
            out[r * z + j] = xh * gain[j] + bias[j];
        }
    }
}

/// Returns dx; accumulates gain/bias grads.
fn layer_norm_backward(
    dy: &[f64],
    cache: &LnCache,
    gain: &[f64],
    z: usize,
    dgain: &mut [f64],
    dbias: &mut [f64],
) -> Vec<f64> {
    let rows = dy.len() / z;
    let mut dx = vec![0.0; dy.len()];
    let mut dxhat = vec![0.0; z];
    for r in 0..rows {
        let dyr = &dy[r * z..(r + 1) * z];
        let xh = &cache.xhat[r * z..(r + 1) * z];
        let mut mean_d = 0.0;
        let mut mean_dx = 0.0;
        for j in 0..z {
            dgain[j] += dyr[j] * xh[j];
            dbias[j] += dyr[j];
            dxhat[j] = dyr[j] * gain[j];
            mean_d += dxhat[j];
            mean_dx += dxhat[j] * xh[j];
        }
        mean_d /= z as f64;
        mean_dx /= z as f64;
        let rstd = cache.rstd[r];
        for j in 0..z {
            dx[r * z + j] = rstd * (dxhat[j] - mean_d - xh[j] * mean_dx);
        }
    }
    dx
}

/// `out = x · w + b` for row-major `x: rows × n_in`, `w: n_in × n_out`.
fn linear(x: &[f64], n_in: usize, w: &[f64], b: &[f64], n_out: usize, out: &mut [f64]) {
    let rows = x.len() / n_in;
    for r in 0..rows {
        out[r * n_out..(r + 1) * n_out].copy_from_slice(b);
    }
    gemm(
        1.0,
        MatRef::new(x, rows, n_in, n_in),
        MatRef::new(w, n_in, n_out, n_out),
        1.0,
        MatMut::new(out, rows, n_out, n_out),
    );
}

/// Accumulates `dw += x^T · dy`, `db += colsum(dy)` and returns `dy · w^T`.
fn linear_backward(
    x: &[f64],
    n_in: usize,
    w: &[f64],
    dy: &[f64],
    n_out: usize,
    dw: &mut [f64],
    db: &mut [f64],
) -> Vec<f64> {
    let rows = dy.len() / n_out;
    gemm(
        1.0,
        MatRef::new(x, rows, n_in, n_in).t(),
        MatRef::new(dy, rows, n_out, n_out),
        1.0,
        MatMut::new(dw, n_in, n_out, n_out),
    );
    for r in 0..rows {
        for (acc, d) in db.iter_mut().zip(&dy[r * n_out..(r + 1) * n_out]) {
            *acc += d;
        }
    }
    let mut dx = vec![0.0; rows * n_in];
    gemm(
        1.0,
        MatRef::new(dy, rows, n_out, n_out),
        MatRef::new(w, n_in, n_out, n_out).t(),
        0.0,
        MatMut::new(&mut dx, rows, n_in, n_in),
    );
    dx
}

/// Expands the stored query and value biases to the fused projection
/// width. Keys carry no bias: it would add the same amount to every score
/// of a query and so never change the attention weights.
fn qkv_bias(qv: &[f64], z: usize) -> Vec<f64> {
    let mut b = vec![0.0; 3 * z];
    b[..z].copy_from_slice(&qv[..z]);
    b[2 * z..].copy_from_slice(&qv[z..]);
    b
}

fn dropout_mask(rng: &mut ChaCha8Rng, n: usize, rate: f64) -> Vec<f64> {
    let keep = 1.0 / (1.0 - rate);
    (0..n)
        .map(|_| if rng.random_bool(rate) { 0.0 } else { keep })
        .collect()
}

fn layer_slices<'a>(values: &'a [f64], o: &LayerOffsets, z: usize, f: usize) -> [&'a [f64]; 12] {
    [
        &values[o.ln1_gain..o.ln1_gain + z],
        &values[o.ln1_bias..o.ln1_bias + z],
        &values[o.qkv_w..o.qkv_w + z * 3 * z],
        &values[o.qkv_b..o.qkv_b + 2 * z],
        &values[o.out_w..o.out_w + z * z],
        &values[o.out_b..o.out_b + z],
        &values[o.ln2_gain..o.ln2_gain + z],
        &values[o.ln2_bias..o.ln2_bias + z],
        &values[o.ffn_in_w..o.ffn_in_w + z * f],
        &values[o.ffn_in_b..o.ffn_in_b + f],
        &values[o.ffn_out_w..o.ffn_out_w + f * z],
        &values[o.ffn_out_b..o.ffn_out_b + z],
    ]
}

fn layer_slices_mut<'a>(grads: &'a mut [f64], o: &LayerOffsets, z: usize, f: usize) -> Vec<&'a mut [f64]> {
    let offs = [
        (o.ln1_gain, z),
        (o.ln1_bias, z),
        (o.qkv_w, z * 3 * z),
        (o.qkv_b, 2 * z),
        (o.out_w, z * z),
        (o.out_b, z),
        (o.ln2_gain, z),
        (o.ln2_bias, z),
        (o.ffn_in_w, z * f),
        (o.ffn_in_b, f),
        (o.ffn_out_w, f * z),
        (o.ffn_out_b, z),
    ];
    // Tensors of one layer are laid out contiguously in this order.
    debug_assert!(offs.windows(2).all(|w| w[0].0 + w[0].1 == w[1].0));
    let start = offs[0].0;
    let end = offs[11].0 + offs[11].1;
    let mut rest = &mut grads[start..end];
    let mut out = Vec::with_capacity(12);
    for &(_, len) in &offs {
        let (head, tail) = rest.split_at_mut(len);
        out.push(head);
        rest = tail;
    }
    out
}

fn validate(params: &ModelParameters, layouts: &[&Layout]) -> Result<()> {
    let c = &params.config;
    for l in layouts {
        if l.len() > c.max_len || l.valid_len > l.len() || l.valid_len == 0 {
            return Err(Error::InvalidArgument(alloc::format!(
                "layout length {} (valid {}) exceeds max_len {}",
                l.len(),
                l.valid_len,
                c.max_len
            )));
        }
        for s in &l.slots {
            match *s {
                Slot::Token(t) if t as usize >= c.vocab_size => {
                    return Err(Error::InvalidArgument(alloc::format!("token id {t} outside vocabulary")))
                }
                Slot::Prefix(p) if p >= c.prefix_len => {
                    return Err(Error::InvalidArgument(alloc::format!("prefix row {p} out of range")))
                }
                _ => {}
            }
        }
    }
    Ok(())
}

/// Runs the encoder. Passing an RNG enables dropout (training mode).
pub fn encode_batch(
    params: &ModelParameters,
    layouts: &[&Layout],
    mut dropout: Option<&mut ChaCha8Rng>,
) -> Result<EncoderCache> {
    validate(params, layouts)?;
    let c = &params.config;
    let (z, f, heads, dh) = (c.hidden_dim, c.ffn_dim, c.n_heads, c.head_dim());
    let v = &params.values;
    let o = &params.layout.offsets;
    let rate = if dropout.is_some() { c.dropout } else { 0.0 };

    let mut segments = Vec::with_capacity(layouts.len());
    let mut slots = Vec::new();
    let mut positions = Vec::new();
    for l in layouts {
        segments.push(Segment {
            start: slots.len(),
            len: l.len(),
            valid: l.valid_len,
        });
        slots.extend_from_slice(&l.slots);
        positions.extend(0..l.len());
    }
    let n = slots.len();

    let mut x = vec![0.0; n * z];
    for (r, (slot, &pos)) in slots.iter().zip(&positions).enumerate() {
        let src = match *slot {
            Slot::Token(t) => o.token + t as usize * z,
            Slot::Pad => o.token + PAD as usize * z,
            Slot::Prefix(p) => o.prefix + p * z,
        };
        let pe = o.position + pos * z;
        for j in 0..z {
            x[r * z + j] = v[src + j] + v[pe + j];
        }
    }
    let emb_mask = match (&mut dropout, rate > 0.0) {
        (Some(rng), true) => {
            let m = dropout_mask(rng, n * z, rate);
            x.iter_mut().zip(&m).for_each(|(a, s)| *a *= s);
            Some(m)
        }
        _ => None,
    };

    let scale = 1.0 / math::sqrt(dh as f64);
    let mut layers = Vec::with_capacity(c.n_layers);
    for lo in &o.layers {
        let [g1, b1, wqkv, bqkv, wo, bo, g2, b2, w1, bf1, w2, bf2] = layer_slices(v, lo, z, f);
        let mut ln1 = LnCache::default();
        let mut a = vec![0.0; n * z];
        layer_norm(&x, g1, b1, z, &mut a, &mut ln1);
        let mut qkv = vec![0.0; n * 3 * z];
        linear(&a, z, wqkv, &qkv_bias(bqkv, z), 3 * z, &mut qkv);

        let mut ctx = vec![0.0; n * z];
        let mut probs = Vec::new();
        for seg in &segments {
            for h in 0..heads {
                let q = MatRef::new(&qkv[seg.start * 3 * z + h * dh..], seg.len, dh, 3 * z);
                let k = MatRef::new(&qkv[seg.start * 3 * z + z + h * dh..], seg.valid, dh, 3 * z);
                let vv = MatRef::new(&qkv[seg.start * 3 * z + 2 * z + h * dh..], seg.valid, dh, 3 * z);
                let base = probs.len();
                probs.resize(base + seg.len * seg.valid, 0.0);
                let p = &mut probs[base..];
                gemm(scale, q, k.t(), 0.0, MatMut::new(p, seg.len, seg.valid, seg.valid));
                for row in p.chunks_mut(seg.valid) {
                    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    let mut sum = 0.0;
                    for e in row.iter_mut() {
                        *e = math::exp(*e - max);
                        sum += *e;
                    }
                    for e in row.iter_mut() {
                        *e /= sum;
                    }
                }
                gemm(
                    1.0,
                    MatRef::new(&probs[base..], seg.len, seg.valid, seg.valid),
                    vv,
                    0.0,
                    MatMut::new(&mut ctx[seg.start * z + h * dh..], seg.len, dh, z),
                );
            }
        }
        let mut attn_out = vec![0.0; n * z];
        linear(&ctx, z, wo, bo, z, &mut attn_out);
        let attn_mask = match (&mut dropout, rate > 0.0) {
            (Some(rng), true) => Some(dropout_mask(rng, n * z, rate)),
            _ => None,
        };
        match &attn_mask {
            Some(m) => x.iter_mut().zip(attn_out.iter().zip(m)).for_each(|(a, (d, s))| *a += d * s),
            None => x.iter_mut().zip(&attn_out).for_each(|(a, d)| *a += d),
        }

        let mut ln2 = LnCache::default();
        let mut b = vec![0.0; n * z];
        layer_norm(&x, g2, b2, z, &mut b, &mut ln2);
        let mut hpre = vec![0.0; n * f];
        linear(&b, z, w1, bf1, f, &mut hpre);
        let mut htanh = vec![0.0; n * f];
        let mut hact = vec![0.0; n * f];
        for i in 0..n * f {
            let u = hpre[i];
            let t = math::tanh(GELU_C * (u + GELU_K * u * u * u));
            htanh[i] = t;
            hact[i] = 0.5 * u * (1.0 + t);
        }
        let mut ffn_out = vec![0.0; n * z];
        linear(&hact, f, w2, bf2, z, &mut ffn_out);
        let ffn_mask = match (&mut dropout, rate > 0.0) {
            (Some(rng), true) => Some(dropout_mask(rng, n * z, rate)),
            _ => None,
        };
        match &ffn_mask {
            Some(m) => x.iter_mut().zip(ffn_out.iter().zip(m)).for_each(|(a, (d, s))| *a += d * s),
            None => x.iter_mut().zip(&ffn_out).for_each(|(a, d)| *a += d),
        }
        layers.push(LayerCache {
            ln1,
            a,
            qkv,
            probs,
            ctx,
            attn_mask,
            ln2,
            b,
            hpre,
            htanh,
            hact,
            ffn_mask,
        });
    }

    let mut final_ln = LnCache::default();
    let mut hidden = vec![0.0; n * z];
    layer_norm(
        &x,
        &v[o.final_gain..o.final_gain + z],
        &v[o.final_bias..o.final_bias + z],
        z,
        &mut hidden,
        &mut final_ln,
    );
    if !hidden.iter().all(|h| h.is_finite()) {
        return Err(Error::NumericalDivergence);
    }
    Ok(EncoderCache {
        segments,
        slots,
        positions,
        emb_mask,
        layers,
        final_ln,
        hidden,
    })
}

/// Accumulates into `grads` the gradient of a loss whose derivative with
/// respect to `cache.hidden` is `d_hidden`.
pub fn encode_backward(params: &ModelParameters, cache: &EncoderCache, d_hidden: &[f64], grads: &mut [f64]) {
    let c = &params.config;
    let (z, f, heads, dh) = (c.hidden_dim, c.ffn_dim, c.n_heads, c.head_dim());
    let v = &params.values;
    let o = &params.layout.offsets;
    let scale = 1.0 / math::sqrt(dh as f64);
    assert_eq!(d_hidden.len(), cache.rows() * z);

    let mut dx = {
        let gain = &v[o.final_gain..o.final_gain + z];
        let (dg, db) = grads[o.final_gain..o.final_gain + 2 * z].split_at_mut(z);
        debug_assert_eq!(o.final_bias, o.final_gain + z);
        layer_norm_backward(d_hidden, &cache.final_ln, gain, z, dg, db)
    };

    for (lo, lc) in o.layers.iter().zip(&cache.layers).rev() {
        let [g1, _, wqkv, _, wo, _, g2, _, w1, _, w2, _] = layer_slices(v, lo, z, f);
        let mut gs = layer_slices_mut(grads, lo, z, f);

        // Feed-forward branch.
        let d_ffn: Vec<f64> = match &lc.ffn_mask {
            Some(m) => dx.iter().zip(m).map(|(d, s)| d * s).collect(),
            None => dx.clone(),
        };
        let mut dh_act = {
            let (lo_, hi) = gs.split_at_mut(11);
            linear_backward(&lc.hact, f, w2, &d_ffn, z, lo_[10], hi[0])
        };
        for i in 0..dh_act.len() {
            let u = lc.hpre[i];
            let t = lc.htanh[i];
            let du = GELU_C * (1.0 + 3.0 * GELU_K * u * u);
            dh_act[i] *= 0.5 * (1.0 + t) + 0.5 * u * (1.0 - t * t) * du;
        }
        let db_ln2 = {
            let (lo_, hi) = gs.split_at_mut(9);
            linear_backward(&lc.b, z, w1, &dh_act, f, lo_[8], hi[0])
        };
        let d_mid = {
            let (lo_, hi) = gs.split_at_mut(7);
            layer_norm_backward(&db_ln2, &lc.ln2, g2, z, lo_[6], hi[0])
        };
        dx.iter_mut().zip(&d_mid).for_each(|(a, d)| *a += d);

        // Attention branch.
        let d_attn: Vec<f64> = match &lc.attn_mask {
            Some(m) => dx.iter().zip(m).map(|(d, s)| d * s).collect(),
            None => dx.clone(),
        };
        let dctx = {
            let (lo_, hi) = gs.split_at_mut(5);
            linear_backward(&lc.ctx, z, wo, &d_attn, z, lo_[4], hi[0])
        };
        let n = cache.rows();
        let mut dqkv = vec![0.0; n * 3 * z];
        let mut poff = 0;
        let mut dp = Vec::new();
        for seg in &cache.segments {
            for h in 0..heads {
                let p = &lc.probs[poff..poff + seg.len * seg.valid];
                poff += seg.len * seg.valid;
                let qoff = seg.start * 3 * z + h * dh;
                let koff = qoff + z;
                let voff = qoff + 2 * z;
                let dctx_h = MatRef::new(&dctx[seg.start * z + h * dh..], seg.len, dh, z);
                // dP = dctx_h · V^T
                dp.clear();
                dp.resize(seg.len * seg.valid, 0.0);
                gemm(
                    1.0,
                    dctx_h,
                    MatRef::new(&lc.qkv[voff..], seg.valid, dh, 3 * z).t(),
                    0.0,
                    MatMut::new(&mut dp, seg.len, seg.valid, seg.valid),
                );
                // dS = P ⊙ (dP − rowsum(P ⊙ dP)), then the score scale.
                for r in 0..seg.len {
                    let pr = &p[r * seg.valid..(r + 1) * seg.valid];
                    let dr = &mut dp[r * seg.valid..(r + 1) * seg.valid];
                    let dot: f64 = pr.iter().zip(dr.iter()).map(|(a, b)| a * b).sum();
                    for (d, &pv) in dr.iter_mut().zip(pr) {
                        *d = pv * (*d - dot) * scale;
                    }
                }
                let ds = MatRef::new(&dp, seg.len, seg.valid, seg.valid);
                // dV = P^T · dctx_h, written into the V columns.
                gemm(
                    1.0,
                    MatRef::new(p, seg.len, seg.valid, seg.valid).t(),
                    dctx_h,
                    1.0,
                    MatMut::new(&mut dqkv[voff..], seg.valid, dh, 3 * z),
                );
                // dQ = dS · K
                gemm(
                    1.0,
                    ds,
                    MatRef::new(&lc.qkv[koff..], seg.valid, dh, 3 * z),
                    1.0,
                    MatMut::new(&mut dqkv[qoff..], seg.len, dh, 3 * z),
                );
                // dK = dS^T · Q
                gemm(
                    1.0,
                    ds.t(),
                    MatRef::new(&lc.qkv[qoff..], seg.len, dh, 3 * z),
                    1.0,
                    MatMut::new(&mut dqkv[koff..], seg.valid, dh, 3 * z),
                );
            }
        }
        let da = {
            let mut db = vec![0.0; 3 * z];
            let dx = linear_backward(&lc.a, z, wqkv, &dqkv, 3 * z, gs[2], &mut db);
            let (bq, bv) = gs[3].split_at_mut(z);
            bq.iter_mut().zip(&db[..z]).for_each(|(g, d)| *g += d);
            bv.iter_mut().zip(&db[2 * z..]).for_each(|(g, d)| *g += d);
            dx
        };
        let d_in = {
            let (lo_, hi) = gs.split_at_mut(1);
            layer_norm_backward(&da, &lc.ln1, g1, z, lo_[0], hi[0])
        };
        dx.iter_mut().zip(&d_in).for_each(|(a, d)| *a += d);
    }

    if let Some(m) = &cache.emb_mask {
        dx.iter_mut().zip(m).for_each(|(d, s)| *d *= s);
    }
    for (r, (slot, &pos)) in cache.slots.iter().zip(&cache.positions).enumerate() {
        let dst = match *slot {
            Slot::Token(t) => o.token + t as usize * z,
            Slot::Pad => o.token + PAD as usize * z,
            Slot::Prefix(p) => o.prefix + p * z,
        };
        let pe = o.position + pos * z;
        for j in 0..z {
            let d = dx[r * z + j];
            grads[dst + j] += d;
            grads[pe + j] += d;
        }
    }
}
