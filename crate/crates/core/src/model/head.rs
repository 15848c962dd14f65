use alloc::vec;
use alloc::vec::Vec;

use super::params::ModelParameters;
use crate::linalg::{gemm, MatMut, MatRef};
use crate::math;

/// Activations of the three-layer tanh classifier for a batch of pooled
/// vectors.
#[derive(Debug, Clone)]
pub struct HeadCache {
    pub batch: usize,
    e: Vec<f64>,
    t1: Vec<f64>,
    t2: Vec<f64>,
    pub logits: Vec<f64>,
    /// Row `i` holds `(p-, p+)` for example `i`.
    pub probs: Vec<f64>,
}

fn affine(x: &[f64], rows: usize, n_in: usize, w: &[f64], b: &[f64], n_out: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(rows * n_out);
    for _ in 0..rows {
        out.extend_from_slice(b);
    }
    gemm(
        1.0,
        MatRef::new(x, rows, n_in, n_in),
        MatRef::new(w, n_in, n_out, n_out),
        1.0,
        MatMut::new(&mut out, rows, n_out, n_out),
    );
    out
}

/// Two-way softmax computed from the max-shifted logits.
pub fn softmax2(l0: f64, l1: f64) -> [f64; 2] {
    let m = l0.max(l1);
    let e0 = math::exp(l0 - m);
    let e1 = math::exp(l1 - m);
    let s = e0 + e1;
    [e0 / s, e1 / s]
}

fn dims(params: &ModelParameters) -> [usize; 4] {
    let c = &params.config;
    [c.hidden_dim, c.mlp_dims[0], c.mlp_dims[1], c.mlp_dims[2]]
}

pub fn head_forward(params: &ModelParameters, e: Vec<f64>) -> HeadCache {
    let d = dims(params);
    let o = &params.layout.offsets;
    let v = &params.values;
    let w = |i: usize| &v[o.head_w[i]..o.head_w[i] + d[i] * d[i + 1]];
    let b = |i: usize| &v[o.head_b[i]..o.head_b[i] + d[i + 1]];
    let batch = e.len() / d[0];
    let mut t1 = affine(&e, batch, d[0], w(0), b(0), d[1]);
    t1.iter_mut().for_each(|x| *x = math::tanh(*x));
    let mut t2 = affine(&t1, batch, d[1], w(1), b(1), d[2]);
    t2.iter_mut().for_each(|x| *x = math::tanh(*x));
    let logits = affine(&t2, batch, d[2], w(2), b(2), d[3]);
    let probs = logits
        .chunks(2)
        .flat_map(|l| softmax2(l[0], l[1]))
        .collect();
    HeadCache {
        batch,
        e,
        t1,
        t2,
        logits,
        probs,
    }
}

fn affine_backward(
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
        for (a, d) in db.iter_mut().zip(&dy[r * n_out..(r + 1) * n_out]) {
            *a += d;
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

/// Back-propagates `dlogits` (batch × 2) through the classifier into
/// `grads` and returns the gradient with respect to the pooled vectors.
pub fn head_backward(params: &ModelParameters, cache: &HeadCache, dlogits: &[f64], grads: &mut [f64]) -> Vec<f64> {
    let d = dims(params);
    let o = &params.layout.offsets;
    let v = &params.values;
    let w = |i: usize| &v[o.head_w[i]..o.head_w[i] + d[i] * d[i + 1]];
    let step = |i: usize, x: &[f64], dy: &[f64], grads: &mut [f64]| {
        let ws = w(i);
        // Weight then bias are adjacent in the flat buffer.
        let (gw, gb) = grads[o.head_w[i]..o.head_b[i] + d[i + 1]].split_at_mut(d[i] * d[i + 1]);
        affine_backward(x, d[i], ws, dy, d[i + 1], gw, gb)
    };
    let mut dt2 = step(2, &cache.t2, dlogits, grads);
    dt2.iter_mut().zip(&cache.t2).for_each(|(g, t)| *g *= 1.0 - t * t);
    let mut dt1 = step(1, &cache.t1, &dt2, grads);
    dt1.iter_mut().zip(&cache.t1).for_each(|(g, t)| *g *= 1.0 - t * t);
    step(0, &cache.e, &dt1, grads)
}
