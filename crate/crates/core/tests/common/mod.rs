//! Brute-force reference implementations shared by the integration tests.
//! They recompute everything from raw inputs and share no code with the
//! crate.
#![allow(dead_code)]

/// Okapi BM25 of `query` against document `d`, straight from raw counts.
pub fn bm25_brute(docs: &[Vec<u32>], query: &[u32], d: usize, k1: f64, b: f64) -> f64 {
    let n = docs.len() as f64;
    let avgdl = docs.iter().map(|x| x.len() as f64).sum::<f64>() / n;
    let dl = docs[d].len() as f64;
    let mut total = 0.0;
    for &t in query {
        let tf = docs[d].iter().filter(|&&x| x == t).count() as f64;
        if tf == 0.0 {
            continue;
        }
        let df = docs.iter().filter(|doc| doc.contains(&t)).count() as f64;
        let idf = ((n - df + 0.5) / (df + 0.5) + 1.0).ln();
        total += idf * tf * (k1 + 1.0) / (tf + k1 * (1.0 - b + b * dl / avgdl));
    }
    total
}

/// Index of the best-scoring other document, ties to the lower ordinal.
pub fn brute_top1(docs: &[Vec<u32>], d: usize, k1: f64, b: f64) -> usize {
    let mut best = None::<(usize, f64)>;
    for j in 0..docs.len() {
        if j == d {
            continue;
        }
        let s = bm25_brute(docs, &docs[d], j, k1, b);
        if best.is_none_or(|(_, bs)| s > bs) {
            best = Some((j, s));
        }
    }
    best.unwrap().0
}

/// Average ranks by counting: 1 + #smaller + (#equal - 1) / 2.
pub fn ranks_brute(x: &[f64]) -> Vec<f64> {
    x.iter()
        .map(|&v| {
            let less = x.iter().filter(|&&w| w < v).count() as f64;
            let eq = x.iter().filter(|&&w| w == v).count() as f64;
            1.0 + less + (eq - 1.0) / 2.0
        })
        .collect()
}

pub fn pearson_brute(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    sxy / (sxx * syy).sqrt()
}

pub fn spearman_brute(x: &[f64], y: &[f64]) -> f64 {
    pearson_brute(&ranks_brute(x), &ranks_brute(y))
}

/// Kendall tau-b by enumerating every pair.
pub fn kendall_brute(x: &[f64], y: &[f64]) -> f64 {
    let (mut conc, mut disc, mut tx, mut ty) = (0i64, 0i64, 0i64, 0i64);
    for i in 0..x.len() {
        for j in i + 1..x.len() {
            let dx = x[i] - x[j];
            let dy = y[i] - y[j];
            if dx == 0.0 && dy == 0.0 {
                continue;
            } else if dx == 0.0 {
                tx += 1;
            } else if dy == 0.0 {
                ty += 1;
            } else if (dx > 0.0) == (dy > 0.0) {
                conc += 1;
            } else {
                disc += 1;
            }
        }
    }
    let c = conc as f64;
    let d = disc as f64;
    (c - d) / ((c + d + tx as f64) * (c + d + ty as f64)).sqrt()
}
