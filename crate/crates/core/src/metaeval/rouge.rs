use alloc::collections::BTreeMap;
use alloc::vec;

/// Precision, recall and their harmonic mean.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl Prf {
    fn from_counts(hits: usize, cand: usize, refr: usize) -> Self {
        let precision = if cand == 0 { 0.0 } else { hits as f64 / cand as f64 };
        let recall = if refr == 0 { 0.0 } else { hits as f64 / refr as f64 };
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        Prf { precision, recall, f1 }
    }
}

fn ngram_counts<T: Ord>(tokens: &[T], n: usize) -> BTreeMap<&[T], usize> {
    let mut m = BTreeMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *m.entry(w).or_insert(0) += 1;
        }
    }
    m
}

/// ROUGE-N with clipped n-gram counts.
///
/// # Panics
///
/// If `n` is zero.
pub fn rouge_n<T: Ord>(candidate: &[T], reference: &[T], n: usize) -> Prf {
    assert!(n >= 1, "n-gram order must be at least 1");
    let c = ngram_counts(candidate, n);
    let r = ngram_counts(reference, n);
    let hits = c
        .iter()
        .map(|(g, &k)| k.min(r.get(g).copied().unwrap_or(0)))
        .sum();
    let total = |len: usize| (len + 1).saturating_sub(n);
    Prf::from_counts(hits, total(candidate.len()), total(reference.len()))
}

pub fn lcs_len<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y { prev[j] + 1 } else { prev[j + 1].max(cur[j]) };
        }
        core::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// ROUGE-L from the longest common subsequence.
pub fn rouge_l<T: PartialEq>(candidate: &[T], reference: &[T]) -> Prf {
    Prf::from_counts(lcs_len(candidate, reference), candidate.len(), reference.len())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> alloc::vec::Vec<&str> {
        s.split_whitespace().collect()
    }

    #[test]
    fn rouge_n_examples() {
        let r = rouge_n(&toks("the cat"), &toks("the cat sat"), 1);
        assert_eq!(r.precision, 1.0);
        assert!((r.recall - 2.0 / 3.0).abs() < 1e-15);
        assert!((r.f1 - 0.8).abs() < 1e-15);
        let same = rouge_n(&toks("a b c a"), &toks("a b c a"), 2);
        assert_eq!((same.precision, same.recall, same.f1), (1.0, 1.0, 1.0));
        assert_eq!(rouge_n(&toks("x y"), &toks("p q"), 1), Prf::default());
        assert_eq!(rouge_n::<&str>(&[], &[], 1), Prf::default());
        // Clipping: "the" appears twice in the candidate but once in the reference.
        let r = rouge_n(&toks("the the"), &toks("the cat"), 1);
        assert_eq!(r.precision, 0.5);
        // Shorter than n.
        assert_eq!(rouge_n(&toks("a"), &toks("a b"), 2), Prf::default());
    }

    #[test]
    fn rouge_l_examples() {
        let r = rouge_l(&toks("a x b"), &toks("a b"));
        assert_eq!(r.recall, 1.0);
        assert!((r.precision - 2.0 / 3.0).abs() < 1e-15);
        let same = rouge_l(&toks("q r s"), &toks("q r s"));
        assert_eq!(same.f1, 1.0);
        assert_eq!(rouge_l(&[], &toks("a b")), Prf::default());
        assert_eq!(lcs_len(&toks("a b c b d a b"), &toks("b d c a b a")), 4);
    }
}
