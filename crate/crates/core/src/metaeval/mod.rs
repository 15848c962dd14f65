//! Correlating automatic scores with human ratings.

mod rouge;
mod stats;

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

pub use rouge::{lcs_len, rouge_l, rouge_n, Prf};
pub use stats::{
    average_ranks, incomplete_beta, kendall_tau, paired_t_test, pearson, spearman, student_t_two_tailed, TTest,
};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Dimension {
    Coherence,
    Consistency,
    Fluency,
    Relevance,
}

impl Dimension {
    pub const ALL: [Dimension; 4] = [
        Dimension::Coherence,
        Dimension::Consistency,
        Dimension::Fluency,
        Dimension::Relevance,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Dimension::Coherence => "coherence",
            Dimension::Consistency => "consistency",
            Dimension::Fluency => "fluency",
            Dimension::Relevance => "relevance",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Dimension {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Dimension::ALL
            .into_iter()
            .find(|d| d.as_str() == s)
            .ok_or_else(|| Error::InvalidArgument(alloc::format!("unknown dimension {s:?}")))
    }
}

/// Inclusive bounds declared by an annotation file.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RatingScale {
    pub min: f64,
    pub max: f64,
}

impl RatingScale {
    pub fn contains(&self, v: f64) -> bool {
        v >= self.min && v <= self.max
    }
}

/// Mean expert ratings for one system summary of one document, indexed by
/// [`Dimension::index`].
#[derive(Debug, Clone, PartialEq)]
pub struct HumanAnnotation {
    pub doc_id: String,
    pub system_id: String,
    pub summary: String,
    pub ratings: [f64; 4],
}

impl HumanAnnotation {
    pub fn rating(&self, d: Dimension) -> f64 {
        self.ratings[d.index()]
    }

    pub fn validate(&self, scale: &RatingScale) -> Result<()> {
        for d in Dimension::ALL {
            let v = self.rating(d);
            if !v.is_finite() || !scale.contains(v) {
                return Err(Error::InvalidArgument(alloc::format!(
                    "{d} rating {v} for ({}, {}) outside [{}, {}]",
                    self.doc_id,
                    self.system_id,
                    scale.min,
                    scale.max
                )));
            }
        }
        Ok(())
    }
}

/// A metric's score for one system summary.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ScoredSummary {
    pub doc_id: String,
    pub system_id: String,
    pub score: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Aggregation {
    /// Every (document, system) pair is one observation.
    #[default]
    SummaryLevel,
    /// Scores and ratings are averaged per system first.
    SystemLevel,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Significance {
    pub baseline: String,
    pub t: f64,
    pub p: f64,
    /// Number of paired observations.
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DimensionReport {
    pub dimension: Dimension,
    pub spearman_rho: f64,
    pub kendall_tau: f64,
    pub n: usize,
    #[cfg_attr(feature = "serde", serde(default, skip_serializing_if = "Vec::is_empty"))]
    pub significance: Vec<Significance>,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CorrelationReport {
    pub aggregation: Aggregation,
    pub dimensions: Vec<DimensionReport>,
}

type Key<'a> = (&'a str, &'a str);

fn annotation_index(annotations: &[HumanAnnotation]) -> Result<BTreeMap<Key<'_>, &HumanAnnotation>> {
    let mut m = BTreeMap::new();
    for a in annotations {
        if m.insert((a.doc_id.as_str(), a.system_id.as_str()), a).is_some() {
            return Err(Error::InvalidArgument(alloc::format!(
                "duplicate annotation for ({}, {})",
                a.doc_id,
                a.system_id
            )));
        }
    }
    Ok(m)
}

/// Pairs each score with its rating, failing on the first score that has
/// no annotation.
pub fn align<'a>(
    scores: &'a [ScoredSummary],
    annotations: &'a [HumanAnnotation],
    dimension: Dimension,
) -> Result<Vec<(&'a ScoredSummary, f64)>> {
    let index = annotation_index(annotations)?;
    scores
        .iter()
        .map(|s| {
            index
                .get(&(s.doc_id.as_str(), s.system_id.as_str()))
                .map(|a| (s, a.rating(dimension)))
                .ok_or_else(|| Error::MissingAnnotation {
                    doc_id: s.doc_id.clone(),
                    system_id: s.system_id.clone(),
                })
        })
        .collect()
}

fn system_means(pairs: &[(&ScoredSummary, f64)]) -> (Vec<f64>, Vec<f64>) {
    let mut acc: BTreeMap<&str, (f64, f64, usize)> = BTreeMap::new();
    for (s, r) in pairs {
        let e = acc.entry(s.system_id.as_str()).or_insert((0.0, 0.0, 0));
        e.0 += s.score;
        e.1 += r;
        e.2 += 1;
    }
    acc.values().map(|&(s, r, n)| (s / n as f64, r / n as f64)).unzip()
}

/// Spearman and Kendall correlation of `scores` with one rating dimension.
pub fn evaluate(
    scores: &[ScoredSummary],
    annotations: &[HumanAnnotation],
    dimension: Dimension,
    aggregation: Aggregation,
) -> Result<DimensionReport> {
    let pairs = align(scores, annotations, dimension)?;
    let (xs, ys): (Vec<f64>, Vec<f64>) = match aggregation {
        Aggregation::SummaryLevel => pairs.iter().map(|(s, r)| (s.score, *r)).unzip(),
        Aggregation::SystemLevel => system_means(&pairs),
    };
    Ok(DimensionReport {
        dimension,
        spearman_rho: spearman(&xs, &ys)?,
        kendall_tau: kendall_tau(&xs, &ys)?,
        n: xs.len(),
        significance: Vec::new(),
    })
}

/// Spearman correlation with the ratings inside each document, for every
/// document whose correlation is defined.
pub fn per_document_spearman(
    scores: &[ScoredSummary],
    annotations: &[HumanAnnotation],
    dimension: Dimension,
) -> Result<BTreeMap<String, f64>> {
    let pairs = align(scores, annotations, dimension)?;
    let mut docs: BTreeMap<&str, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for (s, r) in &pairs {
        let e = docs.entry(s.doc_id.as_str()).or_default();
        e.0.push(s.score);
        e.1.push(*r);
    }
    let mut out = BTreeMap::new();
    for (doc, (xs, ys)) in docs {
        match spearman(&xs, &ys) {
            Ok(rho) => {
                out.insert(String::from(doc), rho);
            }
            Err(Error::UndefinedCorrelation | Error::InvalidArgument(_)) => {}
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

/// Paired t-test of per-document correlations: `scores` against
/// `baseline` on the documents where both are defined. A positive `t`
/// means `scores` correlates better.
pub fn compare_with_baseline(
    scores: &[ScoredSummary],
    baseline: &[ScoredSummary],
    baseline_name: &str,
    annotations: &[HumanAnnotation],
    dimension: Dimension,
) -> Result<Significance> {
    let a = per_document_spearman(scores, annotations, dimension)?;
    let b = per_document_spearman(baseline, annotations, dimension)?;
    let (xs, ys): (Vec<f64>, Vec<f64>) = a
        .iter()
        .filter_map(|(doc, x)| b.get(doc).map(|y| (*x, *y)))
        .unzip();
    let t = paired_t_test(&xs, &ys)?;
    Ok(Significance {
        baseline: String::from(baseline_name),
        t: t.t,
        p: t.p,
        n: xs.len(),
    })
}

/// Reports every requested dimension, with significance against each
/// named baseline.
pub fn correlation_report(
    scores: &[ScoredSummary],
    annotations: &[HumanAnnotation],
    dimensions: &[Dimension],
    aggregation: Aggregation,
    baselines: &[(&str, &[ScoredSummary])],
) -> Result<CorrelationReport> {
    let mut out = Vec::with_capacity(dimensions.len());
    for &d in dimensions {
        let mut rep = evaluate(scores, annotations, d, aggregation)?;
        for &(name, base) in baselines {
            rep.significance.push(compare_with_baseline(scores, base, name, annotations, d)?);
        }
        out.push(rep);
    }
    Ok(CorrelationReport {
        aggregation,
        dimensions: out,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::format;

    fn fixture(docs: usize, systems: usize) -> (Vec<ScoredSummary>, Vec<HumanAnnotation>) {
        let mut scores = Vec::new();
        let mut ann = Vec::new();
        for d in 0..docs {
            for s in 0..systems {
                let q = ((d * 7 + s * 13) % 17) as f64 + s as f64 * 0.01;
                scores.push(ScoredSummary {
                    doc_id: format!("d{d}"),
                    system_id: format!("s{s}"),
                    score: q,
                });
                ann.push(HumanAnnotation {
                    doc_id: format!("d{d}"),
                    system_id: format!("s{s}"),
                    summary: String::new(),
                    ratings: [q, q * 2.0, q + 1.0, 1.0 + q / 20.0],
                });
            }
        }
        (scores, ann)
    }

    #[test]
    fn identical_scores_correlate_perfectly() {
        let (scores, ann) = fixture(10, 4);
        for d in Dimension::ALL {
            let r = evaluate(&scores, &ann, d, Aggregation::SummaryLevel).unwrap();
            assert!((r.spearman_rho - 1.0).abs() < 1e-12);
            assert!((r.kendall_tau - 1.0).abs() < 1e-12);
            assert_eq!(r.n, 40);
            let s = evaluate(&scores, &ann, d, Aggregation::SystemLevel).unwrap();
            assert_eq!(s.n, 4);
        }
    }

    #[test]
    fn missing_annotation_names_key() {
        let (mut scores, ann) = fixture(3, 3);
        scores.push(ScoredSummary {
            doc_id: "d9".into(),
            system_id: "s1".into(),
            score: 0.0,
        });
        match evaluate(&scores, &ann, Dimension::Fluency, Aggregation::SummaryLevel) {
            Err(Error::MissingAnnotation { doc_id, system_id }) => {
                assert_eq!((doc_id.as_str(), system_id.as_str()), ("d9", "s1"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn duplicate_annotation_rejected() {
        let (scores, mut ann) = fixture(3, 3);
        ann.push(ann[0].clone());
        assert!(evaluate(&scores, &ann, Dimension::Coherence, Aggregation::SummaryLevel).is_err());
    }

    #[test]
    fn scale_validation() {
        let (_, ann) = fixture(1, 2);
        let scale = RatingScale { min: 0.0, max: 100.0 };
        assert!(ann[0].validate(&scale).is_ok());
        assert!(ann[0].validate(&RatingScale { min: 1.0, max: 5.0 }).is_err());
        assert_eq!("relevance".parse::<Dimension>().unwrap(), Dimension::Relevance);
        assert!("style".parse::<Dimension>().is_err());
    }

    #[test]
    fn baseline_comparison_prefers_better_scorer() {
        let (scores, ann) = fixture(12, 6);
        let noisy: Vec<ScoredSummary> = scores
            .iter()
            .enumerate()
            .map(|(i, s)| ScoredSummary {
                score: ((i * 31) % 11) as f64,
                ..s.clone()
            })
            .collect();
        let rep = correlation_report(
            &scores,
            &ann,
            &[Dimension::Coherence],
            Aggregation::SummaryLevel,
            &[("noise", &noisy)],
        )
        .unwrap();
        let sig = &rep.dimensions[0].significance[0];
        assert!(sig.t > 0.0 && sig.p < 0.05, "{sig:?}");
        assert_eq!(sig.n, 12);
    }
}
