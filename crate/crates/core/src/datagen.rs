//! Self-supervised training pairs.
//!
//! Summary matching pairs a reference summary with the lead-3 of its
//! document (positive) or with the BM25 neighbor's reference after one of
//! its sentences was swapped for a lead-3 sentence (negative). Document
//! matching pairs a document with its own reference (positive) or with that
//! reference after one sentence was swapped for a neighbor-reference
//! sentence (negative).

use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{tokenize, Corpus, Document, Vocabulary};
use crate::retrieval::Bm25Index;
use crate::{Error, Result, Scenario};

/// Neighbors tried before a document is skipped.
pub const MAX_NEIGHBOR_FAILURES: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum DatasetKind {
    SummaryMatching,
    DocumentMatching,
}

impl DatasetKind {
    pub fn as_str(self) -> &'static str {
        match self {
            DatasetKind::SummaryMatching => "summary_matching",
            DatasetKind::DocumentMatching => "document_matching",
        }
    }

    fn stream(self) -> u64 {
        match self {
            DatasetKind::SummaryMatching => 1,
            DatasetKind::DocumentMatching => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum NegativeStrategy {
    Bm25Swap,
}

impl NegativeStrategy {
    pub fn as_str(self) -> &'static str {
        match self {
            NegativeStrategy::Bm25Swap => "bm25_swap",
        }
    }
}

/// One constructed training instance. Summaries are kept as sentence lists
/// so construction invariants stay checkable; `document` is the corpus
/// ordinal of the paired document for document-matching examples.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledExample {
    pub kind: DatasetKind,
    pub candidate: Vec<String>,
    pub reference: Option<Vec<String>>,
    pub document: Option<usize>,
    pub label: u8,
    pub source_doc_id: String,
    pub negative_strategy: Option<NegativeStrategy>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScenarioExample {
    pub scenario: Scenario,
    pub candidate: Vec<u32>,
    pub reference: Option<Vec<u32>>,
    pub document: Option<Vec<u32>>,
    pub label: u8,
}

pub fn lead3(doc: &Document) -> Result<Vec<String>> {
    if doc.sentences.is_empty() {
        return Err(Error::EmptyDocument(doc.id.clone()));
    }
    Ok(doc.sentences.iter().take(3).cloned().collect())
}

pub fn lead3_text(doc: &Document) -> Result<String> {
    Ok(lead3(doc)?.join(" "))
}

fn replace_one<R: Rng>(base: &[String], donors: &[String], rng: &mut R) -> Vec<String> {
    let slot = rng.random_range(0..base.len());
    let donor = donors.choose(rng).expect("donor sentences are non-empty");
    let mut out = base.to_vec();
    out[slot] = donor.clone();
    out
}

fn check_index(corpus: &Corpus, index: &Bm25Index) -> Result<()> {
    if corpus.len() != index.n_docs() {
        return Err(Error::LengthMismatch {
            left: corpus.len(),
            right: index.n_docs(),
        });
    }
    Ok(())
}

/// Builds the summary-matching pair for document `doc`. Returns `Ok(None)`
/// when every tried neighbor was unusable.
pub fn make_summary_matching_pair<R: Rng>(
    corpus: &Corpus,
    index: &Bm25Index,
    doc: usize,
    rng: &mut R,
) -> Result<Option<(LabeledExample, LabeledExample)>> {
    check_index(corpus, index)?;
    let d = corpus
        .get(doc)
        .ok_or_else(|| Error::InvalidArgument(alloc::format!("document ordinal {doc}")))?;
    let lead = lead3(d)?;
    if d.reference_sentences.is_empty() {
        return Err(Error::EmptyDocument(d.id.clone()));
    }
    let neighbors = index.most_similar(doc, MAX_NEIGHBOR_FAILURES)?;
    for n in neighbors {
        let other = &corpus.documents()[n].reference_sentences;
        if other.is_empty() || *other == d.reference_sentences {
            continue;
        }
        let candidate = replace_one(other, &lead, rng);
        if candidate == lead {
            continue;
        }
        let positive = LabeledExample {
            kind: DatasetKind::SummaryMatching,
            candidate: lead,
            reference: Some(d.reference_sentences.clone()),
            document: None,
            label: 1,
            source_doc_id: d.id.clone(),
            negative_strategy: None,
        };
        let negative = LabeledExample {
            candidate,
            label: 0,
            negative_strategy: Some(NegativeStrategy::Bm25Swap),
            ..positive.clone()
        };
        return Ok(Some((positive, negative)));
    }
    Ok(None)
}

/// Builds the document-matching pair for document `doc`.
pub fn make_document_matching_pair<R: Rng>(
    corpus: &Corpus,
    index: &Bm25Index,
    doc: usize,
    rng: &mut R,
) -> Result<Option<(LabeledExample, LabeledExample)>> {
    check_index(corpus, index)?;
    let d = corpus
        .get(doc)
        .ok_or_else(|| Error::InvalidArgument(alloc::format!("document ordinal {doc}")))?;
    let own = &d.reference_sentences;
    if own.is_empty() || d.sentences.is_empty() {
        return Err(Error::EmptyDocument(d.id.clone()));
    }
    let neighbors = index.most_similar(doc, MAX_NEIGHBOR_FAILURES)?;
    for n in neighbors {
        let other = &corpus.documents()[n].reference_sentences;
        if other.is_empty() || other == own {
            continue;
        }
        let candidate = replace_one(own, other, rng);
        if candidate == *own {
            continue;
        }
        let positive = LabeledExample {
            kind: DatasetKind::DocumentMatching,
            candidate: own.clone(),
            reference: None,
            document: Some(doc),
            label: 1,
            source_doc_id: d.id.clone(),
            negative_strategy: None,
        };
        let negative = LabeledExample {
            candidate,
            label: 0,
            negative_strategy: Some(NegativeStrategy::Bm25Swap),
            ..positive.clone()
        };
        return Ok(Some((positive, negative)));
    }
    Ok(None)
}

fn make_pair(
    corpus: &Corpus,
    index: &Bm25Index,
    kind: DatasetKind,
    doc: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Option<(LabeledExample, LabeledExample)>> {
    let made = match kind {
        DatasetKind::SummaryMatching => make_summary_matching_pair(corpus, index, doc, rng),
        DatasetKind::DocumentMatching => make_document_matching_pair(corpus, index, doc, rng),
    };
    match made {
        Err(Error::EmptyDocument(_)) => Ok(None),
        other => other,
    }
}

/// The per-kind random stream used by [`generate_dataset`].
pub fn dataset_rng(kind: DatasetKind, seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(kind.stream());
    rng
}

/// Produces `n_pairs` positive/negative pairs, interleaved positive first.
/// Source documents are drawn without replacement while `n_pairs` does not
/// exceed the corpus size and with replacement otherwise.
pub fn generate_dataset(
    corpus: &Corpus,
    index: &Bm25Index,
    kind: DatasetKind,
    n_pairs: usize,
    seed: u64,
) -> Result<Vec<LabeledExample>> {
    check_index(corpus, index)?;
    if corpus.len() < 2 {
        return Err(Error::NoNeighbor);
    }
    let mut rng = dataset_rng(kind, seed);
    let mut out = Vec::with_capacity(2 * n_pairs);
    let push = |pair: (LabeledExample, LabeledExample), out: &mut Vec<LabeledExample>| {
        out.push(pair.0);
        out.push(pair.1);
    };
    if n_pairs <= corpus.len() {
        let mut order: Vec<usize> = (0..corpus.len()).collect();
        order.shuffle(&mut rng);
        for doc in order {
            if out.len() == 2 * n_pairs {
                break;
            }
            if let Some(pair) = make_pair(corpus, index, kind, doc, &mut rng)? {
                push(pair, &mut out);
            }
        }
        if out.len() < 2 * n_pairs {
            return Err(Error::InvalidArgument(alloc::format!(
                "corpus too small: only {} usable documents for {n_pairs} pairs",
                out.len() / 2
            )));
        }
    } else {
        let mut usable = alloc::vec![true; corpus.len()];
        while out.len() < 2 * n_pairs {
            if !usable.iter().any(|&u| u) {
                return Err(Error::InvalidArgument("corpus too small: no usable documents".into()));
            }
            let doc = rng.random_range(0..corpus.len());
            if !usable[doc] {
                continue;
            }
            match make_pair(corpus, index, kind, doc, &mut rng)? {
                Some(pair) => push(pair, &mut out),
                None => usable[doc] = false,
            }
        }
    }
    Ok(out)
}

/// Maps constructed examples onto scenario inputs: summary matching feeds
/// Sum-Ref and Sum-Doc-Ref (with the source document attached), document
/// matching feeds Sum-Doc.
pub fn to_scenario_examples(
    dataset: &[LabeledExample],
    corpus: &Corpus,
    vocab: &Vocabulary,
) -> Result<Vec<ScenarioExample>> {
    let mut out = Vec::with_capacity(dataset.len() * 2);
    for ex in dataset {
        let candidate = tokenize(&ex.candidate.join(" "), vocab);
        let doc = corpus
            .ordinal_of(&ex.source_doc_id)
            .and_then(|o| corpus.get(o))
            .ok_or_else(|| Error::MissingDocument(ex.source_doc_id.clone()))?;
        let document = tokenize(&doc.text, vocab);
        match ex.kind {
            DatasetKind::SummaryMatching => {
                let reference = ex
                    .reference
                    .as_ref()
                    .ok_or(Error::MissingField {
                        field: "reference",
                        scenario: "SR",
                    })
                    .map(|r| tokenize(&r.join(" "), vocab))?;
                out.push(ScenarioExample {
                    scenario: Scenario::SumRef,
                    candidate: candidate.clone(),
                    reference: Some(reference.clone()),
                    document: None,
                    label: ex.label,
                });
                out.push(ScenarioExample {
                    scenario: Scenario::SumDocRef,
                    candidate,
                    reference: Some(reference),
                    document: Some(document),
                    label: ex.label,
                });
            }
            DatasetKind::DocumentMatching => out.push(ScenarioExample {
                scenario: Scenario::SumDoc,
                candidate,
                reference: None,
                document: Some(document),
                label: ex.label,
            }),
        }
    }
    Ok(out)
}

/// Splits scenario examples into per-scenario streams indexed by
/// [`Scenario::index`].
pub fn by_scenario(examples: Vec<ScenarioExample>) -> [Vec<ScenarioExample>; 3] {
    let mut streams: [Vec<ScenarioExample>; 3] = Default::default();
    for ex in examples {
        streams[ex.scenario.index()].push(ex);
    }
    streams
}

fn fnv1a(s: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in s.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

/// Whether a source document belongs to the held-out split. The rule
/// depends only on the id, so both dataset kinds split consistently.
pub fn is_heldout(doc_id: &str, fraction: f64) -> bool {
    ((fnv1a(doc_id) % 10_000) as f64) < fraction * 10_000.0
}

/// Partitions a dataset into (train, held-out) by source document.
pub fn split_heldout(
    dataset: Vec<LabeledExample>,
    fraction: f64,
) -> (Vec<LabeledExample>, Vec<LabeledExample>) {
    dataset
        .into_iter()
        .partition(|ex| !is_heldout(&ex.source_doc_id, fraction))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{build_vocab, gen_synthetic_corpus, Provenance};
    use crate::retrieval::build_index;
    use alloc::vec;

    fn two_docs() -> (Corpus, Bm25Index) {
        let corpus = Corpus::new(
            vec![
                Document::new("a", "A one. A two. A three. A four.", "Ya one. Ya two. Ya three."),
                Document::new("b", "B one. B two.", "Yb one. Yb two."),
            ],
            Provenance::Real,
        )
        .unwrap();
        let vocab = build_vocab(&corpus, 1).unwrap();
        let index = build_index(&corpus, &vocab).unwrap();
        (corpus, index)
    }

    #[test]
    fn lead3_rules() {
        let d = Document::new("x", "s1. s2. s3. s4.", "");
        assert_eq!(lead3(&d).unwrap(), ["s1.", "s2.", "s3."]);
        assert_eq!(lead3(&Document::new("x", "s1. s2.", "")).unwrap(), ["s1.", "s2."]);
        assert_eq!(lead3(&Document::new("x", "s1.", "")).unwrap(), ["s1."]);
        assert!(lead3(&Document::new("x", "", "")).is_err());
    }

    #[test]
    fn summary_matching_shape() {
        let (corpus, index) = two_docs();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (pos, neg) = make_summary_matching_pair(&corpus, &index, 0, &mut rng)
            .unwrap()
            .unwrap();
        let lead = lead3(&corpus.documents()[0]).unwrap();
        let other = &corpus.documents()[1].reference_sentences;
        assert_eq!(pos.candidate, lead);
        assert_eq!(pos.label, 1);
        assert_eq!(neg.label, 0);
        assert_eq!(pos.reference.as_deref(), Some(&corpus.documents()[0].reference_sentences[..]));
        assert_eq!(neg.candidate.len(), other.len());
        let from_lead = neg.candidate.iter().filter(|s| lead.contains(s)).count();
        let from_other = neg.candidate.iter().filter(|s| other.contains(s)).count();
        assert_eq!(from_lead, 1);
        assert_eq!(from_other, other.len() - 1);
        assert!(pos.document.is_none() && neg.document.is_none());

        let mut rng2 = ChaCha8Rng::seed_from_u64(3);
        let again = make_summary_matching_pair(&corpus, &index, 0, &mut rng2)
            .unwrap()
            .unwrap();
        assert_eq!((pos, neg), again);
    }

    #[test]
    fn document_matching_single_sentence_reference() {
        let corpus = Corpus::new(
            vec![
                Document::new("a", "A one. A two.", "Only one."),
                Document::new("b", "B one. A two.", "Other one. Other two."),
            ],
            Provenance::Real,
        )
        .unwrap();
        let vocab = build_vocab(&corpus, 1).unwrap();
        let index = build_index(&corpus, &vocab).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (pos, neg) = make_document_matching_pair(&corpus, &index, 0, &mut rng)
            .unwrap()
            .unwrap();
        assert_eq!(pos.candidate, ["Only one."]);
        assert_eq!(pos.document, Some(0));
        assert_eq!(neg.candidate.len(), 1);
        assert!(corpus.documents()[1].reference_sentences.contains(&neg.candidate[0]));
        assert!(pos.reference.is_none());
    }

    #[test]
    fn no_neighbor_error() {
        let corpus = Corpus::new(vec![Document::new("a", "x.", "y.")], Provenance::Real).unwrap();
        let vocab = build_vocab(&corpus, 1).unwrap();
        let index = build_index(&corpus, &vocab).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(
            make_document_matching_pair(&corpus, &index, 0, &mut rng),
            Err(Error::NoNeighbor)
        );
        assert_eq!(
            generate_dataset(&corpus, &index, DatasetKind::SummaryMatching, 1, 0),
            Err(Error::NoNeighbor)
        );
    }

    #[test]
    fn identical_neighbor_reference_is_skipped() {
        let corpus = Corpus::new(
            vec![
                Document::new("a", "Same words. More.", "Same summary."),
                Document::new("b", "Same words. Less.", "Same summary."),
            ],
            Provenance::Real,
        )
        .unwrap();
        let vocab = build_vocab(&corpus, 1).unwrap();
        let index = build_index(&corpus, &vocab).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(make_document_matching_pair(&corpus, &index, 0, &mut rng), Ok(None));
    }

    fn synthetic(n: usize) -> (Corpus, Vocabulary, Bm25Index) {
        let corpus = gen_synthetic_corpus(n, 4, 7).unwrap();
        let vocab = build_vocab(&corpus, 1).unwrap();
        let index = build_index(&corpus, &vocab).unwrap();
        (corpus, vocab, index)
    }

    #[test]
    fn dataset_balance_and_interleaving() {
        let (corpus, _, index) = synthetic(20);
        for kind in [DatasetKind::SummaryMatching, DatasetKind::DocumentMatching] {
            let ds = generate_dataset(&corpus, &index, kind, 5, 1).unwrap();
            assert_eq!(ds.len(), 10);
            for (i, ex) in ds.iter().enumerate() {
                assert_eq!(ex.label, u8::from(i % 2 == 0));
                assert_eq!(ex.kind, kind);
            }
            let mut sources: Vec<&str> = ds.iter().step_by(2).map(|e| e.source_doc_id.as_str()).collect();
            sources.sort_unstable();
            sources.dedup();
            assert_eq!(sources.len(), 5, "sampled without replacement");
            assert_eq!(ds, generate_dataset(&corpus, &index, kind, 5, 1).unwrap());
        }
    }

    #[test]
    fn dataset_with_replacement_when_oversized() {
        let (corpus, _, index) = synthetic(6);
        let ds = generate_dataset(&corpus, &index, DatasetKind::DocumentMatching, 15, 2).unwrap();
        assert_eq!(ds.len(), 30);
        assert_eq!(ds.iter().filter(|e| e.label == 1).count(), 15);
    }

    #[test]
    fn document_matching_negative_differs_in_one_slot() {
        let (corpus, _, index) = synthetic(40);
        let ds = generate_dataset(&corpus, &index, DatasetKind::DocumentMatching, 40, 5).unwrap();
        for pair in ds.chunks(2) {
            let (pos, neg) = (&pair[0], &pair[1]);
            assert_eq!(pos.candidate.len(), neg.candidate.len());
            let diffs = pos
                .candidate
                .iter()
                .zip(&neg.candidate)
                .filter(|(a, b)| a != b)
                .count();
            assert_eq!(diffs, 1);
            let own = &corpus.documents()[pos.document.unwrap()].reference_sentences;
            assert_eq!(&pos.candidate, own);
        }
    }

    #[test]
    fn scenario_mapping() {
        let (corpus, vocab, index) = synthetic(12);
        let sm = generate_dataset(&corpus, &index, DatasetKind::SummaryMatching, 3, 1).unwrap();
        let dm = generate_dataset(&corpus, &index, DatasetKind::DocumentMatching, 3, 1).unwrap();
        let first = to_scenario_examples(&sm[..1], &corpus, &vocab).unwrap();
        assert_eq!(first.len(), 2);
        assert_eq!(first[0].scenario, Scenario::SumRef);
        assert_eq!(first[1].scenario, Scenario::SumDocRef);
        assert!(first.iter().all(|e| e.label == 1));
        assert!(first[0].document.is_none() && first[1].document.is_some());

        let neg = to_scenario_examples(&dm[1..2], &corpus, &vocab).unwrap();
        assert_eq!(neg.len(), 1);
        assert_eq!(neg[0].scenario, Scenario::SumDoc);
        assert_eq!(neg[0].label, 0);
        assert!(neg[0].reference.is_none());

        let mut all = sm.clone();
        all.extend(dm);
        let streams = by_scenario(to_scenario_examples(&all, &corpus, &vocab).unwrap());
        assert_eq!(streams.map(|s| s.len()), [6, 6, 6]);
    }

    #[test]
    fn missing_source_document() {
        let (corpus, vocab, index) = synthetic(8);
        let mut sm = generate_dataset(&corpus, &index, DatasetKind::SummaryMatching, 1, 1).unwrap();
        sm[0].source_doc_id = "nope".into();
        assert_eq!(
            to_scenario_examples(&sm, &corpus, &vocab),
            Err(Error::MissingDocument("nope".into()))
        );
    }

    #[test]
    fn heldout_split_is_by_document() {
        let (corpus, _, index) = synthetic(200);
        let ds = generate_dataset(&corpus, &index, DatasetKind::SummaryMatching, 200, 1).unwrap();
        let (train, held) = split_heldout(ds, 0.1);
        assert!(!held.is_empty() && !train.is_empty());
        assert_eq!(held.len() % 2, 0);
        for ex in &held {
            assert!(train.iter().all(|t| t.source_doc_id != ex.source_doc_id));
        }
    }
}
