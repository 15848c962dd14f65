use std::collections::BTreeMap;

use umse_core::corpus::{build_vocab, gen_synthetic_corpus, Corpus};
use umse_core::datagen::{generate_dataset, lead3, to_scenario_examples, DatasetKind, LabeledExample};
use umse_core::retrieval::{build_index, Bm25Index};
use umse_core::Scenario;

fn setup(n: usize) -> (Corpus, Bm25Index) {
    let corpus = gen_synthetic_corpus(n, 10, 12).unwrap();
    let vocab = build_vocab(&corpus, 1).unwrap();
    let index = build_index(&corpus, &vocab).unwrap();
    (corpus, index)
}

/// Upper tail of the chi-square distribution for 1 or 2 degrees of freedom.
fn chi_square_p(x: f64, df: usize) -> f64 {
    match df {
        1 => libm::erfc((x / 2.0).sqrt()),
        2 => (-x / 2.0).exp(),
        _ => unreachable!(),
    }
}

#[test]
fn replaced_position_is_uniform() {
    let (corpus, index) = setup(1500);
    let data = generate_dataset(&corpus, &index, DatasetKind::SummaryMatching, 1200, 12).unwrap();
    let mut counts: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    let mut total = 0;
    for neg in data.iter().filter(|e| e.label == 0) {
        let d = corpus.ordinal_of(&neg.source_doc_id).unwrap();
        let lead = lead3(&corpus.documents()[d]).unwrap();
        // The donor reference is the one whose sentences the candidate
        // keeps everywhere but one slot.
        let donor = index
            .most_similar(d, 5)
            .unwrap()
            .into_iter()
            .map(|j| &corpus.documents()[j].reference_sentences)
            .find(|r| {
                r.len() == neg.candidate.len()
                    && r.iter().zip(&neg.candidate).filter(|(a, b)| a != b).count() == 1
            })
            .expect("donor found");
        let slot = donor.iter().zip(&neg.candidate).position(|(a, b)| a != b).unwrap();
        assert!(lead.contains(&neg.candidate[slot]));
        counts.entry(donor.len()).or_insert_with(|| vec![0; donor.len()])[slot] += 1;
        total += 1;
    }
    assert!(total >= 1000);
    for (len, c) in counts {
        let n: usize = c.iter().sum();
        let e = n as f64 / len as f64;
        let x: f64 = c.iter().map(|&o| (o as f64 - e).powi(2) / e).sum();
        let p = chi_square_p(x, len - 1);
        println!("length {len}: counts {c:?} chi2 {x:.3} p {p:.4}");
        assert!(p > 0.01, "length {len} counts {c:?}");
    }
}

fn shares_exactly_one(neg: &LabeledExample, lead: &[String]) -> bool {
    neg.candidate.iter().filter(|s| lead.contains(s)).count() == 1
}

#[test]
fn full_scale_contract() {
    let corpus = gen_synthetic_corpus(2000, 50, 12).unwrap();
    let vocab = build_vocab(&corpus, 1).unwrap();
    let index = build_index(&corpus, &vocab).unwrap();
    let sm = generate_dataset(&corpus, &index, DatasetKind::SummaryMatching, 15_000, 12).unwrap();
    let dm = generate_dataset(&corpus, &index, DatasetKind::DocumentMatching, 15_000, 12).unwrap();
    for data in [&sm, &dm] {
        assert_eq!(data.len(), 30_000);
        assert_eq!(data.iter().filter(|e| e.label == 1).count(), 15_000);
        for pair in data.chunks(2) {
            assert_eq!((pair[0].label, pair[1].label), (1, 0));
            assert_ne!(pair[0].candidate, pair[1].candidate);
        }
    }
    for neg in sm.iter().filter(|e| e.label == 0) {
        let d = &corpus.documents()[corpus.ordinal_of(&neg.source_doc_id).unwrap()];
        assert!(shares_exactly_one(neg, &lead3(d).unwrap()));
    }
    for neg in dm.iter().filter(|e| e.label == 0) {
        let own = &corpus.documents()[neg.document.unwrap()].reference_sentences;
        assert_eq!(own.len(), neg.candidate.len());
        assert_eq!(own.iter().zip(&neg.candidate).filter(|(a, b)| a != b).count(), 1);
    }
    let mut ex = to_scenario_examples(&sm, &corpus, &vocab).unwrap();
    ex.extend(to_scenario_examples(&dm, &corpus, &vocab).unwrap());
    for s in Scenario::ALL {
        assert_eq!(ex.iter().filter(|e| e.scenario == s).count(), 30_000);
    }
}
