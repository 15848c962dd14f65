use proptest::prelude::*;
use umse_core::corpus::{
    build_vocab, gen_synthetic_corpus, normalize_tokens, segment_sentences, tokenize, topic_of, Corpus, Document,
    Provenance, UNK,
};
use umse_core::retrieval::build_index;

fn fixture_paragraphs() -> Vec<Vec<String>> {
    let text = include_str!("fixtures/segmentation.txt");
    let mut out = vec![Vec::new()];
    for line in text.lines().filter(|l| !l.starts_with('#')) {
        if line.trim().is_empty() {
            if !out.last().unwrap().is_empty() {
                out.push(Vec::new());
            }
        } else {
            out.last_mut().unwrap().push(line.to_string());
        }
    }
    out.retain(|p| !p.is_empty());
    out
}

#[test]
fn segmentation_matches_hand_segmented_fixture() {
    let paragraphs = fixture_paragraphs();
    assert_eq!(paragraphs.iter().map(Vec::len).sum::<usize>(), 20);
    for expected in paragraphs {
        assert_eq!(segment_sentences(&expected.join(" ")), expected);
    }
}

fn squash(s: &str) -> String {
    s.chars().filter(|c| !c.is_whitespace()).collect()
}

proptest! {
    #[test]
    fn segments_are_nonempty_and_preserve_content(text in "[A-Za-z .!?\n]{0,80}") {
        let parts = segment_sentences(&text);
        prop_assert!(parts.iter().all(|p| !p.trim().is_empty()));
        prop_assert_eq!(squash(&parts.concat()), squash(&text));
    }

    #[test]
    fn tokenize_is_idempotent_on_normalized_text(words in prop::collection::vec("[a-z]{1,6}[.,!]?", 1..12)) {
        let text = words.join(" ");
        let corpus = Corpus::new(vec![Document::new("d", text.clone(), "s")], Provenance::Real).unwrap();
        let vocab = build_vocab(&corpus, 1).unwrap();
        let once = normalize_tokens(&text).join(" ");
        prop_assert_eq!(normalize_tokens(&once).join(" "), once.clone());
        let ids = tokenize(&once, &vocab);
        prop_assert!(!ids.contains(&UNK));
        prop_assert_eq!(tokenize(&text, &vocab), ids);
    }
}

#[test]
fn synthetic_neighbors_share_topic() {
    let corpus = gen_synthetic_corpus(2000, 50, 12).unwrap();
    let vocab = build_vocab(&corpus, 1).unwrap();
    let index = build_index(&corpus, &vocab).unwrap();
    let mut same = 0;
    for (i, d) in corpus.documents().iter().enumerate() {
        let top = index.most_similar(i, 1).unwrap()[0];
        if topic_of(&d.id) == topic_of(&corpus.documents()[top].id) {
            same += 1;
        }
    }
    let rate = same as f64 / corpus.len() as f64;
    println!("same-topic top-1 rate {rate:.4}");
    assert!(rate >= 0.95, "same-topic rate {rate}");
}

#[test]
fn synthetic_corpus_is_reproducible_and_well_formed() {
    let a = gen_synthetic_corpus(100, 7, 12).unwrap();
    assert_eq!(a, gen_synthetic_corpus(100, 7, 12).unwrap());
    for d in a.documents() {
        assert!((6..=12).contains(&d.sentences.len()));
        assert!((2..=3).contains(&d.reference_sentences.len()));
    }
}
