use std::fs;

use proptest::prelude::*;
use umse::formats::{
    read_checkpoint, read_index, read_vocab, write_checkpoint, write_index, write_vocab, CHECKPOINT_MAGIC, INDEX_MAGIC,
};
use umse::jsonl;
use umse_core::corpus::{build_vocab, gen_synthetic_corpus, Provenance};
use umse_core::datagen::{generate_dataset, DatasetKind};
use umse_core::metaeval::{Dimension, HumanAnnotation, RatingScale};
use umse_core::model::{ModelConfig, ModelParameters};
use umse_core::retrieval::build_index;

#[test]
fn checkpoint_round_trips_bit_exactly() {
    let d = tempfile::tempdir().unwrap();
    let mut config = ModelConfig::tiny(40);
    config.dropout = 0.1;
    let mut params = ModelParameters::init(config).unwrap();
    params.values[3] = -0.0;
    params.values[4] = f64::MIN_POSITIVE / 4.0;
    let p = d.path().join("m.ckpt");
    write_checkpoint(&p, &params).unwrap();
    let bytes = fs::read(&p).unwrap();
    assert_eq!(&bytes[..9], CHECKPOINT_MAGIC);
    let back = read_checkpoint(&p).unwrap();
    assert_eq!(back, params);
    assert!(back.values.iter().zip(&params.values).all(|(a, b)| a.to_bits() == b.to_bits()));
    let p2 = d.path().join("m2.ckpt");
    write_checkpoint(&p2, &back).unwrap();
    assert_eq!(fs::read(&p2).unwrap(), bytes);
}

#[test]
fn corrupt_checkpoints_are_rejected() {
    let d = tempfile::tempdir().unwrap();
    let params = ModelParameters::init(ModelConfig::tiny(40)).unwrap();
    let p = d.path().join("m.ckpt");
    write_checkpoint(&p, &params).unwrap();
    let bytes = fs::read(&p).unwrap();
    for cut in [0, 5, 9, 40, bytes.len() - 1] {
        fs::write(&p, &bytes[..cut]).unwrap();
        assert!(read_checkpoint(&p).is_err(), "truncated at {cut}");
    }
    let mut extra = bytes.clone();
    extra.push(0);
    fs::write(&p, &extra).unwrap();
    assert!(read_checkpoint(&p).is_err());
    let mut wrong = bytes;
    wrong[0] = b'X';
    fs::write(&p, &wrong).unwrap();
    assert!(read_checkpoint(&p).is_err());
}

#[test]
fn index_and_vocab_round_trip() {
    let d = tempfile::tempdir().unwrap();
    let corpus = gen_synthetic_corpus(40, 4, 3).unwrap();
    let vocab = build_vocab(&corpus, 1).unwrap();
    let index = build_index(&corpus, &vocab).unwrap();
    let vp = d.path().join("vocab.txt");
    let ip = d.path().join("index.bin");
    write_vocab(&vp, &vocab).unwrap();
    write_index(&ip, &index).unwrap();
    assert_eq!(&fs::read(&ip).unwrap()[..8], INDEX_MAGIC);
    let v2 = read_vocab(&vp).unwrap();
    assert_eq!(v2.len(), vocab.len());
    for id in 0..vocab.len() as u32 {
        assert_eq!(v2.token(id), vocab.token(id));
    }
    let first_line = fs::read_to_string(&vp).unwrap().lines().next().unwrap().to_string();
    assert_eq!(vocab.id(&first_line), Some(4));
    let i2 = read_index(&ip).unwrap();
    assert_eq!(i2.n_docs(), index.n_docs());
    for doc in 0..index.n_docs() {
        assert_eq!(i2.most_similar(doc, 3).unwrap(), index.most_similar(doc, 3).unwrap());
        let q = index.doc_terms(doc);
        assert_eq!(i2.bm25_score(q, 0).to_bits(), index.bm25_score(q, 0).to_bits());
    }
    let ip2 = d.path().join("index2.bin");
    write_index(&ip2, &i2).unwrap();
    assert_eq!(fs::read(&ip).unwrap(), fs::read(&ip2).unwrap());
}

#[test]
fn datasets_round_trip_through_jsonl() {
    let d = tempfile::tempdir().unwrap();
    let corpus = gen_synthetic_corpus(30, 3, 5).unwrap();
    let vocab = build_vocab(&corpus, 1).unwrap();
    let index = build_index(&corpus, &vocab).unwrap();
    let cp = d.path().join("c.jsonl");
    jsonl::write_corpus(&cp, &corpus).unwrap();
    let corpus2 = jsonl::read_corpus(&cp, Provenance::Synthetic).unwrap();
    assert_eq!(corpus2, corpus);
    for kind in [DatasetKind::SummaryMatching, DatasetKind::DocumentMatching] {
        let data = generate_dataset(&corpus, &index, kind, 10, 12).unwrap();
        let p = d.path().join("d.jsonl");
        jsonl::write_dataset(&p, &data).unwrap();
        assert_eq!(jsonl::read_dataset(&p, &corpus2).unwrap(), data);
    }
}

#[test]
fn annotations_round_trip_and_validate() {
    let d = tempfile::tempdir().unwrap();
    let scale = RatingScale { min: 1.0, max: 5.0 };
    let anns = vec![HumanAnnotation {
        doc_id: "d".into(),
        system_id: "s".into(),
        summary: "text".into(),
        ratings: [1.0, 2.5, 5.0, 3.0],
    }];
    let p = d.path().join("a.jsonl");
    jsonl::write_annotations(&p, scale, &anns).unwrap();
    let (s2, a2) = jsonl::read_annotations(&p).unwrap();
    assert_eq!(s2, scale);
    assert_eq!(a2, anns);
    assert_eq!(a2[0].rating(Dimension::Consistency), 2.5);
    fs::write(&p, "{\"scale\":{\"min\":1,\"max\":5}}\n{\"doc_id\":\"d\",\"system_id\":\"s\",\"summary\":\"\",\"ratings\":{\"coherence\":9,\"consistency\":1,\"fluency\":1,\"relevance\":1}}\n").unwrap();
    assert!(jsonl::read_annotations(&p).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]
    #[test]
    fn checkpoint_round_trip_any_values(seed in any::<u64>(), bits in prop::collection::vec(any::<u64>(), 1..50)) {
        let d = tempfile::tempdir().unwrap();
        let mut config = ModelConfig::tiny(30);
        config.init_seed = seed;
        let mut params = ModelParameters::init(config).unwrap();
        let n = params.values.len();
        for (i, b) in bits.iter().enumerate() {
            let v = f64::from_bits(*b);
            if v.is_finite() {
                params.values[i * 7 % n] = v;
            }
        }
        let p = d.path().join("m.ckpt");
        write_checkpoint(&p, &params).unwrap();
        prop_assert_eq!(read_checkpoint(&p).unwrap(), params);
    }
}
