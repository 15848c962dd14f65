//! Template-based synthetic news corpus.
//!
//! Every topic owns a private pool of nouns, verbs and adjectives, so BM25
//! neighbors of a document almost always come from its own topic. Each
//! document has two named entities of its own; document sentences state
//! facts about them in a narrative register and the reference summary
//! restates two or three of those facts in a distinct, terser register.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Corpus, Document, Provenance};
use crate::{Error, Result};

const ONSETS: [&str; 16] = [
    "b", "d", "f", "g", "h", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z", "br",
];
const VOWELS: [&str; 5] = ["a", "e", "i", "o", "u"];
const CODAS: [&str; 5] = ["", "n", "r", "l", "s"];
const NUMBERS: [&str; 12] = [
    "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten", "twelve", "twenty",
    "forty",
];

const NOUNS_PER_TOPIC: usize = 10;
const VERBS_PER_TOPIC: usize = 6;
const ADJS_PER_TOPIC: usize = 6;
const PLACES: usize = 40;

struct Lexicon {
    used: BTreeSet<String>,
}

impl Lexicon {
    fn word(&mut self, rng: &mut ChaCha8Rng, syllables: usize) -> String {
        loop {
            let mut w = String::new();
            for _ in 0..syllables {
                w.push_str(ONSETS.choose(rng).unwrap());
                w.push_str(VOWELS.choose(rng).unwrap());
                w.push_str(CODAS.choose(rng).unwrap());
            }
            if self.used.insert(w.clone()) {
                return w;
            }
        }
    }
}

struct Topic {
    nouns: Vec<String>,
    verbs: Vec<String>,
    adjs: Vec<String>,
}

struct Fact<'a> {
    subject: &'a str,
    verb: &'a str,
    adj: &'a str,
    noun: &'a str,
    place: &'a str,
    number: &'a str,
}

fn capitalize(w: &str) -> String {
    let mut c = w.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}

fn doc_sentence(fact: &Fact<'_>, template: usize) -> String {
    let Fact {
        subject: s,
        verb: v,
        adj: a,
        noun: n,
        place: p,
        number: k,
    } = fact;
    match template {
        0 => format!("{s} {v} the {a} {n} near {p}."),
        1 => format!("Near {p}, {s} {v} {k} {n} this week."),
        2 => format!("Officials said {s} {v} a {a} {n}."),
        _ => format!("The {a} {n} from {s} drew crowds in {p}."),
    }
}

fn summary_sentence(fact: &Fact<'_>) -> String {
    format!("{} reportedly {} the {} {}.", fact.subject, fact.verb, fact.adj, fact.noun)
}

fn filler_sentence(topic: &Topic, place: &str, rng: &mut ChaCha8Rng) -> String {
    let a = topic.adjs.choose(rng).unwrap();
    let n = topic.nouns.choose(rng).unwrap();
    match rng.random_range(0..2) {
        0 => format!("Residents of {place} called the {n} {a}."),
        _ => format!("The {n} remains {a} for many in {place}."),
    }
}

/// Recovers the topic index encoded in a synthetic document id.
pub fn topic_of(doc_id: &str) -> Option<usize> {
    let rest = doc_id.strip_prefix("syn-t")?;
    rest.split('-').next()?.parse().ok()
}

pub fn gen_synthetic_corpus(n_docs: usize, topic_count: usize, rng_seed: u64) -> Result<Corpus> {
    if n_docs < 2 {
        return Err(Error::InvalidArgument("n_docs must be >= 2".into()));
    }
    if topic_count < 2 {
        return Err(Error::InvalidArgument("topic_count must be >= 2".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut lex = Lexicon {
        used: BTreeSet::new(),
    };
    let topics: Vec<Topic> = (0..topic_count)
        .map(|_| Topic {
            nouns: (0..NOUNS_PER_TOPIC).map(|_| lex.word(&mut rng, 2)).collect(),
            verbs: (0..VERBS_PER_TOPIC)
                .map(|_| format!("{}ed", lex.word(&mut rng, 2)))
                .collect(),
            adjs: (0..ADJS_PER_TOPIC)
                .map(|_| format!("{}ic", lex.word(&mut rng, 2)))
                .collect(),
        })
        .collect();
    let places: Vec<String> = (0..PLACES)
        .map(|_| capitalize(&lex.word(&mut rng, 2)))
        .collect();

    let mut docs = Vec::with_capacity(n_docs);
    for i in 0..n_docs {
        let t = i % topic_count;
        let topic = &topics[t];
        let main = capitalize(&lex.word(&mut rng, 3));
        let second = capitalize(&lex.word(&mut rng, 3));
        let n_sent = rng.random_range(6..=12);
        let n_facts = rng.random_range(3..=n_sent.min(6));
        let home = places.choose(&mut rng).unwrap();

        let facts: Vec<Fact<'_>> = (0..n_facts)
            .map(|_| Fact {
                subject: if rng.random_bool(0.7) { &main } else { &second },
                verb: topic.verbs.choose(&mut rng).unwrap(),
                adj: topic.adjs.choose(&mut rng).unwrap(),
                noun: topic.nouns.choose(&mut rng).unwrap(),
                place: if rng.random_bool(0.5) {
                    home
                } else {
                    places.choose(&mut rng).unwrap()
                },
                number: NUMBERS.choose(&mut rng).unwrap(),
            })
            .collect();

        // The first three sentences are always facts so lead-3 is informative;
        // the remaining facts are scattered among filler sentences.
        let mut slots: Vec<Option<usize>> = (0..3).map(Some).collect();
        let mut rest: Vec<Option<usize>> = (3..n_facts).map(Some).collect();
        rest.extend(core::iter::repeat_n(None, n_sent - n_facts));
        for j in (1..rest.len()).rev() {
            let k = rng.random_range(0..=j);
            rest.swap(j, k);
        }
        slots.extend(rest);

        let sentences: Vec<String> = slots
            .iter()
            .map(|slot| match slot {
                Some(f) => doc_sentence(&facts[*f], rng.random_range(0..4)),
                None => filler_sentence(topic, home, &mut rng),
            })
            .collect();

        let n_summary = rng.random_range(2..=3);
        let mut chosen: Vec<usize> = (0..n_facts).collect();
        for j in (1..chosen.len()).rev() {
            let k = rng.random_range(0..=j);
            chosen.swap(j, k);
        }
        chosen.truncate(n_summary);
        chosen.sort_unstable();
        let summary: Vec<String> = chosen.iter().map(|&f| summary_sentence(&facts[f])).collect();

        docs.push(Document::new(
            format!("syn-t{t:03}-{i:05}"),
            sentences.join(" "),
            summary.join(" "),
        ));
    }
    Corpus::new(docs, Provenance::Synthetic)
}
