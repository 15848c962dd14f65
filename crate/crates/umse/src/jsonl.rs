//! JSON-lines readers and writers for corpora, datasets, annotations and
//! scores. Blank lines are ignored; every parse error carries its 1-based
//! line number.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use umse_core::corpus::{segment_sentences, Corpus, Document, Provenance};
use umse_core::datagen::{DatasetKind, LabeledExample, NegativeStrategy};
use umse_core::metaeval::{Dimension, HumanAnnotation, RatingScale, ScoredSummary};

use crate::{Error, Result};

/// Calls `f` with the line number and parsed value of every non-blank line.
pub fn for_each_line<T, F>(path: &Path, mut f: F) -> Result<()>
where
    T: DeserializeOwned,
    F: FnMut(usize, T) -> Result<()>,
{
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let v = serde_json::from_str(&line).map_err(|e| Error::parse(path, i + 1, e.to_string()))?;
        f(i + 1, v)?;
    }
    Ok(())
}

pub fn read_lines<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let mut out = Vec::new();
    for_each_line(path, |_, v| {
        out.push(v);
        Ok(())
    })?;
    Ok(out)
}

pub fn write_lines<T: Serialize>(path: &Path, items: impl IntoIterator<Item = T>) -> Result<()> {
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(f);
    write_lines_to(&mut w, items).map_err(|e| Error::io(path, e))
}

pub fn write_lines_to<T: Serialize, W: Write>(w: &mut W, items: impl IntoIterator<Item = T>) -> std::io::Result<()> {
    for item in items {
        serde_json::to_writer(&mut *w, &item)?;
        w.write_all(b"\n")?;
    }
    w.flush()
}

#[derive(Debug, Serialize, Deserialize)]
struct CorpusLine {
    id: String,
    text: String,
    summary: String,
}

pub fn read_corpus(path: &Path, provenance: Provenance) -> Result<Corpus> {
    let mut docs = Vec::new();
    for_each_line(path, |_, l: CorpusLine| {
        docs.push(Document::new(l.id, l.text, l.summary));
        Ok(())
    })?;
    Corpus::new(docs, provenance).map_err(|e| Error::format(path, e.to_string()))
}

pub fn write_corpus(path: &Path, corpus: &Corpus) -> Result<()> {
    write_lines(
        path,
        corpus.documents().iter().map(|d| CorpusLine {
            id: d.id.clone(),
            text: d.text.clone(),
            summary: d.reference_summary.clone(),
        }),
    )
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DatasetLine {
    kind: String,
    label: u8,
    candidate: String,
    reference: Option<String>,
    doc_id: Option<String>,
    negative_strategy: Option<String>,
}

/// Writes a dataset. `doc_id` always names the source document, for both
/// kinds, so held-out splits and Sum-Doc-Ref inputs can be rebuilt.
pub fn write_dataset(path: &Path, dataset: &[LabeledExample]) -> Result<()> {
    write_lines(
        path,
        dataset.iter().map(|ex| DatasetLine {
            kind: ex.kind.as_str().to_string(),
            label: ex.label,
            candidate: ex.candidate.join(" "),
            reference: ex.reference.as_ref().map(|r| r.join(" ")),
            doc_id: Some(ex.source_doc_id.clone()),
            negative_strategy: ex.negative_strategy.map(|s| s.as_str().to_string()),
        }),
    )
}

pub fn read_dataset(path: &Path, corpus: &Corpus) -> Result<Vec<LabeledExample>> {
    let mut out = Vec::new();
    for_each_line(path, |line, l: DatasetLine| {
        let err = |m: String| Error::parse(path, line, m);
        let kind = match l.kind.as_str() {
            "summary_matching" => DatasetKind::SummaryMatching,
            "document_matching" => DatasetKind::DocumentMatching,
            k => return Err(err(format!("unknown kind {k:?}"))),
        };
        if l.label > 1 {
            return Err(err(format!("label must be 0 or 1, got {}", l.label)));
        }
        let doc_id = l.doc_id.ok_or_else(|| err("missing doc_id".into()))?;
        let ordinal = corpus
            .ordinal_of(&doc_id)
            .ok_or_else(|| err(format!("doc_id {doc_id:?} not in corpus")))?;
        let negative_strategy = match l.negative_strategy.as_deref() {
            None => None,
            Some("bm25_swap") => Some(NegativeStrategy::Bm25Swap),
            Some(s) => return Err(err(format!("unknown negative_strategy {s:?}"))),
        };
        let reference = match (kind, l.reference) {
            (DatasetKind::SummaryMatching, Some(r)) => Some(segment_sentences(&r)),
            (DatasetKind::SummaryMatching, None) => return Err(err("summary_matching line without reference".into())),
            (DatasetKind::DocumentMatching, Some(_)) => {
                return Err(err("document_matching line with a reference".into()))
            }
            (DatasetKind::DocumentMatching, None) => None,
        };
        out.push(LabeledExample {
            kind,
            candidate: segment_sentences(&l.candidate),
            reference,
            document: (kind == DatasetKind::DocumentMatching).then_some(ordinal),
            label: l.label,
            source_doc_id: doc_id,
            negative_strategy,
        });
        Ok(())
    })?;
    Ok(out)
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScaleHeader {
    scale: RatingScale,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct AnnotationLine {
    pub doc_id: String,
    pub system_id: String,
    pub summary: String,
    pub ratings: std::collections::BTreeMap<String, f64>,
}

/// Reads an annotation file whose first line is `{"scale": {"min": a,
/// "max": b}}`.
pub fn read_annotations(path: &Path) -> Result<(RatingScale, Vec<HumanAnnotation>)> {
    let mut scale: Option<RatingScale> = None;
    let mut out = Vec::new();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let n = i + 1;
        let Some(sc) = scale else {
            let h: ScaleHeader = serde_json::from_str(&line)
                .map_err(|e| Error::parse(path, n, format!("expected scale header: {e}")))?;
            if !(h.scale.min < h.scale.max) {
                return Err(Error::parse(path, n, "scale min must be below max"));
            }
            scale = Some(h.scale);
            continue;
        };
        let l: AnnotationLine = serde_json::from_str(&line).map_err(|e| Error::parse(path, n, e.to_string()))?;
        let mut ratings = [0.0; 4];
        for d in Dimension::ALL {
            ratings[d.index()] = *l
                .ratings
                .get(d.as_str())
                .ok_or_else(|| Error::parse(path, n, format!("missing rating {d}")))?;
        }
        if let Some(k) = l.ratings.keys().find(|k| k.parse::<Dimension>().is_err()) {
            return Err(Error::parse(path, n, format!("unknown rating dimension {k:?}")));
        }
        let a = HumanAnnotation {
            doc_id: l.doc_id,
            system_id: l.system_id,
            summary: l.summary,
            ratings,
        };
        a.validate(&sc).map_err(|e| Error::parse(path, n, e.to_string()))?;
        out.push(a);
    }
    let scale = scale.ok_or_else(|| Error::format(path, "empty annotation file"))?;
    Ok((scale, out))
}

pub fn write_annotations(path: &Path, scale: RatingScale, annotations: &[HumanAnnotation]) -> Result<()> {
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(f);
    let header = serde_json::to_value(ScaleHeader { scale }).unwrap();
    let lines = std::iter::once(header).chain(annotations.iter().map(|a| {
        let ratings = Dimension::ALL
            .iter()
            .map(|d| (d.as_str().to_string(), a.rating(*d)))
            .collect();
        serde_json::to_value(AnnotationLine {
            doc_id: a.doc_id.clone(),
            system_id: a.system_id.clone(),
            summary: a.summary.clone(),
            ratings,
        })
        .unwrap()
    }));
    write_lines_to(&mut w, lines).map_err(|e| Error::io(path, e))
}

/// One input of `umse score`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScoreInput {
    pub candidate: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub document: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub doc_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub system_id: Option<String>,
}

/// One output line of `umse score`. Keys from the input are echoed so the
/// file can be aligned with annotations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreLine {
    pub score: f64,
    pub scenario: String,
    pub fusion: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metric: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub doc_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub system_id: Option<String>,
}

/// Reads a score file for meta-evaluation; every line must carry `doc_id`
/// and `system_id`. Returns the metric name if all lines agree on one.
pub fn read_scores(path: &Path) -> Result<(Vec<ScoredSummary>, Option<String>)> {
    let mut out = Vec::new();
    let mut metric: Option<Option<String>> = None;
    for_each_line(path, |line, l: ScoreLine| {
        let key = |v: Option<String>, name: &str| v.ok_or_else(|| Error::parse(path, line, format!("missing {name}")));
        if !l.score.is_finite() {
            return Err(Error::parse(path, line, "score is not finite"));
        }
        match &metric {
            None => metric = Some(l.metric.clone()),
            Some(m) if *m != l.metric => metric = Some(None),
            _ => {}
        }
        out.push(ScoredSummary {
            doc_id: key(l.doc_id, "doc_id")?,
            system_id: key(l.system_id, "system_id")?,
            score: l.score,
        });
        Ok(())
    })?;
    Ok((out, metric.flatten()))
}
