//! Shared domain types and the JSON Lines schemas every pipeline stage reads
//! and writes.
//!
//! All offsets are byte offsets into UTF-8 text. Records are value objects and
//! can be shared freely across worker threads.

use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A raw note or dialogue text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub text: String,
    #[serde(default)]
    pub meta: BTreeMap<String, String>,
}

impl Document {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            text: text.into(),
            meta: BTreeMap::new(),
        }
    }

    pub fn with_meta(mut self, key: impl Into<String>, value: impl Into<String>) -> Self {
        self.meta.insert(key.into(), value.into());
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SpanSource {
    #[serde(rename = "lexicon")]
    LexiconMatch,
    #[serde(rename = "ner")]
    ExternalNer,
}

/// An entity mention `[start, end)` in byte offsets.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AnnotationSpan {
    pub start: usize,
    pub end: usize,
    pub label: String,
    /// External tagger output usually omits this field.
    #[serde(default = "external_source")]
    pub source: SpanSource,
}

fn external_source() -> SpanSource {
    SpanSource::ExternalNer
}

impl AnnotationSpan {
    pub fn new(start: usize, end: usize, label: impl Into<String>, source: SpanSource) -> Self {
        Self {
            start,
            end,
            label: label.into(),
            source,
        }
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }
}

/// One record of `annotations.jsonl`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub doc_id: String,
    pub spans: Vec<AnnotationSpan>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Speaker {
    Doctor,
    Patient,
}

impl Speaker {
    pub fn tag(self) -> &'static str {
        match self {
            Speaker::Doctor => "Doctor",
            Speaker::Patient => "Patient",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Turn {
    pub speaker: Speaker,
    pub text: String,
}

impl Turn {
    pub fn new(speaker: Speaker, text: impl Into<String>) -> Self {
        Self {
            speaker,
            text: text.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Natural,
    SyntheticStage1,
    SyntheticStage2,
}

impl Provenance {
    pub fn is_synthetic(self) -> bool {
        !matches!(self, Provenance::Natural)
    }
}

/// Ordered doctor/patient turns. `rank_score` is only set on synthetic
/// dialogues that went through ranking.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dialogue {
    pub note_id: String,
    pub turns: Vec<Turn>,
    pub provenance: Provenance,
    #[serde(default)]
    pub rank_score: Option<f64>,
}

impl Dialogue {
    /// Renders the turns as `Speaker: text` lines.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (i, turn) in self.turns.iter().enumerate() {
            if i > 0 {
                out.push('\n');
            }
            out.push_str(turn.speaker.tag());
            out.push_str(": ");
            out.push_str(&turn.text);
        }
        out
    }
}

/// A contiguous section of a note. `start..end` covers the header line (if
/// any) and the body; `body` is the trimmed text after the header line.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NoteSection {
    pub header: Option<String>,
    pub body: String,
    pub start: usize,
    pub end: usize,
}

/// Reads a JSON Lines file, skipping blank lines. Each value is returned with
/// its 1-based line number.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<(usize, T)>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let lineno = idx + 1;
        let trimmed = line.trim_start_matches('\u{feff}');
        if trimmed.trim().is_empty() {
            continue;
        }
        let value = serde_json::from_str(trimmed).map_err(|e| Error::parse(path, lineno, e))?;
        out.push((lineno, value));
    }
    Ok(out)
}

/// Writes one JSON object per line, returning the number of records.
pub fn write_jsonl<'a, T, I>(path: &Path, records: I) -> Result<usize>
where
    T: Serialize + 'a,
    I: IntoIterator<Item = &'a T>,
{
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let mut count = 0;
    for record in records {
        serde_json::to_writer(&mut w, record)
            .map_err(|e| Error::io(path, std::io::Error::other(e)))?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
        count += 1;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(count)
}

pub fn load_corpus(path: &Path) -> Result<Vec<Document>> {
    let docs: Vec<(usize, Document)> = read_jsonl(path)?;
    let mut seen = HashSet::with_capacity(docs.len());
    let mut out = Vec::with_capacity(docs.len());
    for (line, doc) in docs {
        if doc.id.is_empty() {
            return Err(Error::parse(path, line, "document id must be non-empty"));
        }
        if !seen.insert(doc.id.clone()) {
            return Err(Error::DuplicateId(doc.id));
        }
        out.push(doc);
    }
    Ok(out)
}

pub fn write_corpus(docs: &[Document], path: &Path) -> Result<usize> {
    write_jsonl(path, docs)
}

/// Checks every span against `doc.text` and returns them sorted by
/// `(start, end)`.
pub fn validate_spans(doc: &Document, spans: &[AnnotationSpan]) -> Result<Vec<AnnotationSpan>> {
    let len = doc.text.len();
    for span in spans {
        if span.start >= span.end || span.end > len {
            return Err(Error::SpanRange {
                start: span.start,
                end: span.end,
                len,
            });
        }
        if !doc.text.is_char_boundary(span.start) || !doc.text.is_char_boundary(span.end) {
            return Err(Error::SpanBoundary {
                start: span.start,
                end: span.end,
            });
        }
    }
    let mut sorted = spans.to_vec();
    sorted.sort_by_key(|s| (s.start, s.end));
    Ok(sorted)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn span(start: usize, end: usize) -> AnnotationSpan {
        AnnotationSpan::new(start, end, "x", SpanSource::LexiconMatch)
    }

    #[test]
    fn load_preserves_file_order() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("docs.jsonl");
        std::fs::write(
            &path,
            "{\"id\":\"b\",\"text\":\"second\",\"meta\":{}}\n{\"id\":\"a\",\"text\":\"first\"}\n",
        )
        .unwrap();
        let docs = load_corpus(&path).unwrap();
        assert_eq!(docs.len(), 2);
        assert_eq!(docs[0].id, "b");
        assert_eq!(docs[1].text, "first");
    }

    #[test]
    fn empty_file_is_empty_corpus() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("docs.jsonl");
        std::fs::write(&path, "").unwrap();
        assert!(load_corpus(&path).unwrap().is_empty());
    }

    #[test]
    fn duplicate_id_is_named() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("docs.jsonl");
        let mut body = String::new();
        for i in 1..=8 {
            let id = if i == 3 || i == 7 {
                "n1".to_string()
            } else {
                format!("d{i}")
            };
            body.push_str(&format!("{{\"id\":\"{id}\",\"text\":\"t\"}}\n"));
        }
        std::fs::write(&path, body).unwrap();
        let err = load_corpus(&path).unwrap_err();
        assert!(matches!(&err, Error::DuplicateId(id) if id == "n1"));
        assert!(err.to_string().contains("n1"));
    }

    #[test]
    fn malformed_line_names_line_number() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("docs.jsonl");
        std::fs::write(&path, "{\"id\":\"a\",\"text\":\"x\"}\n{not json\n").unwrap();
        match load_corpus(&path).unwrap_err() {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn write_counts_records() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.jsonl");
        let docs: Vec<_> = (0..3)
            .map(|i| Document::new(format!("d{i}"), "x"))
            .collect();
        assert_eq!(write_corpus(&docs, &path).unwrap(), 3);
        let raw = std::fs::read_to_string(&path).unwrap();
        assert_eq!(raw.lines().count(), 3);

        assert_eq!(write_corpus(&[], &path).unwrap(), 0);
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "");
    }

    #[test]
    fn write_to_missing_dir_reports_path() {
        let err = write_corpus(&[], Path::new("/nonexistent-dir/x/out.jsonl")).unwrap_err();
        assert!(err.to_string().contains("/nonexistent-dir/x/out.jsonl"));
    }

    #[test]
    fn validate_accepts_in_range() {
        let doc = Document::new("d", "0123456789");
        assert_eq!(
            validate_spans(&doc, &[span(2, 5)]).unwrap(),
            vec![span(2, 5)]
        );
    }

    #[test]
    fn validate_rejects_out_of_range() {
        let doc = Document::new("d", "0123456789");
        assert!(matches!(
            validate_spans(&doc, &[span(8, 12)]),
            Err(Error::SpanRange { .. })
        ));
        assert!(matches!(
            validate_spans(&doc, &[span(4, 4)]),
            Err(Error::SpanRange { .. })
        ));
    }

    #[test]
    fn validate_rejects_split_character() {
        let doc = Document::new("d", "fièvre");
        // 'è' occupies bytes 2..4
        assert!(matches!(
            validate_spans(&doc, &[span(0, 3)]),
            Err(Error::SpanBoundary { .. })
        ));
        assert!(validate_spans(&doc, &[span(0, 4)]).is_ok());
    }

    #[test]
    fn validate_sorts() {
        let doc = Document::new("d", "0123456789");
        let out = validate_spans(&doc, &[span(5, 7), span(0, 3)]).unwrap();
        assert_eq!(out, vec![span(0, 3), span(5, 7)]);
    }

    #[test]
    fn dialogue_schema() {
        let d = Dialogue {
            note_id: "n".into(),
            turns: vec![Turn::new(Speaker::Doctor, "hi")],
            provenance: Provenance::SyntheticStage2,
            rank_score: None,
        };
        let json = serde_json::to_string(&d).unwrap();
        assert_eq!(
            json,
            r#"{"note_id":"n","turns":[{"speaker":"doctor","text":"hi"}],"provenance":"synthetic_stage2","rank_score":null}"#
        );
    }

    fn arb_doc() -> impl Strategy<Value = Document> {
        (
            "[a-z0-9]{1,8}",
            "\\PC{0,40}",
            proptest::collection::btree_map("[a-z]{1,5}", "\\PC{0,8}", 0..3),
        )
            .prop_map(|(id, text, meta)| Document { id, text, meta })
    }

    proptest! {
        #[test]
        fn jsonl_round_trip(docs in proptest::collection::vec(arb_doc(), 0..8)) {
            let mut seen = HashSet::new();
            let docs: Vec<_> = docs.into_iter().filter(|d| seen.insert(d.id.clone())).collect();
            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join("rt.jsonl");
            write_corpus(&docs, &path).unwrap();
            prop_assert_eq!(load_corpus(&path).unwrap(), docs);
        }

        #[test]
        fn validate_is_idempotent(text in "\\PC{1,30}", raw in proptest::collection::vec((0usize..60, 0usize..60), 0..6)) {
            let doc = Document::new("d", text);
            let spans: Vec<_> = raw
                .into_iter()
                .filter_map(|(a, b)| {
                    let (s, e) = (a.min(b), a.max(b));
                    (s < e && e <= doc.text.len() && doc.text.is_char_boundary(s) && doc.text.is_char_boundary(e))
                        .then(|| span(s, e))
                })
                .collect();
            let once = validate_spans(&doc, &spans).unwrap();
            let twice = validate_spans(&doc, &once).unwrap();
            prop_assert_eq!(once, twice);
        }
    }
}
