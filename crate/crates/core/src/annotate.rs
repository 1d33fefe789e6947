//! Entity spans from the two sources the masking engine draws on: an exact
//! longest-match term lexicon and ingested output of an external NER model.

use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use crate::corpus::{read_jsonl, AnnotationRecord, AnnotationSpan, Document, SpanSource};
use crate::error::{Error, Result};
use crate::segmenter::tokenize;

/// Anything that can propose term spans for a document.
pub trait SpanAnnotator: Send + Sync {
    fn annotate(&self, doc: &Document) -> Vec<AnnotationSpan>;
}

/// Normalized phrases, each stored as its lowercase token sequence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TermLexicon {
    phrases: HashSet<Vec<String>>,
    max_phrase_len: usize,
}

impl TermLexicon {
    pub fn from_terms<I, S>(terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut phrases = HashSet::new();
        for term in terms {
            let normalized = normalize_term(term.as_ref());
            let toks: Vec<String> = tokenize(&normalized)
                .iter()
                .map(|t| t.slice(&normalized).to_string())
                .collect();
            if !toks.is_empty() {
                phrases.insert(toks);
            }
        }
        if phrases.is_empty() {
            return Err(Error::EmptyLexicon("<memory>".into()));
        }
        let max_phrase_len = phrases.iter().map(Vec::len).max().unwrap_or(0);
        Ok(Self {
            phrases,
            max_phrase_len,
        })
    }

    pub fn len(&self) -> usize {
        self.phrases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phrases.is_empty()
    }

    pub fn max_phrase_len(&self) -> usize {
        self.max_phrase_len
    }

    /// Membership test for an already-normalized phrase such as `"sore throat"`.
    pub fn contains_phrase(&self, phrase: &str) -> bool {
        let normalized = normalize_term(phrase);
        let toks: Vec<String> = tokenize(&normalized)
            .iter()
            .map(|t| t.slice(&normalized).to_string())
            .collect();
        self.phrases.contains(&toks)
    }

    /// Phrases rendered with single spaces, sorted.
    pub fn phrases(&self) -> Vec<String> {
        let mut out: Vec<String> = self.phrases.iter().map(|p| p.join(" ")).collect();
        out.sort();
        out
    }
}

/// Lowercase and collapse internal whitespace.
pub fn normalize_term(term: &str) -> String {
    term.split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase()
}

/// One surface form per line; blank lines are ignored.
pub fn build_lexicon(path: &Path) -> Result<TermLexicon> {
    let contents = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    TermLexicon::from_terms(contents.lines()).map_err(|e| match e {
        Error::EmptyLexicon(_) => Error::EmptyLexicon(path.to_path_buf()),
        other => other,
    })
}

/// Greedy left-to-right longest match over document tokens, case-insensitive.
/// Spans come back sorted and non-overlapping; the label is the matched phrase.
pub fn annotate_lexicon(doc: &Document, lex: &TermLexicon) -> Vec<AnnotationSpan> {
    let text = doc.text.as_str();
    let tokens = tokenize(text);
    let lowered: Vec<String> = tokens
        .iter()
        .map(|t| t.slice(text).to_lowercase())
        .collect();
    let mut spans = Vec::new();
    let mut probe: Vec<String> = Vec::with_capacity(lex.max_phrase_len);
    let mut i = 0;
    while i < tokens.len() {
        let longest = lex.max_phrase_len.min(tokens.len() - i);
        let mut matched = 0;
        for len in (1..=longest).rev() {
            probe.clear();
            probe.extend_from_slice(&lowered[i..i + len]);
            if lex.phrases.contains(&probe) {
                matched = len;
                break;
            }
        }
        if matched == 0 {
            i += 1;
            continue;
        }
        spans.push(AnnotationSpan::new(
            tokens[i].start,
            tokens[i + matched - 1].end,
            lowered[i..i + matched].join(" "),
            SpanSource::LexiconMatch,
        ));
        i += matched;
    }
    spans
}

impl SpanAnnotator for TermLexicon {
    fn annotate(&self, doc: &Document) -> Vec<AnnotationSpan> {
        annotate_lexicon(doc, self)
    }
}

/// External NER output keyed by document id.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct NerFile {
    pub spans: BTreeMap<String, Vec<AnnotationSpan>>,
}

impl NerFile {
    pub fn len(&self) -> usize {
        self.spans.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spans.is_empty()
    }

    pub fn get(&self, doc_id: &str) -> &[AnnotationSpan] {
        self.spans.get(doc_id).map_or(&[], Vec::as_slice)
    }

    /// Fails if any doc id has no counterpart in `corpus`.
    pub fn check_against(&self, corpus: &[Document]) -> Result<()> {
        let ids: HashSet<&str> = corpus.iter().map(|d| d.id.as_str()).collect();
        match self.spans.keys().find(|id| !ids.contains(id.as_str())) {
            Some(missing) => Err(Error::Integrity(format!(
                "NER annotations reference unknown document {missing:?}"
            ))),
            None => Ok(()),
        }
    }
}

pub fn load_ner_annotations(path: &Path) -> Result<NerFile> {
    let records: Vec<(usize, AnnotationRecord)> = read_jsonl(path)?;
    let mut out = NerFile::default();
    for (line, record) in records {
        for span in &record.spans {
            if span.end <= span.start {
                return Err(Error::parse(
                    path,
                    line,
                    format!("span [{}, {}) has end <= start", span.start, span.end),
                ));
            }
        }
        let entry = out.spans.entry(record.doc_id).or_default();
        entry.extend(record.spans.into_iter().map(|mut s| {
            s.source = SpanSource::ExternalNer;
            s
        }));
    }
    Ok(out)
}

/// Coalesces overlapping or touching spans from the same source. Input must be
/// sorted by start; merged labels are joined with `+`.
pub fn merge_overlapping(spans: &[AnnotationSpan]) -> Vec<AnnotationSpan> {
    let mut out: Vec<AnnotationSpan> = Vec::with_capacity(spans.len());
    for span in spans {
        if let Some(last) = out.last_mut() {
            if last.source == span.source && span.start <= last.end {
                last.end = last.end.max(span.end);
                if !last.label.split('+').any(|l| l == span.label) {
                    last.label.push('+');
                    last.label.push_str(&span.label);
                }
                continue;
            }
        }
        out.push(span.clone());
    }
    out
}
