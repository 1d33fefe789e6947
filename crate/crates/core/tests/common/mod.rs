#![allow(dead_code)]

use std::path::Path;

use clinforge::annotate::TermLexicon;
use clinforge::corpus::{AnnotationRecord, AnnotationSpan, Document, SpanSource};
use clinforge::segmenter::tokenize;
use rand::seq::IndexedRandom;
use rand::Rng;

pub const WORDS: &[&str] = &[
    "patient",
    "reports",
    "mild",
    "pain",
    "since",
    "yesterday",
    "denies",
    "nausea",
    "the",
    "and",
    "with",
    "left",
    "right",
    "arm",
    "chest",
    "was",
    "given",
    "dose",
    "daily",
    "follow",
    "up",
    "in",
    "clinic",
    "weeks",
    "history",
    "of",
    "no",
    "known",
    "allergies",
    "temp",
    "98.6",
    "mg",
    "2.5",
    "BP",
    "120/80",
    "naïve",
    "café",
    "x-ray",
    "(stable)",
    "\"improving\"",
    "q.d.",
    "e.g.",
    "Dr.",
    "vs.",
    "½",
];

pub const TERMS: &[&str] = &[
    "chest pain",
    "shortness of breath",
    "hypertension",
    "type 2 diabetes mellitus",
    "aspirin",
    "atrial fibrillation",
    "pain",
    "myocardial infarction",
];

pub fn lexicon() -> TermLexicon {
    TermLexicon::from_terms(TERMS.iter().copied()).unwrap()
}

fn capitalize(word: &str) -> String {
    let mut chars = word.chars();
    match chars.next() {
        Some(c) => c.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}

/// One sentence of 3..=12 words, optionally with an embedded lexicon term.
pub fn sentence<R: Rng>(rng: &mut R, with_term: bool) -> String {
    let n = rng.random_range(3..=12);
    let mut words: Vec<String> = (0..n)
        .map(|_| WORDS.choose(rng).unwrap().to_string())
        .collect();
    if with_term {
        let at = rng.random_range(0..=words.len());
        words.insert(at, TERMS.choose(rng).unwrap().to_string());
    }
    words[0] = capitalize(&words[0]);
    let end = *[".", ".", ".", "?", "!", "..."].choose(rng).unwrap();
    format!("{}{end}", words.join(" "))
}

/// Random clinical-looking text of `sentences` sentences separated by
/// spaces or newlines.
pub fn text<R: Rng>(rng: &mut R, sentences: usize, term_rate: f64) -> String {
    let mut out = String::new();
    for i in 0..sentences {
        if i > 0 {
            out.push_str([" ", " ", "  ", "\n", "\n\n"].choose(rng).unwrap());
        }
        let with_term = rng.random_bool(term_rate);
        out.push_str(&sentence(rng, with_term));
    }
    out
}

/// Up to `max` word-aligned spans, possibly overlapping, in arbitrary order.
pub fn ner_spans<R: Rng>(rng: &mut R, text: &str, max: usize) -> Vec<AnnotationSpan> {
    let words: Vec<_> = tokenize(text)
        .into_iter()
        .filter(|t| t.is_word(text))
        .collect();
    if words.is_empty() {
        return Vec::new();
    }
    let n = rng.random_range(0..=max);
    (0..n)
        .map(|_| {
            let i = rng.random_range(0..words.len());
            let j = (i + rng.random_range(0..3)).min(words.len() - 1);
            AnnotationSpan::new(
                words[i].start,
                words[j].end,
                "PROBLEM",
                SpanSource::ExternalNer,
            )
        })
        .collect()
}

/// Writes a pre-training fixture of `n` documents: corpus, lexicon and NER
/// annotations (every third document has none).
pub fn write_pretrain_fixture<R: Rng>(rng: &mut R, dir: &Path, n: usize) {
    let mut docs = Vec::with_capacity(n);
    let mut records = Vec::new();
    for i in 0..n {
        let sentences = rng.random_range(1..=14);
        let term_rate = *[0.0, 0.3, 0.6].choose(rng).unwrap();
        let doc = Document::new(format!("doc-{i:05}"), text(rng, sentences, term_rate));
        if i % 3 != 0 {
            let spans = ner_spans(rng, &doc.text, 5);
            if !spans.is_empty() {
                records.push(AnnotationRecord {
                    doc_id: doc.id.clone(),
                    spans,
                });
            }
        }
        docs.push(doc);
    }
    clinforge::corpus::write_corpus(&docs, &dir.join("docs.jsonl")).unwrap();
    clinforge::corpus::write_jsonl(&dir.join("ner.jsonl"), &records).unwrap();
    std::fs::write(dir.join("lexicon.txt"), TERMS.join("\n") + "\n").unwrap();
}

pub fn fixture(name: &str) -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}
