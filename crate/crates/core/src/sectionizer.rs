//! Header heuristics for clinical notes: upper-cased lines are section headers.

use std::collections::{BTreeMap, BTreeSet};
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::corpus::{Document, NoteSection};

/// Thresholds for the "fully upper-cased line" test.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HeaderRules {
    pub min_letters: usize,
    pub max_chars: usize,
}

impl Default for HeaderRules {
    fn default() -> Self {
        Self {
            min_letters: 2,
            max_chars: 60,
        }
    }
}

impl HeaderRules {
    /// Returns the header text (trimmed, trailing colon removed) if `line`
    /// qualifies.
    pub fn header_of<'a>(&self, line: &'a str) -> Option<&'a str> {
        let line = line.trim();
        if line.chars().count() > self.max_chars {
            return None;
        }
        let mut letters = 0;
        for c in line.chars().filter(|c| c.is_alphabetic()) {
            if !c.is_uppercase() {
                return None;
            }
            letters += 1;
        }
        if letters < self.min_letters {
            return None;
        }
        Some(line.strip_suffix(':').unwrap_or(line).trim_end())
    }
}

struct HeaderLine<'a> {
    start: usize,
    body_start: usize,
    header: &'a str,
}

fn header_lines<'a>(text: &'a str, rules: &HeaderRules) -> Vec<HeaderLine<'a>> {
    let mut out = Vec::new();
    let mut pos = 0;
    for line in text.split_inclusive('\n') {
        if let Some(header) = rules.header_of(line) {
            out.push(HeaderLine {
                start: pos,
                body_start: pos + line.len(),
                header,
            });
        }
        pos += line.len();
    }
    out
}

pub fn extract_headers(note_text: &str) -> Vec<String> {
    extract_headers_with(note_text, &HeaderRules::default())
}

pub fn extract_headers_with(note_text: &str, rules: &HeaderRules) -> Vec<String> {
    header_lines(note_text, rules)
        .into_iter()
        .map(|h| h.header.to_string())
        .collect()
}

/// Trailing-colon strip plus whitespace collapse.
pub fn normalize_header(header: &str) -> String {
    let trimmed = header.trim();
    let trimmed = trimmed.strip_suffix(':').unwrap_or(trimmed);
    trimmed.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Section headers seen in a training corpus, with occurrence counts.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct HeaderLexicon {
    pub counts: BTreeMap<String, usize>,
}

impl HeaderLexicon {
    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn contains(&self, header: &str) -> bool {
        self.counts.contains_key(&normalize_header(header))
    }

    pub fn count(&self, header: &str) -> usize {
        self.counts
            .get(&normalize_header(header))
            .copied()
            .unwrap_or(0)
    }

    pub fn add_note(&mut self, note_text: &str, rules: &HeaderRules) {
        for h in header_lines(note_text, rules) {
            let key = normalize_header(h.header);
            if !key.is_empty() {
                *self.counts.entry(key).or_insert(0) += 1;
            }
        }
    }

    /// Associative merge, usable as a parallel reduction step.
    pub fn merge(mut self, other: HeaderLexicon) -> HeaderLexicon {
        for (k, v) in other.counts {
            *self.counts.entry(k).or_insert(0) += v;
        }
        self
    }
}

pub fn build_header_lexicon(notes: &[Document]) -> HeaderLexicon {
    let rules = HeaderRules::default();
    let mut lexicon = HeaderLexicon::default();
    for note in notes {
        lexicon.add_note(&note.text, &rules);
    }
    lexicon
}

/// Distinct lexicon headers that appear as header lines in the note.
pub fn score_note(note_text: &str, lexicon: &HeaderLexicon) -> usize {
    header_lines(note_text, &HeaderRules::default())
        .into_iter()
        .map(|h| normalize_header(h.header))
        .filter(|h| lexicon.counts.contains_key(h))
        .collect::<BTreeSet<_>>()
        .len()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoredCandidate {
    pub doc_id: String,
    pub score: usize,
    /// 1-based position after ranking; 0 before.
    pub rank: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SelectionConfig {
    pub n: usize,
}

pub fn score_candidates(candidates: &[Document], lexicon: &HeaderLexicon) -> Vec<ScoredCandidate> {
    candidates
        .iter()
        .map(|d| ScoredCandidate {
            doc_id: d.id.clone(),
            score: score_note(&d.text, lexicon),
            rank: 0,
        })
        .collect()
}

/// Sorts by score descending then id ascending and assigns dense ranks from 1.
pub fn rank_candidates(scored: &[ScoredCandidate]) -> Vec<ScoredCandidate> {
    let mut ranked = scored.to_vec();
    ranked.sort_by(|a, b| b.score.cmp(&a.score).then_with(|| a.doc_id.cmp(&b.doc_id)));
    for (i, c) in ranked.iter_mut().enumerate() {
        c.rank = i + 1;
    }
    ranked
}

pub fn select_top_n(scored: &[ScoredCandidate], n: usize) -> Vec<ScoredCandidate> {
    let mut ranked = rank_candidates(scored);
    ranked.truncate(n);
    ranked
}

/// One line of the selection manifest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectionRecord {
    pub doc_id: String,
    pub score: usize,
    pub rank: usize,
    pub selected: bool,
}

pub fn selection_manifest(
    scored: &[ScoredCandidate],
    config: SelectionConfig,
) -> Vec<SelectionRecord> {
    rank_candidates(scored)
        .into_iter()
        .map(|c| SelectionRecord {
            selected: c.rank <= config.n,
            doc_id: c.doc_id,
            score: c.score,
            rank: c.rank,
        })
        .collect()
}

/// Splits a note at header lines found in `lexicon`. Text before the first
/// header becomes a headerless preamble; sections partition the note.
pub fn split_sections(note_text: &str, lexicon: &HeaderLexicon) -> Vec<NoteSection> {
    if note_text.is_empty() {
        return Vec::new();
    }
    let starts: Vec<HeaderLine<'_>> = header_lines(note_text, &HeaderRules::default())
        .into_iter()
        .filter(|h| lexicon.contains(h.header))
        .collect();
    let mut sections = Vec::with_capacity(starts.len() + 1);
    let first = starts.first().map_or(note_text.len(), |h| h.start);
    if first > 0 {
        sections.push(NoteSection {
            header: None,
            body: note_text[..first].trim().to_string(),
            start: 0,
            end: first,
        });
    }
    for (i, h) in starts.iter().enumerate() {
        let end = starts.get(i + 1).map_or(note_text.len(), |next| next.start);
        let body: Range<usize> = h.body_start.min(end)..end;
        sections.push(NoteSection {
            header: Some(h.header.to_string()),
            body: note_text[body].trim().to_string(),
            start: h.start,
            end,
        });
    }
    sections
}
