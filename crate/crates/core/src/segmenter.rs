//! Rule-based sentence segmentation, tokenization and token-length statistics.
//!
//! Everything here works on byte offsets into the input text and is pure, so
//! the functions are safe to call from any number of worker threads.

use std::collections::HashSet;
use std::ops::Range;
use std::path::Path;
use std::sync::OnceLock;

use crate::error::{Error, Result};

const DEFAULT_ABBREVIATIONS: &str = include_str!("../resources/abbreviations.txt");

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Sentence {
    pub index: usize,
    pub start: usize,
    pub end: usize,
}

impl Sentence {
    pub fn range(&self) -> Range<usize> {
        self.start..self.end
    }

    pub fn slice<'a>(&self, text: &'a str) -> &'a str {
        &text[self.start..self.end]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Token {
    pub start: usize,
    pub end: usize,
}

impl Token {
    pub fn slice<'a>(&self, text: &'a str) -> &'a str {
        &text[self.start..self.end]
    }

    /// True for letter/digit tokens, false for single punctuation tokens.
    pub fn is_word(&self, text: &str) -> bool {
        text[self.start..]
            .chars()
            .next()
            .is_some_and(char::is_alphanumeric)
    }
}

/// Abbreviations that do not end a sentence when followed by a period.
/// Stored lowercase without the trailing period.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AbbreviationList {
    entries: HashSet<String>,
}

impl AbbreviationList {
    pub fn parse(contents: &str) -> Self {
        let entries = contents
            .lines()
            .map(|l| l.trim().trim_end_matches('.').to_lowercase())
            .filter(|l| !l.is_empty())
            .collect();
        Self { entries }
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let contents = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(Self::parse(&contents))
    }

    /// The clinical list bundled with the crate.
    pub fn builtin() -> &'static Self {
        static LIST: OnceLock<AbbreviationList> = OnceLock::new();
        LIST.get_or_init(|| Self::parse(DEFAULT_ABBREVIATIONS))
    }

    pub fn contains(&self, word: &str) -> bool {
        self.entries
            .contains(&word.trim_end_matches('.').to_lowercase())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncationConfig {
    pub percentile: f64,
    pub input_limit: Option<usize>,
    pub output_limit: Option<usize>,
}

impl Default for TruncationConfig {
    fn default() -> Self {
        Self {
            percentile: 0.95,
            input_limit: None,
            output_limit: None,
        }
    }
}

impl TruncationConfig {
    /// Fills both limits from the configured percentile of observed lengths.
    pub fn fit(&mut self, input_lengths: &[usize], output_lengths: &[usize]) -> Result<()> {
        self.input_limit = Some(length_percentile(input_lengths, self.percentile)?);
        self.output_limit = Some(length_percentile(output_lengths, self.percentile)?);
        Ok(())
    }
}

pub fn split_sentences(text: &str) -> Vec<Sentence> {
    split_sentences_with(text, AbbreviationList::builtin())
}

/// Newline always ends a sentence. Within a line, a run of `.`, `!` or `?`
/// (plus closing quotes/brackets) ends one when followed by whitespace and an
/// uppercase letter or digit, unless the word is a guarded abbreviation.
pub fn split_sentences_with(text: &str, abbreviations: &AbbreviationList) -> Vec<Sentence> {
    let mut out = Vec::new();
    let mut line_start = 0;
    for line in text.split('\n') {
        for range in split_line(line, abbreviations) {
            out.push(Sentence {
                index: out.len(),
                start: line_start + range.start,
                end: line_start + range.end,
            });
        }
        line_start += line.len() + 1;
    }
    out
}

fn split_line(line: &str, abbreviations: &AbbreviationList) -> Vec<Range<usize>> {
    let chars: Vec<(usize, char)> = line.char_indices().collect();
    let mut cuts = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let (pos, c) = chars[i];
        if !matches!(c, '.' | '!' | '?') {
            i += 1;
            continue;
        }
        let mut j = i;
        while j < chars.len() && matches!(chars[j].1, '.' | '!' | '?') {
            j += 1;
        }
        let single_period = j == i + 1 && c == '.';
        while j < chars.len()
            && matches!(chars[j].1, ')' | ']' | '"' | '\'' | '\u{201d}' | '\u{2019}')
        {
            j += 1;
        }
        let boundary = chars.get(j).map_or(line.len(), |&(p, _)| p);
        let mut k = j;
        while k < chars.len() && chars[k].1.is_whitespace() {
            k += 1;
        }
        let followed_by_space = k > j;
        let next_starts = chars
            .get(k)
            .is_some_and(|&(_, n)| n.is_uppercase() || n.is_ascii_digit());
        if followed_by_space
            && next_starts
            && !(single_period && is_abbreviation(line, pos, abbreviations))
        {
            cuts.push(boundary);
        }
        i = j.max(i + 1);
    }

    let mut ranges = Vec::new();
    let mut start = 0;
    for cut in cuts.into_iter().chain(std::iter::once(line.len())) {
        if let Some(r) = trimmed(line, start, cut) {
            ranges.push(r);
        }
        start = cut;
    }
    ranges
}

fn is_abbreviation(line: &str, period_pos: usize, abbreviations: &AbbreviationList) -> bool {
    let before = &line[..period_pos];
    let word_start = before.rfind(char::is_whitespace).map_or(0, |p| {
        p + before[p..].chars().next().map_or(1, char::len_utf8)
    });
    let word = before[word_start..].trim_start_matches(|c: char| !c.is_alphanumeric());
    !word.is_empty() && abbreviations.contains(word)
}

fn trimmed(s: &str, start: usize, end: usize) -> Option<Range<usize>> {
    let piece = &s[start..end];
    let lead = piece.len() - piece.trim_start().len();
    let trail = piece.len() - piece.trim_end().len();
    (lead + trail < piece.len()).then(|| start + lead..end - trail)
}

/// Maximal runs of letters and digits (a period between two digits stays
/// inside the run) form one token; every other non-whitespace character is a
/// token of its own.
pub fn tokenize(text: &str) -> Vec<Token> {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let (start, c) = chars[i];
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        if c.is_alphanumeric() {
            let mut j = i + 1;
            while j < chars.len() {
                let cj = chars[j].1;
                let internal_period = cj == '.'
                    && chars[j - 1].1.is_ascii_digit()
                    && chars.get(j + 1).is_some_and(|&(_, n)| n.is_ascii_digit());
                if cj.is_alphanumeric() || internal_period {
                    j += 1;
                } else {
                    break;
                }
            }
            let end = chars.get(j).map_or(text.len(), |&(p, _)| p);
            tokens.push(Token { start, end });
            i = j;
        } else {
            tokens.push(Token {
                start,
                end: start + c.len_utf8(),
            });
            i += 1;
        }
    }
    tokens
}

pub fn count_tokens(text: &str) -> usize {
    tokenize(text).len()
}

/// Nearest-rank percentile: the `ceil(p * n)`-th smallest value.
pub fn length_percentile(lengths: &[usize], p: f64) -> Result<usize> {
    if lengths.is_empty() {
        return Err(Error::EmptyInput(
            "length_percentile needs at least one length",
        ));
    }
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::Config(format!(
            "percentile must be in (0, 1], got {p}"
        )));
    }
    let mut sorted = lengths.to_vec();
    sorted.sort_unstable();
    let n = sorted.len();
    // guard against 0.95 * 100 landing a hair above 95
    let rank = ((p * n as f64) - 1e-9).ceil().clamp(1.0, n as f64) as usize;
    Ok(sorted[rank - 1])
}

/// Cuts `text` right after the end of token number `limit`.
pub fn truncate_tokens(text: &str, limit: usize) -> &str {
    let tokens = tokenize(text);
    if tokens.len() <= limit {
        return text;
    }
    match limit {
        0 => "",
        _ => &text[..tokens[limit - 1].end],
    }
}
