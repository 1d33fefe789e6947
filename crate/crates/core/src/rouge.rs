//! ROUGE-1, ROUGE-2, ROUGE-L and ROUGE-LSum.
//!
//! Texts are tokenized with the segmenter, lowercased, and only letter/digit
//! tokens are kept. No stemming.

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::segmenter::{split_sentences, tokenize};

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ScoreTriple {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl ScoreTriple {
    pub fn new(precision: f64, recall: f64) -> Self {
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        Self {
            precision,
            recall,
            f1,
        }
    }

    pub fn from_counts(hits: usize, candidate_total: usize, reference_total: usize) -> Self {
        let ratio = |den: usize| {
            if den == 0 {
                0.0
            } else {
                hits as f64 / den as f64
            }
        };
        Self::new(ratio(candidate_total), ratio(reference_total))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RougeVariant {
    R1,
    R2,
    RL,
    RLSum,
}

impl RougeVariant {
    pub fn score(self, candidate: &str, reference: &str) -> ScoreTriple {
        match self {
            RougeVariant::R1 => rouge_n(candidate, reference, 1),
            RougeVariant::R2 => rouge_n(candidate, reference, 2),
            RougeVariant::RL => rouge_l(candidate, reference),
            RougeVariant::RLSum => rouge_lsum(candidate, reference),
        }
    }
}

impl FromStr for RougeVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "r1" | "rouge1" | "rouge-1" => Ok(RougeVariant::R1),
            "r2" | "rouge2" | "rouge-2" => Ok(RougeVariant::R2),
            "rl" | "rougel" | "rouge-l" => Ok(RougeVariant::RL),
            "rlsum" | "rougelsum" | "rouge-lsum" => Ok(RougeVariant::RLSum),
            other => Err(Error::Config(format!("unknown ROUGE variant {other:?}"))),
        }
    }
}

/// Lowercased letter/digit tokens.
pub fn rouge_tokens(text: &str) -> Vec<String> {
    tokenize(text)
        .into_iter()
        .filter(|t| t.is_word(text))
        .map(|t| t.slice(text).to_lowercase())
        .collect()
}

/// All contiguous n-grams with multiplicity, over lowercased tokens.
pub fn ngram_counts<S: AsRef<str>>(tokens: &[S], n: usize) -> HashMap<Vec<String>, usize> {
    assert!(n >= 1, "n-gram order must be at least 1");
    let lowered: Vec<String> = tokens.iter().map(|t| t.as_ref().to_lowercase()).collect();
    let mut counts = HashMap::new();
    for window in lowered.windows(n) {
        *counts.entry(window.to_vec()).or_insert(0) += 1;
    }
    counts
}

fn ngram_overlap(candidate: &[String], reference: &[String], n: usize) -> ScoreTriple {
    let cand = ngram_counts(candidate, n);
    let refs = ngram_counts(reference, n);
    let hits: usize = cand
        .iter()
        .map(|(g, &c)| c.min(refs.get(g).copied().unwrap_or(0)))
        .sum();
    let total = |m: &HashMap<Vec<String>, usize>| m.values().sum::<usize>();
    ScoreTriple::from_counts(hits, total(&cand), total(&refs))
}

pub fn rouge_n(candidate: &str, reference: &str, n: usize) -> ScoreTriple {
    ngram_overlap(&rouge_tokens(candidate), &rouge_tokens(reference), n)
}

fn lcs_table(a: &[String], b: &[String]) -> Vec<Vec<usize>> {
    let mut table = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            table[i][j] = if a[i - 1] == b[j - 1] {
                table[i - 1][j - 1] + 1
            } else {
                table[i - 1][j].max(table[i][j - 1])
            };
        }
    }
    table
}

pub fn lcs_len(a: &[String], b: &[String]) -> usize {
    lcs_table(a, b)[a.len()][b.len()]
}

/// Indices into `reference` of one longest common subsequence with `candidate`.
fn lcs_reference_indices(reference: &[String], candidate: &[String]) -> Vec<usize> {
    let table = lcs_table(reference, candidate);
    let (mut i, mut j) = (reference.len(), candidate.len());
    let mut out = Vec::new();
    while i > 0 && j > 0 {
        if reference[i - 1] == candidate[j - 1] {
            out.push(i - 1);
            i -= 1;
            j -= 1;
        } else if table[i - 1][j] >= table[i][j - 1] {
            i -= 1;
        } else {
            j -= 1;
        }
    }
    out.reverse();
    out
}

pub fn rouge_l(candidate: &str, reference: &str) -> ScoreTriple {
    let cand = rouge_tokens(candidate);
    let refs = rouge_tokens(reference);
    ScoreTriple::from_counts(lcs_len(&cand, &refs), cand.len(), refs.len())
}

fn sentence_tokens(text: &str) -> Vec<Vec<String>> {
    split_sentences(text)
        .iter()
        .map(|s| rouge_tokens(s.slice(text)))
        .filter(|t| !t.is_empty())
        .collect()
}

/// Summary-level LCS: for every reference sentence, the union of its LCS
/// matches against each candidate sentence; each token occurrence is credited
/// at most once on either side.
pub fn rouge_lsum(candidate: &str, reference: &str) -> ScoreTriple {
    let cand_sents = sentence_tokens(candidate);
    let ref_sents = sentence_tokens(reference);
    let count = |sents: &[Vec<String>]| {
        let mut m: HashMap<String, usize> = HashMap::new();
        for tok in sents.iter().flatten() {
            *m.entry(tok.clone()).or_insert(0) += 1;
        }
        m
    };
    let mut cand_counts = count(&cand_sents);
    let mut ref_counts = count(&ref_sents);
    let cand_total: usize = cand_sents.iter().map(Vec::len).sum();
    let ref_total: usize = ref_sents.iter().map(Vec::len).sum();

    let mut hits = 0;
    for r in &ref_sents {
        let mut union: HashSet<usize> = HashSet::new();
        for c in &cand_sents {
            union.extend(lcs_reference_indices(r, c));
        }
        let mut union: Vec<usize> = union.into_iter().collect();
        union.sort_unstable();
        for idx in union {
            let tok = &r[idx];
            let (Some(rc), Some(cc)) = (ref_counts.get_mut(tok), cand_counts.get_mut(tok)) else {
                continue;
            };
            if *rc > 0 && *cc > 0 {
                hits += 1;
                *rc -= 1;
                *cc -= 1;
            }
        }
    }
    ScoreTriple::from_counts(hits, cand_total, ref_total)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalPair {
    pub id: String,
    pub candidate: String,
    pub reference: String,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PairScores {
    pub r1: ScoreTriple,
    pub r2: ScoreTriple,
    pub rl: ScoreTriple,
    pub rlsum: ScoreTriple,
}

pub fn score_pair(candidate: &str, reference: &str) -> PairScores {
    PairScores {
        r1: rouge_n(candidate, reference, 1),
        r2: rouge_n(candidate, reference, 2),
        rl: rouge_l(candidate, reference),
        rlsum: rouge_lsum(candidate, reference),
    }
}

/// Corpus-level scores. Each field is the arithmetic mean of per-pair
/// precision, recall and F1 (macro average), so a corpus F1 is generally not
/// the harmonic mean of the corpus precision and recall.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub r1: ScoreTriple,
    pub r2: ScoreTriple,
    pub rl: ScoreTriple,
    pub rlsum: ScoreTriple,
    pub n_pairs: usize,
}

impl MetricReport {
    fn columns(&self) -> [(&'static str, ScoreTriple); 4] {
        [
            ("R1", self.r1),
            ("R2", self.r2),
            ("RL", self.rl),
            ("RLSum", self.rlsum),
        ]
    }

    pub fn to_tsv(&self) -> String {
        let mut header = Vec::new();
        let mut row = Vec::new();
        for (name, s) in self.columns() {
            for (suffix, v) in [("P", s.precision), ("R", s.recall), ("F1", s.f1)] {
                header.push(format!("{name}_{suffix}"));
                row.push(format!("{v:.6}"));
            }
        }
        header.push("n_pairs".into());
        row.push(self.n_pairs.to_string());
        format!("{}\n{}\n", header.join("\t"), row.join("\t"))
    }

    /// Aligned text table, one row per measure, scores in percent.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<10}{:>9}{:>9}{:>9}{:>9}",
            "", "R1", "R2", "RL", "RLSum"
        );
        let cols = self.columns();
        #[allow(clippy::type_complexity)]
        let rows: [(&str, fn(&ScoreTriple) -> f64); 3] = [
            ("precision", |s| s.precision),
            ("recall", |s| s.recall),
            ("f1", |s| s.f1),
        ];
        for (label, get) in rows {
            let _ = write!(out, "{label:<10}");
            for (_, s) in &cols {
                let _ = write!(out, "{:>9.2}", 100.0 * get(s));
            }
            out.push('\n');
        }
        let _ = writeln!(out, "n_pairs = {}", self.n_pairs);
        out
    }
}

fn mean_triple(scores: &[PairScores], pick: fn(&PairScores) -> ScoreTriple) -> ScoreTriple {
    let n = scores.len() as f64;
    let (p, r, f) = scores.iter().map(pick).fold((0.0, 0.0, 0.0), |acc, s| {
        (acc.0 + s.precision, acc.1 + s.recall, acc.2 + s.f1)
    });
    ScoreTriple {
        precision: p / n,
        recall: r / n,
        f1: f / n,
    }
}

pub fn evaluate_corpus(pairs: &[EvalPair]) -> Result<MetricReport> {
    if pairs.is_empty() {
        return Err(Error::EmptyInput("evaluation needs at least one pair"));
    }
    let mut ids = HashSet::with_capacity(pairs.len());
    for p in pairs {
        if !ids.insert(p.id.as_str()) {
            return Err(Error::DuplicateId(p.id.clone()));
        }
    }
    let scores: Vec<PairScores> = pairs
        .par_iter()
        .map(|p| score_pair(&p.candidate, &p.reference))
        .collect();
    Ok(MetricReport {
        r1: mean_triple(&scores, |s| s.r1),
        r2: mean_triple(&scores, |s| s.r2),
        rl: mean_triple(&scores, |s| s.rl),
        rlsum: mean_triple(&scores, |s| s.rlsum),
        n_pairs: scores.len(),
    })
}
