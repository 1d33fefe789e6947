//! Span-corruption pre-training examples.
//!
//! Each document is masked under exactly one policy: term spans from the
//! lexicon matcher, term spans from external NER output, or (when neither
//! source found anything) a random subset of whole sentences. Masked regions
//! are replaced by `<extra_id_i>` sentinels and the removed text is
//! concatenated, sentinel-delimited, into the target pseudo-summary.

use std::fmt;
use std::ops::Range;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::annotate::merge_overlapping;
use crate::corpus::{validate_spans, AnnotationSpan, Document, SpanSource};
use crate::error::{Error, Result};
use crate::segmenter::{split_sentences, Sentence};

pub const SENTINEL_PREFIX: &str = "<extra_id_";

pub fn sentinel(i: usize) -> String {
    format!("<extra_id_{i}>")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaskingConfig {
    pub p_lexicon: f64,
    pub sentence_mask_rate: f64,
    pub max_sentinels: usize,
    pub master_seed: u64,
    /// Also mask random sentences alongside term spans in one example.
    pub combined: bool,
}

impl Default for MaskingConfig {
    fn default() -> Self {
        Self {
            p_lexicon: 0.70,
            sentence_mask_rate: 0.15,
            max_sentinels: 100,
            master_seed: 0,
            combined: false,
        }
    }
}

impl MaskingConfig {
    pub fn with_seed(master_seed: u64) -> Self {
        Self {
            master_seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.p_lexicon) {
            return Err(Error::Config(format!(
                "p_lexicon {} not in [0, 1]",
                self.p_lexicon
            )));
        }
        if !(self.sentence_mask_rate > 0.0 && self.sentence_mask_rate < 1.0) {
            return Err(Error::Config(format!(
                "sentence_mask_rate {} not in (0, 1)",
                self.sentence_mask_rate
            )));
        }
        if self.max_sentinels < 1 {
            return Err(Error::Config("max_sentinels must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Policy {
    DualChoseLexicon,
    DualChoseNer,
    OnlyLexicon,
    OnlyNer,
    RandomSentence,
}

impl Policy {
    pub const ALL: [Policy; 5] = [
        Policy::DualChoseLexicon,
        Policy::DualChoseNer,
        Policy::OnlyLexicon,
        Policy::OnlyNer,
        Policy::RandomSentence,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Policy::DualChoseLexicon => "dual_chose_lexicon",
            Policy::DualChoseNer => "dual_chose_ner",
            Policy::OnlyLexicon => "only_lexicon",
            Policy::OnlyNer => "only_ner",
            Policy::RandomSentence => "random_sentence",
        }
    }

    /// Which span source the policy masks, if any.
    pub fn source(self) -> Option<SpanSource> {
        match self {
            Policy::DualChoseLexicon | Policy::OnlyLexicon => Some(SpanSource::LexiconMatch),
            Policy::DualChoseNer | Policy::OnlyNer => Some(SpanSource::ExternalNer),
            Policy::RandomSentence => None,
        }
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One record of `masked.jsonl`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaskedExample {
    pub doc_id: String,
    #[serde(rename = "input")]
    pub masked_input: String,
    pub target: String,
    pub policy: Policy,
    pub seed: u64,
    /// Spans dropped because they would exceed the sentinel budget.
    #[serde(skip)]
    pub dropped_spans: usize,
}

impl MaskedExample {
    /// Number of masked regions, i.e. sentinels in the input.
    pub fn sentinel_count(&self) -> usize {
        self.masked_input.matches(SENTINEL_PREFIX).count()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SkipReason {
    EmptyText,
    /// The text already contains sentinel-like markup and could not be
    /// de-masked unambiguously.
    SentinelCollision,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BuildOutcome {
    Example(MaskedExample),
    Skipped(SkipReason),
}

impl BuildOutcome {
    pub fn example(self) -> Option<MaskedExample> {
        match self {
            BuildOutcome::Example(e) => Some(e),
            BuildOutcome::Skipped(_) => None,
        }
    }
}

/// Stable per-document seed: the first 8 bytes (little endian) of
/// SHA-256 over the little-endian master seed followed by the id bytes.
pub fn derive_seed(master_seed: u64, doc_id: &str) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(master_seed.to_le_bytes());
    hasher.update(doc_id.as_bytes());
    let digest = hasher.finalize();
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}

pub fn rng_for(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Policy choice given a uniform draw `u` in `[0, 1)`.
pub fn policy_for_draw(has_lexicon: bool, has_ner: bool, u: f64, p_lexicon: f64) -> Policy {
    match (has_lexicon, has_ner) {
        (true, true) if u < p_lexicon => Policy::DualChoseLexicon,
        (true, true) => Policy::DualChoseNer,
        (true, false) => Policy::OnlyLexicon,
        (false, true) => Policy::OnlyNer,
        (false, false) => Policy::RandomSentence,
    }
}

/// Draws one uniform value from `rng` and maps it to a policy.
pub fn select_policy<R: Rng + ?Sized>(
    has_lexicon: bool,
    has_ner: bool,
    p_lexicon: f64,
    rng: &mut R,
) -> Policy {
    let u: f64 = rng.random();
    policy_for_draw(has_lexicon, has_ner, u, p_lexicon)
}

/// Number of sentences to mask out of `total`: round half up, at least one.
pub fn sentences_to_mask(total: usize, rate: f64) -> usize {
    if total == 0 {
        return 0;
    }
    let k = (rate * total as f64 + 0.5 + 1e-9).floor() as usize;
    k.clamp(1, total)
}

struct Masked {
    input: String,
    target: String,
    dropped: usize,
}

/// Replaces each range with a sentinel. Ranges must be sorted and
/// non-overlapping; touching ranges are merged first.
fn mask_ranges(text: &str, ranges: &[Range<usize>], max_sentinels: usize) -> Result<Masked> {
    if ranges.is_empty() {
        return Err(Error::Contract("masking needs at least one span".into()));
    }
    let mut merged: Vec<Range<usize>> = Vec::with_capacity(ranges.len());
    for r in ranges {
        if r.start >= r.end || r.end > text.len() {
            return Err(Error::SpanRange {
                start: r.start,
                end: r.end,
                len: text.len(),
            });
        }
        match merged.last_mut() {
            Some(last) if r.start < last.end => {
                return Err(Error::Contract(format!(
                    "spans [{}, {}) and [{}, {}) overlap",
                    last.start, last.end, r.start, r.end
                )));
            }
            Some(last) if r.start == last.end => last.end = r.end,
            _ => merged.push(r.clone()),
        }
    }
    let budget = max_sentinels.saturating_sub(1).max(1);
    let dropped = merged.len().saturating_sub(budget);
    merged.truncate(budget);

    let mut input = String::with_capacity(text.len());
    let mut target = String::new();
    let mut cursor = 0;
    for (i, r) in merged.iter().enumerate() {
        let tag = sentinel(i);
        input.push_str(&text[cursor..r.start]);
        input.push_str(&tag);
        target.push_str(&tag);
        target.push(' ');
        target.push_str(&text[r.clone()]);
        target.push(' ');
        cursor = r.end;
    }
    input.push_str(&text[cursor..]);
    target.push_str(&sentinel(merged.len()));
    Ok(Masked {
        input,
        target,
        dropped,
    })
}

/// Masks the given disjoint spans. The policy is tagged from the source of the
/// first span; [`build_pretraining_example`] overrides it with the policy that
/// was actually selected.
pub fn mask_spans(
    doc: &Document,
    spans: &[AnnotationSpan],
    config: &MaskingConfig,
) -> Result<MaskedExample> {
    let ranges: Vec<Range<usize>> = spans.iter().map(|s| s.start..s.end).collect();
    let masked = mask_ranges(&doc.text, &ranges, config.max_sentinels)?;
    let policy = match spans[0].source {
        SpanSource::LexiconMatch => Policy::OnlyLexicon,
        SpanSource::ExternalNer => Policy::OnlyNer,
    };
    Ok(MaskedExample {
        doc_id: doc.id.clone(),
        masked_input: masked.input,
        target: masked.target,
        policy,
        seed: derive_seed(config.master_seed, &doc.id),
        dropped_spans: masked.dropped,
    })
}

fn pick_sentences<R: Rng + ?Sized>(
    sentences: &[Sentence],
    rate: f64,
    rng: &mut R,
) -> Vec<Range<usize>> {
    let k = sentences_to_mask(sentences.len(), rate);
    let mut picked = index::sample(rng, sentences.len(), k).into_vec();
    picked.sort_unstable();
    picked.into_iter().map(|i| sentences[i].range()).collect()
}

/// Masks `max(1, round_half_up(rate * S))` sentences chosen uniformly without
/// replacement, one sentinel per sentence.
pub fn mask_random_sentences<R: Rng + ?Sized>(
    doc: &Document,
    sentences: &[Sentence],
    config: &MaskingConfig,
    rng: &mut R,
) -> Result<MaskedExample> {
    if sentences.is_empty() {
        return Err(Error::Contract(
            "sentence masking needs at least one sentence".into(),
        ));
    }
    let ranges = pick_sentences(sentences, config.sentence_mask_rate, rng);
    let masked = mask_ranges(&doc.text, &ranges, config.max_sentinels)?;
    Ok(MaskedExample {
        doc_id: doc.id.clone(),
        masked_input: masked.input,
        target: masked.target,
        policy: Policy::RandomSentence,
        seed: derive_seed(config.master_seed, &doc.id),
        dropped_spans: masked.dropped,
    })
}

/// Union of possibly overlapping sorted ranges, touching ranges included.
fn union_ranges(mut ranges: Vec<Range<usize>>) -> Vec<Range<usize>> {
    ranges.sort_by_key(|r| (r.start, r.end));
    let mut out: Vec<Range<usize>> = Vec::with_capacity(ranges.len());
    for r in ranges {
        match out.last_mut() {
            Some(last) if r.start <= last.end => last.end = last.end.max(r.end),
            _ => out.push(r),
        }
    }
    out
}

pub fn build_pretraining_example(
    doc: &Document,
    lexicon_spans: &[AnnotationSpan],
    ner_spans: &[AnnotationSpan],
    config: &MaskingConfig,
) -> Result<BuildOutcome> {
    if doc.text.trim().is_empty() {
        return Ok(BuildOutcome::Skipped(SkipReason::EmptyText));
    }
    if doc.text.contains(SENTINEL_PREFIX) {
        return Ok(BuildOutcome::Skipped(SkipReason::SentinelCollision));
    }
    let lexicon = merge_overlapping(&validate_spans(doc, lexicon_spans)?);
    let ner = merge_overlapping(&validate_spans(doc, ner_spans)?);

    let seed = derive_seed(config.master_seed, &doc.id);
    let mut rng = rng_for(seed);
    let policy = select_policy(
        !lexicon.is_empty(),
        !ner.is_empty(),
        config.p_lexicon,
        &mut rng,
    );

    let mut example = match policy.source() {
        None => {
            let sentences = split_sentences(&doc.text);
            mask_random_sentences(doc, &sentences, config, &mut rng)?
        }
        Some(source) => {
            let spans = match source {
                SpanSource::LexiconMatch => &lexicon,
                SpanSource::ExternalNer => &ner,
            };
            if config.combined {
                let sentences = split_sentences(&doc.text);
                let mut ranges: Vec<Range<usize>> = spans.iter().map(|s| s.start..s.end).collect();
                ranges.extend(pick_sentences(
                    &sentences,
                    config.sentence_mask_rate,
                    &mut rng,
                ));
                let masked = mask_ranges(&doc.text, &union_ranges(ranges), config.max_sentinels)?;
                MaskedExample {
                    doc_id: doc.id.clone(),
                    masked_input: masked.input,
                    target: masked.target,
                    policy,
                    seed,
                    dropped_spans: masked.dropped,
                }
            } else {
                mask_spans(doc, spans, config)?
            }
        }
    };
    example.policy = policy;
    example.seed = seed;
    Ok(BuildOutcome::Example(example))
}

/// Splices the target segments back over their sentinels.
pub fn reconstruct(masked_input: &str, target: &str) -> Result<String> {
    let segments = parse_target(target)?;
    let mut out = String::with_capacity(masked_input.len() + target.len());
    let mut rest = masked_input;
    for (i, segment) in segments.iter().enumerate() {
        let tag = sentinel(i);
        let at = rest
            .find(&tag)
            .ok_or_else(|| Error::Integrity(format!("input is missing {tag}")))?;
        out.push_str(&rest[..at]);
        out.push_str(segment);
        rest = &rest[at + tag.len()..];
    }
    if rest.contains(SENTINEL_PREFIX) {
        return Err(Error::Integrity(
            "input has more sentinels than the target".into(),
        ));
    }
    out.push_str(rest);
    if out.contains(SENTINEL_PREFIX) {
        return Err(Error::Integrity("sentinels out of order in input".into()));
    }
    Ok(out)
}

/// Returns the masked segments of a target of the form
/// `<extra_id_0> s0 <extra_id_1> s1 ... <extra_id_k>`.
fn parse_target(target: &str) -> Result<Vec<&str>> {
    let first = sentinel(0);
    let mut rest = target
        .strip_prefix(first.as_str())
        .ok_or_else(|| Error::Integrity(format!("target does not start with {first}")))?;
    let mut segments = Vec::new();
    let mut i = 0;
    while !rest.is_empty() {
        let next = sentinel(i + 1);
        let at = rest
            .find(&next)
            .ok_or_else(|| Error::Integrity(format!("target is missing {next}")))?;
        let segment = rest[..at]
            .strip_prefix(' ')
            .and_then(|s| s.strip_suffix(' '))
            .filter(|s| !s.is_empty())
            .ok_or_else(|| Error::Integrity(format!("malformed segment before {next}")))?;
        segments.push(segment);
        rest = &rest[at + next.len()..];
        i += 1;
    }
    if segments.is_empty() {
        return Err(Error::Integrity("target holds no masked segments".into()));
    }
    Ok(segments)
}
