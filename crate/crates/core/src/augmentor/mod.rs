//! Synthetic doctor-patient dialogues generated from clinical notes.
//!
//! The task is inverted: a chat model is shown a note and asked for the
//! conversation that produced it, and the resulting (dialogue, note) pairs
//! become extra training data. Stage 1 is a one-shot prompt with a fixed
//! exemplar; stage 2 (task C only) rewrites the stage-1 dialogue with spoken
//! fillers. Generations are ranked by their mean ROUGE similarity to the
//! training dialogues and the top `n` are kept.

mod client;
pub mod mock;
mod prompt;
mod run;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use client::{
    CallFailure, ChatBackend, ChatEndpointConfig, GatePermit, HttpChatClient, RequestGate,
};
pub use prompt::{
    build_stage1_prompt, build_stage2_prompt, load_exemplars, ChatMessage, Exemplar,
    PromptTemplate, Role,
};
pub use run::{
    build_dataset, load_manifest, run_augmentation, write_manifest, AugmentationRun, DatasetRow,
    ManifestRecord, ManifestStatus, RunFiles,
};

use crate::corpus::{Dialogue, Document, Provenance, Speaker, Turn};
use crate::error::{Error, Result};
use crate::rouge::RougeVariant;

/// Target counts used for the published task B and C runs.
pub mod presets {
    /// Task B run augmented with 735 generated dialogues.
    pub const TASK_B_SMALL_N: usize = 735;
    /// Task B run augmented with 1000 generated dialogues.
    pub const TASK_B_LARGE_N: usize = 1000;
    /// Size of the task C corpus left after moderation skips.
    pub const TASK_C_KEPT: usize = 746;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Task {
    B,
    C,
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "B" | "b" => Ok(Task::B),
            "C" | "c" => Ok(Task::C),
            other => Err(Error::Config(format!("task must be B or C, got {other:?}"))),
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Task::B => "B",
            Task::C => "C",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SkipKind {
    ContentFiltered,
    ExhaustedRetries,
    EmptyResponse,
}

#[derive(Debug, Clone, PartialEq)]
pub enum GenerationOutcome {
    Dialogue(Dialogue),
    Skipped {
        reason: SkipKind,
        request_id: String,
        stage: u8,
    },
}

/// Parses `Doctor:` / `Patient:` lines (case-insensitive). Lines without a
/// tag continue the previous turn; text before the first tag is dropped.
pub fn parse_transcript(text: &str) -> Vec<Turn> {
    let mut turns: Vec<Turn> = Vec::new();
    for raw in text.lines() {
        let line = raw.trim().trim_start_matches(['*', '-', ' ']).trim_start();
        if line.is_empty() {
            continue;
        }
        if let Some((speaker, rest)) = speaker_tag(line) {
            turns.push(Turn::new(speaker, rest.trim_start_matches('*').trim()));
        } else if let Some(last) = turns.last_mut() {
            if !last.text.is_empty() {
                last.text.push('\n');
            }
            last.text.push_str(raw.trim());
        }
    }
    turns.retain(|t| !t.text.is_empty());
    turns
}

fn speaker_tag(line: &str) -> Option<(Speaker, &str)> {
    for (tag, speaker) in [("doctor", Speaker::Doctor), ("patient", Speaker::Patient)] {
        let Some(head) = line.get(..tag.len()) else {
            continue;
        };
        if !head.eq_ignore_ascii_case(tag) {
            continue;
        }
        let rest = line[tag.len()..].trim_start_matches('*');
        if let Some(rest) = rest.strip_prefix(':') {
            return Some((speaker, rest));
        }
    }
    None
}

/// Drives both prompting stages for one note at a time.
pub struct DialogueGenerator<'a> {
    backend: &'a dyn ChatBackend,
    exemplar: Exemplar,
    template: PromptTemplate,
    max_prompt_tokens: Option<usize>,
}

impl<'a> DialogueGenerator<'a> {
    pub fn new(backend: &'a dyn ChatBackend, exemplar: Exemplar) -> Self {
        Self {
            backend,
            exemplar,
            template: PromptTemplate::default(),
            max_prompt_tokens: None,
        }
    }

    pub fn with_template(mut self, template: PromptTemplate) -> Self {
        self.template = template;
        self
    }

    pub fn with_max_prompt_tokens(mut self, limit: Option<usize>) -> Self {
        self.max_prompt_tokens = limit;
        self
    }

    fn call(
        &self,
        request_id: String,
        messages: &[ChatMessage],
        stage: u8,
    ) -> Result<std::result::Result<Vec<Turn>, GenerationOutcome>> {
        let skipped = |reason, request_id: String| {
            Ok(Err(GenerationOutcome::Skipped {
                reason,
                request_id,
                stage,
            }))
        };
        match self.backend.complete(&request_id, messages) {
            Ok(text) => {
                let turns = parse_transcript(&text);
                if turns.is_empty() {
                    tracing::warn!(%request_id, raw = %text, "response has no speaker-tagged lines");
                    return skipped(SkipKind::EmptyResponse, request_id);
                }
                Ok(Ok(turns))
            }
            Err(CallFailure::ContentFiltered { request_id }) => {
                skipped(SkipKind::ContentFiltered, request_id)
            }
            Err(CallFailure::EmptyResponse { request_id }) => {
                skipped(SkipKind::EmptyResponse, request_id)
            }
            Err(CallFailure::ExhaustedRetries {
                request_id,
                last_error,
            }) => {
                tracing::warn!(%request_id, %last_error, "giving up after retries");
                skipped(SkipKind::ExhaustedRetries, request_id)
            }
            Err(CallFailure::Fatal {
                request_id,
                message,
            }) => Err(Error::Endpoint(format!("request {request_id}: {message}"))),
        }
    }

    /// Stage 1 always runs; stage 2 runs only for task C.
    pub fn generate(&self, note: &Document, task: Task) -> Result<GenerationOutcome> {
        let stage1 = build_stage1_prompt(
            &note.text,
            &self.exemplar,
            &self.template,
            self.max_prompt_tokens,
        )?;
        let turns = match self.call(format!("{}/stage1", note.id), &stage1, 1)? {
            Ok(turns) => turns,
            Err(skipped) => return Ok(skipped),
        };
        let mut dialogue = Dialogue {
            note_id: note.id.clone(),
            turns,
            provenance: Provenance::SyntheticStage1,
            rank_score: None,
        };
        if task == Task::C {
            let stage2 = build_stage2_prompt(&dialogue.to_text(), &self.template)?;
            match self.call(format!("{}/stage2", note.id), &stage2, 2)? {
                Ok(turns) => {
                    dialogue.turns = turns;
                    dialogue.provenance = Provenance::SyntheticStage2;
                }
                Err(skipped) => return Ok(skipped),
            }
        }
        Ok(GenerationOutcome::Dialogue(dialogue))
    }
}

/// Scores every candidate by its mean similarity (F1 of `metric`) to the
/// training references, then keeps the best `n` (ties broken by note id).
pub fn rank_generations(
    candidates: &[Dialogue],
    training_refs: &[String],
    n: usize,
    metric: RougeVariant,
) -> Result<Vec<Dialogue>> {
    let mut scored = score_generations(candidates, training_refs, metric)?;
    scored.truncate(n);
    Ok(scored)
}

/// All candidates with `rank_score` filled, best first.
pub fn score_generations(
    candidates: &[Dialogue],
    training_refs: &[String],
    metric: RougeVariant,
) -> Result<Vec<Dialogue>> {
    if training_refs.is_empty() {
        return Err(Error::EmptyInput(
            "ranking needs at least one training reference",
        ));
    }
    use rayon::prelude::*;
    let mut scored: Vec<Dialogue> = candidates
        .par_iter()
        .map(|d| {
            let text = d.to_text();
            let total: f64 = training_refs
                .iter()
                .map(|r| metric.score(&text, r).f1)
                .sum();
            let mut d = d.clone();
            d.rank_score = Some(total / training_refs.len() as f64);
            d
        })
        .collect();
    // scores equal up to float noise count as ties so the id tie-break applies
    let key = |d: &Dialogue| (d.rank_score.unwrap_or(0.0) * 1e9).round() as i64;
    scored.sort_by(|a, b| key(b).cmp(&key(a)).then_with(|| a.note_id.cmp(&b.note_id)));
    Ok(scored)
}
