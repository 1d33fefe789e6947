use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::read_jsonl;
use crate::error::{Error, Result};
use crate::segmenter::{count_tokens, truncate_tokens};

const STAGE1_GUIDELINES: &str = include_str!("../../resources/stage1_guidelines.txt");
const STAGE2_FILLERS: &str = include_str!("../../resources/stage2_fillers.txt");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn new(role: Role, content: impl Into<String>) -> Self {
        Self {
            role,
            content: content.into(),
        }
    }
}

/// The single worked (note, dialogue) example shown to the model.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Exemplar {
    #[serde(default)]
    pub id: String,
    pub note: String,
    pub dialogue: String,
}

/// Reads an exemplar file (JSONL of `{"id", "note", "dialogue"}`). The first
/// record is the one-shot exemplar; all records are training references for
/// ranking.
pub fn load_exemplars(path: &Path) -> Result<Vec<Exemplar>> {
    let records: Vec<(usize, Exemplar)> = read_jsonl(path)?;
    if records.is_empty() {
        return Err(Error::EmptyInput("exemplar file has no records"));
    }
    for (line, ex) in &records {
        if ex.dialogue.trim().is_empty() {
            return Err(Error::parse(path, *line, "exemplar dialogue is empty"));
        }
    }
    Ok(records.into_iter().map(|(_, e)| e).collect())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    pub system: String,
    pub guidelines: String,
    /// Wraps each note in a user message; `{note}` is replaced by the text.
    pub note_slot: String,
    pub filler_instruction: String,
}

impl Default for PromptTemplate {
    fn default() -> Self {
        Self {
            system: String::new(),
            guidelines: STAGE1_GUIDELINES.trim_end().to_string(),
            note_slot: "Clinical note:\n{note}".to_string(),
            filler_instruction: STAGE2_FILLERS.trim_end().to_string(),
        }
    }
}

impl PromptTemplate {
    pub fn with_guidelines_file(mut self, path: &Path) -> Result<Self> {
        self.guidelines = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(self)
    }

    pub fn with_filler_file(mut self, path: &Path) -> Result<Self> {
        self.filler_instruction = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(self)
    }

    fn system_message(&self) -> String {
        if self.system.trim().is_empty() {
            self.guidelines.clone()
        } else {
            format!("{}\n\n{}", self.system.trim_end(), self.guidelines)
        }
    }

    fn note_message(&self, note: &str) -> String {
        self.note_slot.replace("{note}", note)
    }
}

/// `[system guidelines, user(exemplar note), assistant(exemplar dialogue),
/// user(target note)]`. Notes longer than `max_note_tokens` are truncated.
pub fn build_stage1_prompt(
    note: &str,
    exemplar: &Exemplar,
    template: &PromptTemplate,
    max_note_tokens: Option<usize>,
) -> Result<Vec<ChatMessage>> {
    if note.trim().is_empty() {
        return Err(Error::Contract(
            "stage-1 prompt needs a non-empty note".into(),
        ));
    }
    if exemplar.dialogue.trim().is_empty() {
        return Err(Error::Contract("exemplar dialogue is empty".into()));
    }
    let fit = |text: &'_ str, what: &str| -> String {
        match max_note_tokens {
            Some(limit) if count_tokens(text) > limit => {
                tracing::warn!(limit, what, "note exceeds prompt budget, truncating");
                truncate_tokens(text, limit).to_string()
            }
            _ => text.to_string(),
        }
    };
    Ok(vec![
        ChatMessage::new(Role::System, template.system_message()),
        ChatMessage::new(
            Role::User,
            template.note_message(&fit(&exemplar.note, "exemplar")),
        ),
        ChatMessage::new(Role::Assistant, exemplar.dialogue.trim()),
        ChatMessage::new(Role::User, template.note_message(&fit(note, "target"))),
    ])
}

/// `[system filler instruction, user(stage-1 dialogue)]`.
pub fn build_stage2_prompt(
    stage1_dialogue: &str,
    template: &PromptTemplate,
) -> Result<Vec<ChatMessage>> {
    if stage1_dialogue.trim().is_empty() {
        return Err(Error::Contract(
            "stage-2 prompt needs a non-empty dialogue".into(),
        ));
    }
    Ok(vec![
        ChatMessage::new(Role::System, template.filler_instruction.clone()),
        ChatMessage::new(Role::User, stage1_dialogue.trim()),
    ])
}
