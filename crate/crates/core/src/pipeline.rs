//! End-to-end pipelines behind the `forge` subcommands.
//!
//! Every command that writes an output file also writes `<out>.run.json`
//! holding the tool version, the resolved configuration, and summary stats.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::annotate::{annotate_lexicon, build_lexicon, load_ner_annotations};
use crate::augmentor::{
    build_dataset, load_exemplars, run_augmentation, write_manifest, ChatBackend,
    ChatEndpointConfig, DialogueGenerator, HttpChatClient, ManifestStatus, PromptTemplate,
    RunFiles, Task,
};
use crate::config::KeyValues;
use crate::corpus::{load_corpus, read_jsonl, write_jsonl};
use crate::error::{Error, Result};
use crate::masking::{
    build_pretraining_example, BuildOutcome, MaskedExample, MaskingConfig, Policy,
};
use crate::rouge::{evaluate_corpus, EvalPair, MetricReport};
use crate::sectionizer::{
    build_header_lexicon, score_candidates, selection_manifest, SelectionConfig, SelectionRecord,
};
use crate::segmenter::{count_tokens, length_percentile};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

pub fn run_manifest_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".run.json");
    PathBuf::from(s)
}

fn write_run_manifest(out: &Path, command: &str, config: Value, stats: Value) -> Result<()> {
    let path = run_manifest_path(out);
    let doc = json!({
        "tool": "forge",
        "version": TOOL_VERSION,
        "command": command,
        "config": config,
        "stats": stats,
    });
    let text = serde_json::to_string_pretty(&doc)
        .map_err(|e| Error::io(&path, std::io::Error::other(e)))?;
    std::fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))
}

fn thread_pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Config(format!("cannot start {jobs} workers: {e}")))
}

pub fn default_jobs() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

#[derive(Debug, Clone, Serialize)]
pub struct PretrainOptions {
    pub docs: PathBuf,
    pub lexicon: PathBuf,
    pub ner: PathBuf,
    pub out: PathBuf,
    pub masking: MaskingConfig,
    pub jobs: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct PretrainStats {
    pub documents: usize,
    pub examples: usize,
    pub skipped: usize,
    pub policies: BTreeMap<Policy, usize>,
    pub sentinels_total: usize,
    pub sentinels_max: usize,
    pub dropped_spans: usize,
}

impl PretrainStats {
    fn from_outcomes(documents: usize, outcomes: &[BuildOutcome]) -> Self {
        let mut stats = PretrainStats {
            documents,
            policies: Policy::ALL.iter().map(|&p| (p, 0)).collect(),
            ..Self::default()
        };
        for outcome in outcomes {
            match outcome {
                BuildOutcome::Example(ex) => {
                    let k = ex.sentinel_count();
                    stats.examples += 1;
                    *stats.policies.entry(ex.policy).or_insert(0) += 1;
                    stats.sentinels_total += k;
                    stats.sentinels_max = stats.sentinels_max.max(k);
                    stats.dropped_spans += ex.dropped_spans;
                }
                BuildOutcome::Skipped(_) => stats.skipped += 1,
            }
        }
        stats
    }
}

/// Masks every document, in parallel, writing examples in input order.
pub fn pretrain_build(opts: &PretrainOptions) -> Result<PretrainStats> {
    opts.masking.validate()?;
    let docs = load_corpus(&opts.docs)?;
    let lexicon = build_lexicon(&opts.lexicon)?;
    let ner = load_ner_annotations(&opts.ner)?;
    ner.check_against(&docs)?;

    let outcomes: Vec<BuildOutcome> = thread_pool(opts.jobs.max(1))?.install(|| {
        docs.par_iter()
            .map(|doc| {
                let lexicon_spans = annotate_lexicon(doc, &lexicon);
                build_pretraining_example(doc, &lexicon_spans, ner.get(&doc.id), &opts.masking)
            })
            .collect::<Result<Vec<_>>>()
    })?;

    let stats = PretrainStats::from_outcomes(docs.len(), &outcomes);
    let examples: Vec<&MaskedExample> = outcomes
        .iter()
        .filter_map(|o| match o {
            BuildOutcome::Example(e) => Some(e),
            BuildOutcome::Skipped(_) => None,
        })
        .collect();
    write_jsonl(&opts.out, examples.iter().copied())?;
    // jobs is excluded from the echo so runs with different worker counts
    // leave identical artifacts
    let config = json!({
        "docs": opts.docs,
        "lexicon": opts.lexicon,
        "ner": opts.ner,
        "out": opts.out,
        "masking": opts.masking,
    });
    write_run_manifest(
        &opts.out,
        "pretrain-build",
        config,
        serde_json::to_value(&stats).unwrap_or(Value::Null),
    )?;
    Ok(stats)
}

#[derive(Debug, Clone, Serialize)]
pub struct SelectOptions {
    pub candidates: PathBuf,
    pub train_notes: PathBuf,
    pub n: usize,
    pub out: PathBuf,
}

pub fn select(opts: &SelectOptions) -> Result<Vec<SelectionRecord>> {
    let candidates = load_corpus(&opts.candidates)?;
    let training = load_corpus(&opts.train_notes)?;
    let lexicon = build_header_lexicon(&training);
    let scored = score_candidates(&candidates, &lexicon);
    let records = selection_manifest(&scored, SelectionConfig { n: opts.n });
    write_jsonl(&opts.out, &records)?;
    let stats = json!({
        "candidates": records.len(),
        "selected": records.iter().filter(|r| r.selected).count(),
        "lexicon_headers": lexicon.len(),
    });
    write_run_manifest(
        &opts.out,
        "select",
        serde_json::to_value(opts).unwrap_or(Value::Null),
        stats,
    )?;
    Ok(records)
}

#[derive(Debug, Clone, Serialize)]
pub struct AugmentOptions {
    pub notes: PathBuf,
    pub endpoint_config: PathBuf,
    pub task: Task,
    pub n: usize,
    pub exemplar: PathBuf,
    pub out: PathBuf,
    /// Manifest of an earlier run to continue.
    pub resume: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct AugmentStats {
    pub notes: usize,
    pub attempted: usize,
    pub generated: usize,
    pub content_filtered: usize,
    pub empty: usize,
    pub exhausted_retries: usize,
    pub pairs: usize,
}

fn load_template(kv: &KeyValues) -> Result<PromptTemplate> {
    let mut template = PromptTemplate::default();
    if let Some(p) = kv.get("guidelines_file") {
        template = template.with_guidelines_file(Path::new(p))?;
    }
    if let Some(p) = kv.get("fillers_file") {
        template = template.with_filler_file(Path::new(p))?;
    }
    Ok(template)
}

/// Runs generation against the configured chat endpoint, then ranks and
/// writes the dataset. Notes that ran out of retries leave the run resumable
/// and make this return [`Error::Endpoint`] after all outputs are written.
pub fn augment(opts: &AugmentOptions) -> Result<AugmentStats> {
    let kv = KeyValues::from_file(&opts.endpoint_config)?;
    let endpoint = ChatEndpointConfig::from_key_values(&kv)?;
    let template = load_template(&kv)?;
    let client = HttpChatClient::new(endpoint.clone())?;
    augment_with(opts, &client, &endpoint, template)
}

pub fn augment_with(
    opts: &AugmentOptions,
    backend: &dyn ChatBackend,
    endpoint: &ChatEndpointConfig,
    template: PromptTemplate,
) -> Result<AugmentStats> {
    let notes = load_corpus(&opts.notes)?;
    let exemplars = load_exemplars(&opts.exemplar)?;
    let refs: Vec<String> = exemplars.iter().map(|e| e.dialogue.clone()).collect();
    let (files, resume) = match &opts.resume {
        Some(manifest) => (RunFiles::from_manifest(manifest)?, true),
        None => (RunFiles::beside(&opts.out), false),
    };
    let generator = DialogueGenerator::new(backend, exemplars[0].clone())
        .with_template(template)
        .with_max_prompt_tokens(endpoint.max_prompt_tokens);

    let mut run = run_augmentation(
        &notes,
        &generator,
        opts.task,
        &files,
        resume,
        endpoint.max_in_flight,
    )?;
    let rows = build_dataset(&mut run, &notes, &refs, opts.n, endpoint.ranking_metric)?;
    write_jsonl(&opts.out, &rows)?;
    write_manifest(&files.manifest, &run.manifest)?;

    let stats = AugmentStats {
        notes: notes.len(),
        attempted: run.attempted,
        generated: run.count(ManifestStatus::Ok),
        content_filtered: run.count(ManifestStatus::ContentFiltered),
        empty: run.count(ManifestStatus::Empty),
        exhausted_retries: run.count(ManifestStatus::ExhaustedRetries),
        pairs: rows.len(),
    };
    let config = json!({
        "notes": opts.notes,
        "endpoint_config": opts.endpoint_config,
        "endpoint": endpoint,
        "task": opts.task,
        "n": opts.n,
        "exemplar": opts.exemplar,
        "out": opts.out,
        "resume": opts.resume,
        "manifest": files.manifest,
        "dialogues": files.dialogues,
    });
    write_run_manifest(
        &opts.out,
        "augment",
        config,
        serde_json::to_value(&stats).unwrap_or(Value::Null),
    )?;
    if stats.exhausted_retries > 0 {
        return Err(Error::Endpoint(format!(
            "{} note(s) exhausted retries; rerun with --resume {}",
            stats.exhausted_retries,
            files.manifest.display()
        )));
    }
    Ok(stats)
}

#[derive(Debug, Clone, Serialize)]
pub struct EvaluateOptions {
    pub pred: PathBuf,
    pub reference: PathBuf,
    pub tsv: Option<PathBuf>,
}

/// Scores predictions against references matched by id.
pub fn evaluate(opts: &EvaluateOptions) -> Result<MetricReport> {
    let preds = load_corpus(&opts.pred)?;
    let refs = load_corpus(&opts.reference)?;
    let ref_by_id: HashMap<&str, &str> = refs
        .iter()
        .map(|d| (d.id.as_str(), d.text.as_str()))
        .collect();
    let pred_ids: BTreeSet<&str> = preds.iter().map(|d| d.id.as_str()).collect();

    let mut missing: Vec<String> = preds
        .iter()
        .filter(|p| !ref_by_id.contains_key(p.id.as_str()))
        .map(|p| format!("{} (no reference)", p.id))
        .collect();
    missing.extend(
        refs.iter()
            .filter(|r| !pred_ids.contains(r.id.as_str()))
            .map(|r| format!("{} (no prediction)", r.id)),
    );
    if !missing.is_empty() {
        return Err(Error::Integrity(format!(
            "unmatched ids: {}",
            missing.join(", ")
        )));
    }

    let pairs: Vec<EvalPair> = preds
        .iter()
        .map(|p| EvalPair {
            id: p.id.clone(),
            candidate: p.text.clone(),
            reference: ref_by_id[p.id.as_str()].to_string(),
        })
        .collect();
    let report = evaluate_corpus(&pairs)?;
    if let Some(tsv) = &opts.tsv {
        std::fs::write(tsv, report.to_tsv()).map_err(|e| Error::io(tsv, e))?;
        write_run_manifest(
            tsv,
            "evaluate",
            serde_json::to_value(opts).unwrap_or(Value::Null),
            serde_json::to_value(report).unwrap_or(Value::Null),
        )?;
    }
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum LengthField {
    Input,
    Target,
}

impl LengthField {
    /// `input` falls back to `source` and then `text` so plain document
    /// corpora can be measured too.
    fn keys(self) -> &'static [&'static str] {
        match self {
            LengthField::Input => &["input", "source", "text"],
            LengthField::Target => &["target"],
        }
    }
}

/// Nearest-rank token-length percentile of one field across a JSONL file.
/// `percentile` is an integer in `1..=100`.
pub fn length_stats(docs: &Path, field: LengthField, percentile: u32) -> Result<usize> {
    if !(1..=100).contains(&percentile) {
        return Err(Error::Config(format!(
            "percentile must be in 1..=100, got {percentile}"
        )));
    }
    let records: Vec<(usize, Value)> = read_jsonl(docs)?;
    let mut lengths = Vec::with_capacity(records.len());
    for (line, record) in &records {
        let text = field
            .keys()
            .iter()
            .find_map(|k| record.get(*k).and_then(Value::as_str))
            .ok_or_else(|| {
                Error::parse(
                    docs,
                    *line,
                    format!("record has no {:?} text field", field.keys()[0]),
                )
            })?;
        lengths.push(count_tokens(text));
    }
    if lengths.is_empty() {
        return Err(Error::EmptyInput("stats needs a non-empty corpus"));
    }
    length_percentile(&lengths, f64::from(percentile) / 100.0)
}
