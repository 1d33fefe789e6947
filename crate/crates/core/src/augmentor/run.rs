use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{score_generations, DialogueGenerator, GenerationOutcome, SkipKind, Task};
use crate::corpus::{read_jsonl, write_jsonl, Dialogue, Document, Provenance};
use crate::error::{Error, Result};
use crate::rouge::RougeVariant;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ManifestStatus {
    Ok,
    ContentFiltered,
    ExhaustedRetries,
    Empty,
}

impl From<SkipKind> for ManifestStatus {
    fn from(kind: SkipKind) -> Self {
        match kind {
            SkipKind::ContentFiltered => ManifestStatus::ContentFiltered,
            SkipKind::ExhaustedRetries => ManifestStatus::ExhaustedRetries,
            SkipKind::EmptyResponse => ManifestStatus::Empty,
        }
    }
}

impl ManifestStatus {
    /// Finished notes are skipped on resume; exhausted retries are retried.
    pub fn is_final(self) -> bool {
        !matches!(self, ManifestStatus::ExhaustedRetries)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRecord {
    pub note_id: String,
    pub status: ManifestStatus,
    pub stage: Option<u8>,
    pub rank_score: Option<f64>,
}

/// Where a run logs outcomes: one manifest line per outcome and one
/// `dialogues.jsonl` line per generated dialogue, appended as they finish.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunFiles {
    pub manifest: PathBuf,
    pub dialogues: PathBuf,
}

impl RunFiles {
    /// `<stem>.manifest.jsonl` and `<stem>.dialogues.jsonl`.
    pub fn beside(stem: &Path) -> Self {
        let with = |suffix: &str| {
            let mut s = stem.as_os_str().to_owned();
            s.push(suffix);
            PathBuf::from(s)
        };
        Self {
            manifest: with(".manifest.jsonl"),
            dialogues: with(".dialogues.jsonl"),
        }
    }

    /// Inverse of [`RunFiles::beside`] for a manifest path.
    pub fn from_manifest(manifest: &Path) -> Result<Self> {
        let name = manifest.to_string_lossy();
        let stem = name
            .strip_suffix(".manifest.jsonl")
            .ok_or_else(|| Error::Config(format!("{name} does not end in .manifest.jsonl")))?;
        Ok(Self::beside(Path::new(stem)))
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct AugmentationRun {
    /// Every generated dialogue, including ones recovered from a resumed
    /// manifest, sorted by note id.
    pub dialogues: Vec<Dialogue>,
    /// Latest record per note id.
    pub manifest: BTreeMap<String, ManifestRecord>,
    /// Notes sent to the endpoint in this invocation.
    pub attempted: usize,
}

impl AugmentationRun {
    pub fn count(&self, status: ManifestStatus) -> usize {
        self.manifest
            .values()
            .filter(|r| r.status == status)
            .count()
    }
}

/// Latest record per note id; later lines win.
pub fn load_manifest(path: &Path) -> Result<BTreeMap<String, ManifestRecord>> {
    let records: Vec<(usize, ManifestRecord)> = read_jsonl(path)?;
    Ok(records
        .into_iter()
        .map(|(_, r)| (r.note_id.clone(), r))
        .collect())
}

pub fn write_manifest(path: &Path, manifest: &BTreeMap<String, ManifestRecord>) -> Result<usize> {
    let tmp = path.with_extension("jsonl.tmp");
    let n = write_jsonl(&tmp, manifest.values())?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))?;
    Ok(n)
}

struct Prior {
    manifest: BTreeMap<String, ManifestRecord>,
    dialogues: HashMap<String, Dialogue>,
}

fn load_prior(files: &RunFiles, notes: &[Document]) -> Result<Prior> {
    let manifest = load_manifest(&files.manifest)?;
    let dialogues: HashMap<String, Dialogue> = if files.dialogues.exists() {
        read_jsonl::<Dialogue>(&files.dialogues)?
            .into_iter()
            .map(|(_, d)| (d.note_id.clone(), d))
            .collect()
    } else {
        HashMap::new()
    };
    let known: HashSet<&str> = notes.iter().map(|n| n.id.as_str()).collect();
    for id in manifest.keys() {
        if !known.contains(id.as_str()) {
            return Err(Error::Integrity(format!(
                "manifest lists note {id:?} which is not in the input notes"
            )));
        }
    }
    for rec in manifest.values().filter(|r| r.status == ManifestStatus::Ok) {
        if !dialogues.contains_key(&rec.note_id) {
            return Err(Error::Integrity(format!(
                "manifest marks {:?} as ok but {} has no dialogue for it",
                rec.note_id,
                files.dialogues.display()
            )));
        }
    }
    Ok(Prior {
        manifest,
        dialogues,
    })
}

struct Sink {
    manifest: BufWriter<File>,
    dialogues: BufWriter<File>,
}

impl Sink {
    fn open(files: &RunFiles, append: bool) -> Result<Self> {
        let open = |path: &Path| {
            OpenOptions::new()
                .create(true)
                .write(true)
                .append(append)
                .truncate(!append)
                .open(path)
                .map(BufWriter::new)
                .map_err(|e| Error::io(path, e))
        };
        Ok(Self {
            manifest: open(&files.manifest)?,
            dialogues: open(&files.dialogues)?,
        })
    }

    fn record(
        &mut self,
        files: &RunFiles,
        record: &ManifestRecord,
        dialogue: Option<&Dialogue>,
    ) -> Result<()> {
        fn line<T: Serialize>(w: &mut BufWriter<File>, path: &Path, value: &T) -> Result<()> {
            let mut bytes =
                serde_json::to_vec(value).map_err(|e| Error::io(path, std::io::Error::other(e)))?;
            bytes.push(b'\n');
            w.write_all(&bytes)
                .and_then(|_| w.flush())
                .map_err(|e| Error::io(path, e))
        }
        if let Some(d) = dialogue {
            line(&mut self.dialogues, &files.dialogues, d)?;
        }
        line(&mut self.manifest, &files.manifest, record)
    }
}

/// Generates dialogues for every note not already finished in the manifest.
///
/// Notes are processed in id order by up to `workers` threads. Each outcome
/// is appended to the run files as soon as it is known, so a crashed run can
/// be resumed with `resume = true` without repeating finished notes.
pub fn run_augmentation(
    notes: &[Document],
    generator: &DialogueGenerator<'_>,
    task: Task,
    files: &RunFiles,
    resume: bool,
    workers: usize,
) -> Result<AugmentationRun> {
    let prior = if resume && files.manifest.exists() {
        Some(load_prior(files, notes)?)
    } else {
        None
    };
    let mut manifest = prior
        .as_ref()
        .map(|p| p.manifest.clone())
        .unwrap_or_default();
    let mut dialogues: BTreeMap<String, Dialogue> = BTreeMap::new();
    if let Some(p) = &prior {
        for rec in p
            .manifest
            .values()
            .filter(|r| r.status == ManifestStatus::Ok)
        {
            dialogues.insert(rec.note_id.clone(), p.dialogues[&rec.note_id].clone());
        }
    }

    let mut pending: Vec<&Document> = notes
        .iter()
        .filter(|n| manifest.get(&n.id).is_none_or(|r| !r.status.is_final()))
        .collect();
    pending.sort_by(|a, b| a.id.cmp(&b.id));

    let sink = Mutex::new(Sink::open(files, prior.is_some())?);
    let next = AtomicUsize::new(0);
    let abort = AtomicBool::new(false);
    let results: Mutex<Vec<(ManifestRecord, Option<Dialogue>)>> = Mutex::new(Vec::new());
    let first_error: Mutex<Option<Error>> = Mutex::new(None);

    std::thread::scope(|scope| {
        for _ in 0..workers.max(1).min(pending.len().max(1)) {
            scope.spawn(|| loop {
                if abort.load(Ordering::SeqCst) {
                    break;
                }
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(note) = pending.get(i) else { break };
                let outcome = generator.generate(note, task).and_then(|outcome| {
                    let (record, dialogue) = match outcome {
                        GenerationOutcome::Dialogue(d) => (
                            ManifestRecord {
                                note_id: note.id.clone(),
                                status: ManifestStatus::Ok,
                                stage: Some(if d.provenance == Provenance::SyntheticStage2 {
                                    2
                                } else {
                                    1
                                }),
                                rank_score: None,
                            },
                            Some(d),
                        ),
                        GenerationOutcome::Skipped {
                            reason,
                            request_id,
                            stage,
                        } => {
                            tracing::info!(note = %note.id, %request_id, ?reason, stage, "skipped");
                            (
                                ManifestRecord {
                                    note_id: note.id.clone(),
                                    status: reason.into(),
                                    stage: Some(stage),
                                    rank_score: None,
                                },
                                None,
                            )
                        }
                    };
                    sink.lock().unwrap_or_else(|e| e.into_inner()).record(
                        files,
                        &record,
                        dialogue.as_ref(),
                    )?;
                    Ok((record, dialogue))
                });
                match outcome {
                    Ok(r) => results.lock().unwrap_or_else(|e| e.into_inner()).push(r),
                    Err(e) => {
                        abort.store(true, Ordering::SeqCst);
                        first_error
                            .lock()
                            .unwrap_or_else(|e| e.into_inner())
                            .get_or_insert(e);
                        break;
                    }
                }
            });
        }
    });

    if let Some(e) = first_error.into_inner().unwrap_or_else(|e| e.into_inner()) {
        return Err(e);
    }
    let results = results.into_inner().unwrap_or_else(|e| e.into_inner());
    let attempted = results.len();
    for (record, dialogue) in results {
        if let Some(d) = dialogue {
            dialogues.insert(record.note_id.clone(), d);
        } else {
            dialogues.remove(&record.note_id);
        }
        manifest.insert(record.note_id.clone(), record);
    }
    Ok(AugmentationRun {
        dialogues: dialogues.into_values().collect(),
        manifest,
        attempted,
    })
}

/// One training pair: synthetic dialogue in, real note out.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetRow {
    pub id: String,
    pub input: String,
    pub target: String,
    pub provenance: Provenance,
    pub rank_score: Option<f64>,
}

/// Ranks the run's dialogues, fills `rank_score` in the manifest, and pairs
/// the top `n` with their source notes.
pub fn build_dataset(
    run: &mut AugmentationRun,
    notes: &[Document],
    training_refs: &[String],
    n: usize,
    metric: RougeVariant,
) -> Result<Vec<DatasetRow>> {
    if run.dialogues.is_empty() {
        return Ok(Vec::new());
    }
    let scored = score_generations(&run.dialogues, training_refs, metric)?;
    for d in &scored {
        if let Some(rec) = run.manifest.get_mut(&d.note_id) {
            rec.rank_score = d.rank_score;
        }
    }
    let by_id: HashMap<&str, &Document> = notes.iter().map(|d| (d.id.as_str(), d)).collect();
    let mut rows = Vec::with_capacity(n.min(scored.len()));
    for d in scored.into_iter().take(n) {
        let note = by_id.get(d.note_id.as_str()).ok_or_else(|| {
            Error::Integrity(format!("dialogue for unknown note {:?}", d.note_id))
        })?;
        let row = DatasetRow {
            id: d.note_id.clone(),
            input: d.to_text(),
            target: note.text.clone(),
            provenance: d.provenance,
            rank_score: d.rank_score,
        };
        assert!(row.provenance.is_synthetic() && row.target == note.text);
        rows.push(row);
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_naming() {
        let files = RunFiles::beside(Path::new("/tmp/out/aug.jsonl"));
        assert_eq!(
            files.manifest,
            PathBuf::from("/tmp/out/aug.jsonl.manifest.jsonl")
        );
        assert_eq!(
            files.dialogues,
            PathBuf::from("/tmp/out/aug.jsonl.dialogues.jsonl")
        );
        assert_eq!(RunFiles::from_manifest(&files.manifest).unwrap(), files);
        assert!(RunFiles::from_manifest(Path::new("x.jsonl")).is_err());
    }

    #[test]
    fn manifest_schema() {
        let rec = ManifestRecord {
            note_id: "n".into(),
            status: ManifestStatus::ContentFiltered,
            stage: Some(1),
            rank_score: None,
        };
        assert_eq!(
            serde_json::to_string(&rec).unwrap(),
            r#"{"note_id":"n","status":"content_filtered","stage":1,"rank_score":null}"#
        );
    }

    #[test]
    fn manifest_last_line_wins() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.manifest.jsonl");
        std::fs::write(
            &path,
            "{\"note_id\":\"a\",\"status\":\"exhausted_retries\",\"stage\":1,\"rank_score\":null}\n\
             {\"note_id\":\"a\",\"status\":\"ok\",\"stage\":1,\"rank_score\":null}\n",
        )
        .unwrap();
        assert_eq!(
            load_manifest(&path).unwrap()["a"].status,
            ManifestStatus::Ok
        );
    }
}
