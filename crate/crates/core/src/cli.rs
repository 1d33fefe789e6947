//! Argument parsing for the `forge` binary.
//!
//! `--config FILE` may appear anywhere on the command line. Its `key=value`
//! lines become `--key value` flags of the chosen subcommand, placed before
//! the user's own flags so that explicit flags win.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

use crate::augmentor::Task;
use crate::config::KeyValues;
use crate::error::Error;
use crate::masking::MaskingConfig;
use crate::pipeline::{
    self, AugmentOptions, EvaluateOptions, LengthField, PretrainOptions, SelectOptions,
};

#[derive(Debug, Parser)]
#[command(
    name = "forge",
    version,
    about = "Clinical corpus engineering pipelines"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
#[command(args_override_self = true)]
pub enum Command {
    /// Build span-corruption pre-training examples.
    PretrainBuild {
        #[arg(long)]
        docs: PathBuf,
        #[arg(long)]
        lexicon: PathBuf,
        #[arg(long)]
        ner: PathBuf,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        jobs: Option<usize>,
        /// Mask random sentences together with term spans.
        #[arg(long)]
        combined: bool,
        #[arg(long, default_value_t = 0.70)]
        p_lexicon: f64,
        #[arg(long, default_value_t = 0.15)]
        sentence_rate: f64,
        #[arg(long, default_value_t = 100)]
        max_sentinels: usize,
    },
    /// Rank candidate notes by shared section headers.
    Select {
        #[arg(long)]
        candidates: PathBuf,
        #[arg(long)]
        train_notes: PathBuf,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate synthetic dialogues from notes via a chat endpoint.
    Augment {
        #[arg(long)]
        notes: PathBuf,
        #[arg(long)]
        endpoint_config: PathBuf,
        #[arg(long, value_enum, ignore_case = true)]
        task: TaskArg,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        exemplar: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Score predictions against references with ROUGE.
    Evaluate {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long = "ref")]
        reference: PathBuf,
        #[arg(long)]
        tsv: Option<PathBuf>,
    },
    /// Token-length percentile of a corpus field.
    Stats {
        #[arg(long)]
        docs: PathBuf,
        #[arg(long, value_enum)]
        field: FieldArg,
        #[arg(long)]
        percentile: u32,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum TaskArg {
    B,
    C,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FieldArg {
    Input,
    Target,
}

const SUBCOMMANDS: [&str; 5] = ["pretrain-build", "select", "augment", "evaluate", "stats"];

/// Pulls `--config FILE` out of `args` and splices its entries in as flags
/// right after the subcommand name.
pub fn expand_config(args: Vec<OsString>) -> Result<Vec<OsString>, Error> {
    let mut rest = Vec::with_capacity(args.len());
    let mut config = None;
    let mut iter = args.into_iter();
    while let Some(arg) = iter.next() {
        let s = arg.to_string_lossy();
        if s == "--config" {
            let path = iter
                .next()
                .ok_or_else(|| Error::Config("--config needs a file".into()))?;
            config = Some(PathBuf::from(path));
        } else if let Some(path) = s.strip_prefix("--config=") {
            config = Some(PathBuf::from(path));
        } else {
            rest.push(arg);
        }
    }
    let Some(path) = config else { return Ok(rest) };
    let kv = KeyValues::from_file(&path)?;
    let Some(pos) = rest
        .iter()
        .position(|a| SUBCOMMANDS.contains(&a.to_string_lossy().as_ref()))
    else {
        return Ok(rest);
    };
    let mut injected = Vec::new();
    for (key, value) in kv.iter() {
        let flag = format!("--{}", key.replace('_', "-"));
        match value {
            "true" => injected.push(OsString::from(flag)),
            "false" => {}
            _ => {
                injected.push(OsString::from(flag));
                injected.push(OsString::from(value));
            }
        }
    }
    rest.splice(pos + 1..pos + 1, injected);
    Ok(rest)
}

fn execute(command: Command) -> Result<(), Error> {
    match command {
        Command::PretrainBuild {
            docs,
            lexicon,
            ner,
            seed,
            out,
            jobs,
            combined,
            p_lexicon,
            sentence_rate,
            max_sentinels,
        } => {
            let opts = PretrainOptions {
                docs,
                lexicon,
                ner,
                out,
                masking: MaskingConfig {
                    p_lexicon,
                    sentence_mask_rate: sentence_rate,
                    max_sentinels,
                    master_seed: seed,
                    combined,
                },
                jobs: jobs.unwrap_or_else(pipeline::default_jobs),
            };
            let stats = pipeline::pretrain_build(&opts)?;
            eprintln!(
                "documents={} examples={} skipped={} sentinels={} dropped_spans={}",
                stats.documents,
                stats.examples,
                stats.skipped,
                stats.sentinels_total,
                stats.dropped_spans
            );
            for (policy, count) in &stats.policies {
                eprintln!("  {policy:<20} {count}");
            }
        }
        Command::Select {
            candidates,
            train_notes,
            n,
            out,
        } => {
            let records = pipeline::select(&SelectOptions {
                candidates,
                train_notes,
                n,
                out,
            })?;
            let selected = records.iter().filter(|r| r.selected).count();
            eprintln!("candidates={} selected={selected}", records.len());
        }
        Command::Augment {
            notes,
            endpoint_config,
            task,
            n,
            exemplar,
            out,
            resume,
        } => {
            let task = match task {
                TaskArg::B => Task::B,
                TaskArg::C => Task::C,
            };
            let stats = pipeline::augment(&AugmentOptions {
                notes,
                endpoint_config,
                task,
                n,
                exemplar,
                out,
                resume,
            })?;
            eprintln!(
                "notes={} attempted={} generated={} content_filtered={} empty={} pairs={}",
                stats.notes,
                stats.attempted,
                stats.generated,
                stats.content_filtered,
                stats.empty,
                stats.pairs
            );
        }
        Command::Evaluate {
            pred,
            reference,
            tsv,
        } => {
            let report = pipeline::evaluate(&EvaluateOptions {
                pred,
                reference,
                tsv,
            })?;
            print!("{}", report.to_table());
        }
        Command::Stats {
            docs,
            field,
            percentile,
        } => {
            let field = match field {
                FieldArg::Input => LengthField::Input,
                FieldArg::Target => LengthField::Target,
            };
            println!("{}", pipeline::length_stats(&docs, field, percentile)?);
        }
    }
    Ok(())
}

/// Parses and runs; returns the process exit code (0 ok, 1 usage or
/// configuration, 2 data, 3 endpoint).
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let args = match expand_config(args.into_iter().map(Into::into).collect()) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("forge: {e}");
            return 1;
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("forge: {e}");
            e.exit_code()
        }
    }
}
