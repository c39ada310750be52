//! Command implementations behind the `prgc` binary.
//!
//! Each command returns `Result<()>`; [`run`] maps errors to exit codes:
//! 0 success, 1 usage or config error, 2 data error, 3 runtime failure.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use log::{info, warn};
use serde::{Deserialize, Serialize};

use crate::data::{
    dataset_stats_with, gen_synthetic, load_dataset, load_relation_vocab, parse_records,
    relations_sidecar, tokenize, write_synthetic, LoadOptions, PatternRules, SynthConfig,
};
use crate::encoder::EncoderConfig;
use crate::error::{Error, Result};
use crate::eval::{
    breakdown, report_table, score_subtasks, score_triples, Intermediates, Prediction,
};
use crate::inference::{extract_detailed, Extraction, Role, Thresholds};
use crate::training::{train, Checkpoint, TrainConfig, TrainData};
use crate::types::{
    AnnotatedSentence, AnnotationMode, EntitySpan, RelationSet, Sentence, TaggingMode, Triple,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config { .. } | Error::InvalidArgument(_) | Error::InfeasibleConfig(_) => EXIT_USAGE,
        Error::Parse { .. }
        | Error::Io { .. }
        | Error::Json(_)
        | Error::UnresolvableEntity { .. }
        | Error::IdMismatch { .. }
        | Error::LengthMismatch { .. }
        | Error::MissingIntermediates(_)
        | Error::CheckpointVersion { .. }
        | Error::EmptySentence
        | Error::SentenceTooLong { .. }
        | Error::SpanOutOfBounds { .. }
        | Error::OverlappingSpans(..)
        | Error::DuplicateRelation(_)
        | Error::UnknownRelation { .. }
        | Error::SingleTaggingConflict { .. } => EXIT_DATA,
        _ => EXIT_RUNTIME,
    }
}

/// Run configuration file (TOML). Every section and key is optional.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub mode: AnnotationMode,
    pub train: TrainConfig,
    pub encoder: EncoderConfig,
    pub thresholds: Thresholds,
    pub synth: SynthConfig,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::Config {
            path: path.to_owned(),
            message: e.to_string(),
        })
    }

    pub fn load_or_default(path: Option<&Path>) -> Result<Self> {
        match path {
            Some(p) => {
                info!("config: {}", p.display());
                RunConfig::load(p)
            }
            None => Ok(RunConfig::default()),
        }
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::InvalidArgument(format!("config snapshot: {e}")))
    }
}

/// Flags that take precedence over the config file.
#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long = "batch-size")]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub lambda1: Option<f64>,
    #[arg(long)]
    pub lambda2: Option<f64>,
    /// last_word | full_span
    #[arg(long)]
    pub mode: Option<AnnotationMode>,
    /// dual | single
    #[arg(long)]
    pub tagging: Option<TaggingMode>,
}

impl Overrides {
    pub fn apply(&self, c: &mut RunConfig) {
        fn set<T: Copy + std::fmt::Debug>(name: &str, slot: &mut T, flag: Option<T>) {
            if let Some(v) = flag {
                info!("flag --{name}={v:?} overrides {slot:?}");
                *slot = v;
            }
        }
        set("seed", &mut c.train.seed, self.seed);
        set("seed", &mut c.synth.seed, self.seed);
        set("epochs", &mut c.train.epochs, self.epochs);
        set("batch-size", &mut c.train.batch_size, self.batch_size);
        set("lambda1", &mut c.thresholds.lambda1, self.lambda1);
        set("lambda2", &mut c.thresholds.lambda2, self.lambda2);
        set("mode", &mut c.mode, self.mode);
        set("tagging", &mut c.train.tagging, self.tagging);
        set("tagging", &mut c.synth.tagging, self.tagging);
    }
}

#[derive(Debug, Parser)]
#[command(name = "prgc", version, about = "Joint relational triple extraction")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a model and write checkpoint, metrics and resolved config.
    Train(TrainArgs),
    /// Extract triples with a trained checkpoint.
    Predict(PredictArgs),
    /// Score predictions against gold.
    Eval(EvalArgs),
    /// Pattern and size statistics of a corpus.
    Stats(StatsArgs),
    /// Write a synthetic corpus.
    Generate(GenerateArgs),
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long)]
    pub valid: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Relation vocabulary, one name per line.
    #[arg(long)]
    pub relations: Option<PathBuf>,
    #[command(flatten)]
    pub overrides: Overrides,
}

#[derive(Debug, Clone, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Input corpus; triples are ignored.
    #[arg(long)]
    pub test: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub lambda1: Option<f64>,
    #[arg(long)]
    pub lambda2: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    /// Predictions written by `predict`.
    #[arg(long)]
    pub pred: PathBuf,
    /// Gold corpus.
    #[arg(long)]
    pub test: PathBuf,
    #[arg(long, default_value_t = AnnotationMode::FullSpan)]
    pub mode: AnnotationMode,
    #[arg(long)]
    pub relations: Option<PathBuf>,
    /// Also write the reports as JSON.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct StatsArgs {
    pub data: PathBuf,
    #[arg(long, default_value_t = AnnotationMode::FullSpan)]
    pub mode: AnnotationMode,
    #[arg(long)]
    pub relations: Option<PathBuf>,
    #[arg(long)]
    pub json: bool,
    /// Count EPO triple pairs as SEO as well.
    #[arg(long)]
    pub seo_at_least_one: bool,
    /// Also flag subject/object overlap across triples as SOO.
    #[arg(long)]
    pub soo_across_triples: bool,
}

#[derive(Debug, Clone, Args)]
pub struct GenerateArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub tagging: Option<TaggingMode>,
}

/// Relation vocabulary: explicit file, else the corpus sidecar when present.
fn relation_vocab(explicit: Option<&Path>, corpus: &Path) -> Result<Option<RelationSet>> {
    if let Some(p) = explicit {
        return load_relation_vocab(p).map(Some);
    }
    let sidecar = relations_sidecar(corpus);
    if sidecar.exists() {
        info!("relations: {}", sidecar.display());
        return load_relation_vocab(&sidecar).map(Some);
    }
    Ok(None)
}

fn create_file(path: &Path) -> Result<BufWriter<fs::File>> {
    fs::File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

fn write_line<W: Write>(out: &mut W, path: &Path, value: &impl Serialize) -> Result<()> {
    serde_json::to_writer(&mut *out, value)?;
    out.write_all(b"\n").map_err(|e| Error::io(path, e))
}

pub fn cmd_train(args: &TrainArgs) -> Result<()> {
    let mut config = RunConfig::load_or_default(args.config.as_deref())?;
    args.overrides.apply(&mut config);
    config.encoder.validate()?;
    config.train.validate()?;
    config.thresholds.validate()?;

    let mut options = LoadOptions {
        mode: config.mode,
        relations: relation_vocab(args.relations.as_deref(), &args.train)?,
        max_len: config.encoder.max_len,
    };
    let train_set = load_dataset(&args.train, &options)?;
    info!(
        "train: {} sentences, {} skipped, {} relations",
        train_set.sentences.len(),
        train_set.skipped.len(),
        train_set.relations.len()
    );
    options.relations = Some(train_set.relations.clone());
    let valid = match &args.valid {
        Some(p) => load_dataset(p, &options)?.sentences,
        None => Vec::new(),
    };

    let outcome = train(
        &TrainData {
            train: &train_set.sentences,
            valid: &valid,
            relations: &train_set.relations,
        },
        &config.encoder,
        &config.train,
        config.thresholds,
    )?;

    fs::create_dir_all(&args.out).map_err(|e| Error::io(&args.out, e))?;
    outcome.checkpoint.save(args.out.join("checkpoint.json"))?;
    let metrics = args.out.join("metrics.jsonl");
    let mut out = create_file(&metrics)?;
    for record in &outcome.history {
        write_line(&mut out, &metrics, record)?;
    }
    out.flush().map_err(|e| Error::io(&metrics, e))?;
    let snapshot = args.out.join("config.toml");
    fs::write(&snapshot, config.to_toml()?).map_err(|e| Error::io(&snapshot, e))?;
    info!("wrote {}", args.out.display());
    Ok(())
}

/// `(subject start, subject end, relation, object start, object end)`.
pub type SpanTriple = (usize, usize, String, usize, usize);

/// One line of a predictions file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub id: String,
    /// Tokens joined by single spaces.
    pub text: String,
    pub pred_triples: Vec<(String, String, String)>,
    pub spans: Vec<SpanTriple>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub relations: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entities: Option<Vec<(usize, usize, Role)>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pairs: Option<Vec<(usize, usize, usize, usize)>>,
}

fn relation_name(relations: &RelationSet, id: usize) -> String {
    relations.name(id).unwrap_or("?").to_owned()
}

impl PredictionRecord {
    pub fn new(sentence: &Sentence, extraction: &Extraction, relations: &RelationSet) -> Self {
        let t = &extraction.triples;
        PredictionRecord {
            id: sentence.id.clone(),
            text: sentence.text(),
            pred_triples: t
                .iter()
                .map(|t| {
                    (
                        sentence.span_text(t.subject),
                        relation_name(relations, t.relation),
                        sentence.span_text(t.object),
                    )
                })
                .collect(),
            spans: t
                .iter()
                .map(|t| {
                    (
                        t.subject.start,
                        t.subject.end,
                        relation_name(relations, t.relation),
                        t.object.start,
                        t.object.end,
                    )
                })
                .collect(),
            relations: Some(
                extraction
                    .relations
                    .iter()
                    .map(|&k| relation_name(relations, k))
                    .collect(),
            ),
            entities: Some(
                extraction
                    .entities
                    .iter()
                    .map(|(s, role)| (s.start, s.end, *role))
                    .collect(),
            ),
            pairs: Some(
                extraction
                    .pairs
                    .iter()
                    .map(|(s, o)| (s.start, s.end, o.start, o.end))
                    .collect(),
            ),
        }
    }

    /// Back to spans; relation names are interned into `relations` so that
    /// unseen names get fresh ids and never match gold.
    pub fn to_prediction(&self, relations: &mut RelationSet) -> Result<Prediction> {
        let sentence = Sentence::from_text(self.id.clone(), &self.text)?;
        let triples = self
            .spans
            .iter()
            .map(|(a, b, r, c, d)| {
                Triple::new(
                    EntitySpan::new(*a, *b),
                    relations.intern(r),
                    EntitySpan::new(*c, *d),
                )
            })
            .collect::<Vec<_>>();
        let annotated = AnnotatedSentence::new(sentence, triples)?;
        let intermediates = match (&self.relations, &self.entities, &self.pairs) {
            (Some(rels), Some(ents), Some(pairs)) => Some(Intermediates {
                relations: rels.iter().map(|r| relations.intern(r)).collect(),
                entities: ents
                    .iter()
                    .map(|&(a, b, role)| (EntitySpan::new(a, b), role))
                    .collect(),
                pairs: pairs
                    .iter()
                    .map(|&(a, b, c, d)| (EntitySpan::new(a, b), EntitySpan::new(c, d)))
                    .collect(),
            }),
            _ => None,
        };
        Ok(Prediction {
            annotated,
            intermediates,
        })
    }
}

pub fn read_predictions(path: &Path) -> Result<Vec<PredictionRecord>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: path.to_owned(),
            message: format!("line {}: {e}", i + 1),
        })?);
    }
    Ok(out)
}

pub fn cmd_predict(args: &PredictArgs) -> Result<()> {
    let ckpt = Checkpoint::load(&args.checkpoint)?;
    let mut thresholds = ckpt.thresholds;
    if let Some(l1) = args.lambda1 {
        thresholds.lambda1 = l1;
    }
    if let Some(l2) = args.lambda2 {
        thresholds.lambda2 = l2;
    }
    thresholds.validate()?;
    let model = &ckpt.model;

    let text = fs::read_to_string(&args.test).map_err(|e| Error::io(&args.test, e))?;
    let records = parse_records(&text, &args.test)?;
    let mut out = create_file(&args.out)?;
    for (index, record) in records.iter().enumerate() {
        let id = record.id.clone().unwrap_or_else(|| index.to_string());
        let sentence = match Sentence::new(id, tokenize(&record.text)) {
            Ok(s) => s,
            Err(e) => {
                warn!("skipping record {index}: {e}");
                continue;
            }
        };
        let extraction = match extract_detailed(model, &sentence, thresholds) {
            Ok(x) => x,
            Err(e @ Error::SentenceTooLong { .. }) => {
                warn!("record {index}: {e}; emitting no triples");
                Extraction::default()
            }
            Err(e) => return Err(e),
        };
        write_line(
            &mut out,
            &args.out,
            &PredictionRecord::new(&sentence, &extraction, &model.relations),
        )?;
    }
    out.flush().map_err(|e| Error::io(&args.out, e))?;
    info!(
        "wrote {} predictions to {}",
        records.len(),
        args.out.display()
    );
    Ok(())
}

/// Reports printed and optionally written by `eval`.
#[derive(Debug, Clone, Serialize)]
pub struct EvalReport {
    pub overall: crate::eval::ScoreReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub subtasks: Option<crate::eval::SubtaskReports>,
    pub breakdown: crate::eval::Breakdown,
}

pub fn evaluate_files(args: &EvalArgs) -> Result<EvalReport> {
    let options = LoadOptions {
        mode: args.mode,
        relations: relation_vocab(args.relations.as_deref(), &args.test)?,
        max_len: usize::MAX,
    };
    let gold = load_dataset(&args.test, &options)?;
    let mut relations = gold.relations.clone();
    let gold_ids: std::collections::HashSet<&str> = gold
        .sentences
        .iter()
        .map(|a| a.sentence.id.as_str())
        .collect();

    let mut preds = Vec::new();
    let mut dropped = 0;
    for r in read_predictions(&args.pred)? {
        if gold_ids.contains(r.id.as_str()) {
            preds.push(r.to_prediction(&mut relations)?);
        } else {
            dropped += 1;
        }
    }
    if dropped > 0 {
        warn!("{dropped} predictions have no gold sentence and are ignored");
    }
    let annotated: Vec<AnnotatedSentence> = preds.iter().map(|p| p.annotated.clone()).collect();
    let overall = score_triples(&annotated, &gold.sentences, args.mode)?;
    let subtasks = if preds.iter().all(|p| p.intermediates.is_some()) {
        Some(score_subtasks(&preds, &gold.sentences)?)
    } else {
        None
    };
    let breakdown = breakdown(
        &annotated,
        &gold.sentences,
        args.mode,
        PatternRules::default(),
    )?;
    Ok(EvalReport {
        overall,
        subtasks,
        breakdown,
    })
}

pub fn cmd_eval(args: &EvalArgs) -> Result<()> {
    let report = evaluate_files(args)?;
    let mut rows = vec![("triples".to_string(), &report.overall)];
    if let Some(s) = &report.subtasks {
        rows.push(("relations".into(), &s.relation));
        rows.push(("entities".into(), &s.entity));
        rows.push(("pairs".into(), &s.pair));
    }
    println!("{}", report_table(rows));
    println!("{}", report.breakdown);
    if let Some(path) = &args.out {
        fs::write(path, serde_json::to_string_pretty(&report)?).map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}

pub fn cmd_stats(args: &StatsArgs) -> Result<()> {
    let options = LoadOptions {
        mode: args.mode,
        relations: relation_vocab(args.relations.as_deref(), &args.data)?,
        max_len: usize::MAX,
    };
    let ds = load_dataset(&args.data, &options)?;
    if !ds.skipped.is_empty() {
        warn!("{} records skipped", ds.skipped.len());
    }
    let rules = PatternRules {
        seo_at_least_one: args.seo_at_least_one,
        soo_across_triples: args.soo_across_triples,
    };
    let report = dataset_stats_with(&ds.sentences, &ds.relations, rules);
    if args.json {
        println!("{}", serde_json::to_string(&report)?);
    } else {
        println!("{report}");
    }
    Ok(())
}

pub fn cmd_generate(args: &GenerateArgs) -> Result<()> {
    let mut config = RunConfig::load_or_default(args.config.as_deref())?;
    Overrides {
        seed: args.seed,
        tagging: args.tagging,
        ..Overrides::default()
    }
    .apply(&mut config);
    let corpus = gen_synthetic(&config.synth)?;
    write_synthetic(&args.out, &corpus)?;
    info!(
        "wrote {} sentences to {}",
        corpus.sentences.len(),
        args.out.display()
    );
    Ok(())
}

pub fn dispatch(command: &Command) -> Result<()> {
    match command {
        Command::Train(a) => cmd_train(a),
        Command::Predict(a) => cmd_predict(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Stats(a) => cmd_stats(a),
        Command::Generate(a) => cmd_generate(a),
    }
}

/// Runs a parsed command line and returns the process exit code.
pub fn run(cli: &Cli) -> i32 {
    match dispatch(&cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
