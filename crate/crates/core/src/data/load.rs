//! Reading and writing corpora in the public `{text, triple_list}` format.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{AnnotatedSentence, AnnotationMode, EntitySpan, RelationSet, Sentence, Triple};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawRecord {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    pub text: String,
    #[serde(default)]
    pub triple_list: Vec<(String, String, String)>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SkippedRecord {
    pub index: usize,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub struct LoadedDataset {
    pub sentences: Vec<AnnotatedSentence>,
    pub relations: RelationSet,
    pub skipped: Vec<SkippedRecord>,
}

#[derive(Debug, Clone)]
pub struct LoadOptions {
    pub mode: AnnotationMode,
    /// Fixed relation vocabulary; when absent, relations are collected in
    /// order of first appearance.
    pub relations: Option<RelationSet>,
    pub max_len: usize,
}

impl Default for LoadOptions {
    fn default() -> Self {
        LoadOptions {
            mode: AnnotationMode::FullSpan,
            relations: None,
            max_len: 100,
        }
    }
}

/// Whitespace splitting, then every character that is neither alphanumeric
/// nor whitespace becomes its own token.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    for chunk in text.split_whitespace() {
        let mut word = String::new();
        for c in chunk.chars() {
            if c.is_alphanumeric() {
                word.push(c);
            } else {
                if !word.is_empty() {
                    tokens.push(std::mem::take(&mut word));
                }
                tokens.push(c.to_string());
            }
        }
        if !word.is_empty() {
            tokens.push(word);
        }
    }
    tokens
}

/// First occurrence of `needle` as a contiguous token run.
pub fn find_tokens(haystack: &[String], needle: &[String]) -> Option<EntitySpan> {
    if needle.is_empty() || needle.len() > haystack.len() {
        return None;
    }
    haystack
        .windows(needle.len())
        .position(|w| w == needle)
        .map(|start| EntitySpan::new(start, start + needle.len() - 1))
}

/// Parses a JSON array of records or JSON lines.
pub fn parse_records(text: &str, path: &Path) -> Result<Vec<RawRecord>> {
    let parse_err = |e: serde_json::Error, line: Option<usize>| Error::Parse {
        path: path.to_owned(),
        message: match line {
            Some(l) => format!("line {l}: {e}"),
            None => e.to_string(),
        },
    };
    if text.trim_start().starts_with('[') {
        return serde_json::from_str(text).map_err(|e| parse_err(e, None));
    }
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| parse_err(e, Some(i + 1))))
        .collect()
}

/// One relation name per line; order gives the ids.
pub fn load_relation_vocab(path: impl AsRef<Path>) -> Result<RelationSet> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    RelationSet::new(text.lines().map(str::trim).filter(|l| !l.is_empty()))
}

pub fn write_relation_vocab(path: impl AsRef<Path>, relations: &RelationSet) -> Result<()> {
    let path = path.as_ref();
    let mut text = relations.names().join("\n");
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Conventional location of a corpus' relation vocabulary.
pub fn relations_sidecar(path: &Path) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(".relations");
    PathBuf::from(name)
}

pub fn load_dataset(path: impl AsRef<Path>, options: &LoadOptions) -> Result<LoadedDataset> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let records = parse_records(&text, path)?;
    Ok(resolve_records(&records, options))
}

pub fn resolve_records(records: &[RawRecord], options: &LoadOptions) -> LoadedDataset {
    let (mut relations, fixed) = match &options.relations {
        Some(r) => (r.clone(), true),
        None => (RelationSet::default(), false),
    };
    if !fixed {
        for r in records {
            for (_, rel, _) in &r.triple_list {
                relations.intern(rel);
            }
        }
    }

    let mut sentences = Vec::with_capacity(records.len());
    let mut skipped = Vec::new();
    for (index, record) in records.iter().enumerate() {
        match resolve_record(index, record, options, &relations) {
            Ok(a) => sentences.push(a),
            Err(e) => {
                warn!("skipping record {index}: {e}");
                skipped.push(SkippedRecord {
                    index,
                    reason: e.to_string(),
                });
            }
        }
    }
    LoadedDataset {
        sentences,
        relations,
        skipped,
    }
}

pub fn resolve_record(
    index: usize,
    record: &RawRecord,
    options: &LoadOptions,
    relations: &RelationSet,
) -> Result<AnnotatedSentence> {
    let id = record.id.clone().unwrap_or_else(|| index.to_string());
    let sentence = Sentence::new(id, tokenize(&record.text))?;
    sentence.check_len(options.max_len)?;
    let resolve = |entity: &str| -> Result<EntitySpan> {
        let span = find_tokens(sentence.tokens(), &tokenize(entity)).ok_or_else(|| {
            Error::UnresolvableEntity {
                record: index,
                entity: entity.to_owned(),
            }
        })?;
        Ok(match options.mode {
            AnnotationMode::FullSpan => span,
            AnnotationMode::LastWord => EntitySpan::single(span.end),
        })
    };
    let mut triples = Vec::with_capacity(record.triple_list.len());
    for (subject, relation, object) in &record.triple_list {
        let rel = relations.id(relation).ok_or_else(|| {
            Error::InvalidArgument(format!("record {index}: unknown relation `{relation}`"))
        })?;
        triples.push(Triple::new(resolve(subject)?, rel, resolve(object)?));
    }
    AnnotatedSentence::new(sentence, triples)
}

pub fn to_raw_record(annotated: &AnnotatedSentence, relations: &RelationSet) -> RawRecord {
    let s = &annotated.sentence;
    RawRecord {
        id: Some(s.id.clone()),
        text: s.text(),
        triple_list: annotated
            .triples
            .iter()
            .map(|t| {
                (
                    s.span_text(t.subject),
                    relations.name(t.relation).unwrap_or("?").to_owned(),
                    s.span_text(t.object),
                )
            })
            .collect(),
    }
}

/// Writes JSON lines.
pub fn write_records(path: impl AsRef<Path>, records: &[RawRecord]) -> Result<()> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

pub fn write_dataset(
    path: impl AsRef<Path>,
    sentences: &[AnnotatedSentence],
    relations: &RelationSet,
) -> Result<()> {
    let records: Vec<RawRecord> = sentences
        .iter()
        .map(|a| to_raw_record(a, relations))
        .collect();
    write_records(path, &records)
}
