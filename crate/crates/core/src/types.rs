//! Domain types shared across the pipeline.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A tokenized sentence. Token indices are 0-based and dense.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sentence {
    pub id: String,
    tokens: Vec<String>,
}

impl Sentence {
    pub fn new(id: impl Into<String>, tokens: Vec<String>) -> Result<Self> {
        if tokens.is_empty() {
            return Err(Error::EmptySentence);
        }
        Ok(Sentence {
            id: id.into(),
            tokens,
        })
    }

    /// Whitespace tokenization.
    pub fn from_text(id: impl Into<String>, text: &str) -> Result<Self> {
        Sentence::new(id, text.split_whitespace().map(str::to_owned).collect())
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    /// Always false; kept for API symmetry with `len`.
    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn text(&self) -> String {
        self.tokens.join(" ")
    }

    pub fn span_text(&self, span: EntitySpan) -> String {
        self.tokens[span.start..=span.end].join(" ")
    }

    pub fn check_len(&self, max_len: usize) -> Result<()> {
        if self.len() > max_len {
            return Err(Error::SentenceTooLong {
                len: self.len(),
                max_len,
            });
        }
        Ok(())
    }
}

/// Inclusive token span `[start, end]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct EntitySpan {
    pub start: usize,
    pub end: usize,
}

impl EntitySpan {
    /// Panics if `start > end`.
    pub fn new(start: usize, end: usize) -> Self {
        assert!(start <= end, "span start {start} after end {end}");
        EntitySpan { start, end }
    }

    pub fn single(index: usize) -> Self {
        EntitySpan {
            start: index,
            end: index,
        }
    }

    pub fn len(&self) -> usize {
        self.end - self.start + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn overlaps(&self, other: &EntitySpan) -> bool {
        self.start <= other.end && other.start <= self.end
    }

    pub fn fits(&self, n: usize) -> bool {
        self.start <= self.end && self.end < n
    }
}

/// Ordered relation vocabulary; ids are `0..len()`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct RelationSet {
    names: Vec<String>,
    index: HashMap<String, usize>,
}

impl RelationSet {
    pub fn new<I, S>(names: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut set = RelationSet::default();
        for name in names {
            let name = name.into();
            if set.index.contains_key(&name) {
                return Err(Error::DuplicateRelation(name));
            }
            set.push(name);
        }
        Ok(set)
    }

    /// Returns the id of `name`, appending it if new.
    pub fn intern(&mut self, name: &str) -> usize {
        match self.index.get(name) {
            Some(&id) => id,
            None => self.push(name.to_owned()),
        }
    }

    fn push(&mut self, name: String) -> usize {
        let id = self.names.len();
        self.index.insert(name.clone(), id);
        self.names.push(name);
        id
    }

    pub fn id(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn name(&self, id: usize) -> Option<&str> {
        self.names.get(id).map(String::as_str)
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }
}

impl Serialize for RelationSet {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.names.serialize(s)
    }
}

impl<'de> Deserialize<'de> for RelationSet {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let names = Vec::<String>::deserialize(d)?;
        RelationSet::new(names).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Triple {
    pub subject: EntitySpan,
    pub relation: usize,
    pub object: EntitySpan,
}

impl Triple {
    pub fn new(subject: EntitySpan, relation: usize, object: EntitySpan) -> Self {
        Triple {
            subject,
            relation,
            object,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Tag {
    B,
    I,
    O,
}

impl Tag {
    /// Column index in a 3-way tag distribution: B=0, I=1, O=2.
    pub fn index(self) -> usize {
        match self {
            Tag::B => 0,
            Tag::I => 1,
            Tag::O => 2,
        }
    }

    pub fn from_index(i: usize) -> Tag {
        match i {
            0 => Tag::B,
            1 => Tag::I,
            _ => Tag::O,
        }
    }
}

pub type TagSeq = Vec<Tag>;

/// A sentence paired with its (deduplicated) gold or predicted triples.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnnotatedSentence {
    pub sentence: Sentence,
    pub triples: BTreeSet<Triple>,
}

impl AnnotatedSentence {
    pub fn new(sentence: Sentence, triples: impl IntoIterator<Item = Triple>) -> Result<Self> {
        let n = sentence.len();
        let triples: BTreeSet<Triple> = triples.into_iter().collect();
        for t in &triples {
            for span in [t.subject, t.object] {
                if !span.fits(n) {
                    return Err(Error::SpanOutOfBounds { span, len: n });
                }
            }
        }
        Ok(AnnotatedSentence { sentence, triples })
    }

    pub fn check_relations(&self, n_relations: usize) -> Result<()> {
        match self.triples.iter().find(|t| t.relation >= n_relations) {
            Some(t) => Err(Error::UnknownRelation {
                id: t.relation,
                n_relations,
            }),
            None => Ok(()),
        }
    }
}

/// How the relation-specific tagger is laid out.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaggingMode {
    /// Separate subject and object BIO taggers.
    #[default]
    Dual,
    /// One 5-class tagger {B-sub, I-sub, B-obj, I-obj, O}.
    Single,
}

impl FromStr for TaggingMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dual" => Ok(TaggingMode::Dual),
            "single" => Ok(TaggingMode::Single),
            other => Err(Error::InvalidArgument(format!(
                "tagging mode `{other}` (expected dual|single)"
            ))),
        }
    }
}

impl fmt::Display for TaggingMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TaggingMode::Dual => "dual",
            TaggingMode::Single => "single",
        })
    }
}

/// Entity annotation protocol of a corpus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnnotationMode {
    /// Only the last word of each entity is annotated.
    LastWord,
    #[default]
    FullSpan,
}

impl FromStr for AnnotationMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "last_word" => Ok(AnnotationMode::LastWord),
            "full_span" => Ok(AnnotationMode::FullSpan),
            other => Err(Error::InvalidArgument(format!(
                "annotation mode `{other}` (expected last_word|full_span)"
            ))),
        }
    }
}

impl fmt::Display for AnnotationMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AnnotationMode::LastWord => "last_word",
            AnnotationMode::FullSpan => "full_span",
        })
    }
}
