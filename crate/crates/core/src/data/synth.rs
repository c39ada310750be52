//! Templated synthetic corpora with controlled overlap patterns.
//!
//! Every sentence realizes one pattern so that, within a sentence, all
//! relations share one subject set and one object set:
//!
//! - Normal: `S cue O`
//! - SEO: `S cue O1 and O2` or `S1 and S2 cue O` (one relation, a star)
//! - EPO: `S cue1 and cue2 O` (one entity pair, several relations)
//! - SOO: `X Suffix cue [O]` with gold `(X Suffix, r, X)`
//!
//! Filler words pad the sentence on both sides. Words never repeat across
//! entities of one sentence, so every entity string resolves back to its
//! span by first occurrence.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::load::{
    relations_sidecar, to_raw_record, write_dataset, write_relation_vocab, RawRecord,
};
use super::pattern::PatternLabel;
use crate::error::{Error, Result};
use crate::types::{AnnotatedSentence, EntitySpan, RelationSet, Sentence, TaggingMode, Triple};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PatternCounts {
    pub normal: usize,
    pub seo: usize,
    pub epo: usize,
    pub soo: usize,
}

impl Default for PatternCounts {
    fn default() -> Self {
        PatternCounts {
            normal: 90,
            seo: 70,
            epo: 50,
            soo: 40,
        }
    }
}

impl PatternCounts {
    pub fn total(&self) -> usize {
        self.normal + self.seo + self.epo + self.soo
    }

    pub fn get(&self, label: PatternLabel) -> usize {
        match label {
            PatternLabel::Normal => self.normal,
            PatternLabel::Seo => self.seo,
            PatternLabel::Epo => self.epo,
            PatternLabel::Soo => self.soo,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    /// Drives sentence sampling.
    pub seed: u64,
    /// Drives the word inventories; corpora sharing it share a vocabulary.
    pub vocab_seed: u64,
    pub n_relations: usize,
    pub entity_words: usize,
    pub filler_words: usize,
    pub suffix_words: usize,
    pub counts: PatternCounts,
    /// Inclusive token-length range; sentences whose template is longer
    /// than the drawn length are not padded.
    pub length: (usize, usize),
    /// Inclusive triples-per-sentence range for SEO and EPO sentences.
    /// Normal sentences always carry one triple.
    pub triples: (usize, usize),
    pub max_entity_len: usize,
    /// Chance that an SOO sentence also carries a second, disjoint object.
    pub soo_extra_object: f64,
    pub tagging: TaggingMode,
    pub max_len: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            seed: 0,
            vocab_seed: 0,
            n_relations: 6,
            entity_words: 5000,
            filler_words: 2000,
            suffix_words: 4,
            counts: PatternCounts::default(),
            length: (6, 16),
            triples: (1, 3),
            max_entity_len: 2,
            soo_extra_object: 0.3,
            tagging: TaggingMode::Dual,
            max_len: 100,
        }
    }
}

impl SynthConfig {
    fn infeasible(msg: impl Into<String>) -> Error {
        Error::InfeasibleConfig(msg.into())
    }

    /// Longest template any requested pattern can produce.
    pub fn longest_template(&self) -> usize {
        let e = self.max_entity_len;
        let k = self.triples.1.max(2);
        let mut longest = 0;
        if self.counts.normal > 0 {
            longest = longest.max(2 * e + 1);
        }
        if self.counts.seo > 0 {
            // k entities on the star side, k-1 joiners, one hub, one cue.
            longest = longest.max((k + 1) * e + k);
        }
        if self.counts.epo > 0 {
            let k = k.min(self.n_relations);
            longest = longest.max(2 * e + 2 * k - 1);
        }
        if self.counts.soo > 0 {
            let extra = if self.soo_extra_object > 0.0 && self.triples.1 >= 2 {
                e
            } else {
                0
            };
            longest = longest.max(e + 2 + extra);
        }
        longest
    }

    pub fn validate(&self) -> Result<()> {
        let c = &self.counts;
        if self.n_relations == 0 {
            return Err(Self::infeasible("n_relations must be positive"));
        }
        if self.max_entity_len == 0 {
            return Err(Self::infeasible("max_entity_len must be positive"));
        }
        if self.filler_words == 0 {
            return Err(Self::infeasible("filler_words must be positive"));
        }
        let (tmin, tmax) = self.triples;
        if tmin == 0 || tmin > tmax {
            return Err(Self::infeasible(format!("triples range {tmin}..={tmax}")));
        }
        if c.normal > 0 && tmin > 1 {
            return Err(Self::infeasible(
                "Normal sentences carry one triple; lower triples.min",
            ));
        }
        if (c.seo > 0 || c.epo > 0) && tmax < 2 {
            return Err(Self::infeasible("SEO and EPO need triples.max >= 2"));
        }
        if c.epo > 0 && self.n_relations < 2 {
            return Err(Self::infeasible("EPO needs at least two relations"));
        }
        if c.soo > 0 {
            if self.tagging == TaggingMode::Single {
                return Err(Self::infeasible(
                    "SOO puts one token in both roles, which single-sequence tagging cannot label",
                ));
            }
            if self.suffix_words == 0 {
                return Err(Self::infeasible("SOO needs suffix_words > 0"));
            }
        }
        if !(0.0..=1.0).contains(&self.soo_extra_object) {
            return Err(Self::infeasible("soo_extra_object must lie in [0, 1]"));
        }
        let (lmin, lmax) = self.length;
        if lmin == 0 || lmin > lmax {
            return Err(Self::infeasible(format!("length range {lmin}..={lmax}")));
        }
        if lmax > self.max_len {
            return Err(Self::infeasible(format!(
                "length.max {lmax} exceeds max_len {}",
                self.max_len
            )));
        }
        let longest = self.longest_template();
        if longest > lmax {
            return Err(Self::infeasible(format!(
                "templates need up to {longest} tokens but length.max is {lmax}"
            )));
        }
        // Entities of one sentence use disjoint words.
        let need = (tmax + 1) * self.max_entity_len;
        if self.entity_words < need {
            return Err(Self::infeasible(format!(
                "entity_words must be at least {need}"
            )));
        }
        // Words are drawn without replacement; stay well inside each inventory.
        let short = (ONSETS.len() * VOWELS.len()).pow(2) / 2;
        let long = (ONSETS.len() * VOWELS.len()).pow(3) / 2;
        if self.suffix_words + self.n_relations + self.filler_words > short {
            return Err(Self::infeasible(format!(
                "suffix_words + n_relations + filler_words must not exceed {short}"
            )));
        }
        if self.entity_words > long {
            return Err(Self::infeasible(format!(
                "entity_words must not exceed {long}"
            )));
        }
        Ok(())
    }
}

/// Intended gold of one generated sentence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub pattern: PatternLabel,
    pub triples: Vec<(String, String, String)>,
}

#[derive(Debug, Clone)]
pub struct SyntheticCorpus {
    pub sentences: Vec<AnnotatedSentence>,
    pub relations: RelationSet,
    pub manifest: Vec<ManifestEntry>,
}

impl SyntheticCorpus {
    pub fn requested(&self) -> BTreeMap<String, PatternLabel> {
        self.manifest
            .iter()
            .map(|m| (m.id.clone(), m.pattern))
            .collect()
    }

    pub fn records(&self) -> Vec<RawRecord> {
        self.sentences
            .iter()
            .map(|a| to_raw_record(a, &self.relations))
            .collect()
    }
}

struct Lexicon {
    entities: Vec<String>,
    fillers: Vec<String>,
    suffixes: Vec<String>,
    cues: Vec<String>,
}

const ONSETS: &[&str] = &[
    "b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z", "br", "dr", "kl", "st",
];
const VOWELS: &[&str] = &["a", "e", "i", "o", "u"];

fn pseudo_word(rng: &mut ChaCha8Rng, syllables: usize) -> String {
    (0..syllables)
        .map(|_| {
            let onset = ONSETS[rng.random_range(0..ONSETS.len())];
            let vowel = VOWELS[rng.random_range(0..VOWELS.len())];
            format!("{onset}{vowel}")
        })
        .collect()
}

fn capitalize(w: &str) -> String {
    let mut c = w.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}

impl Lexicon {
    fn new(config: &SynthConfig) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(config.vocab_seed);
        let mut seen: HashSet<String> = HashSet::new();
        let mut draw = |rng: &mut ChaCha8Rng, count: usize, syllables: usize, cap: bool| {
            let mut out = Vec::with_capacity(count);
            while out.len() < count {
                let w = pseudo_word(rng, syllables);
                let w = if cap { capitalize(&w) } else { w };
                if seen.insert(w.to_lowercase()) {
                    out.push(w);
                }
            }
            out
        };
        Lexicon {
            entities: draw(&mut rng, config.entity_words, 3, true),
            suffixes: draw(&mut rng, config.suffix_words, 2, true),
            cues: draw(&mut rng, config.n_relations, 2, false)
                .into_iter()
                .map(|w| w + "s")
                .collect(),
            fillers: draw(&mut rng, config.filler_words, 2, false),
        }
    }
}

/// A sentence under construction: tokens plus spans of the entities added.
#[derive(Default)]
struct Builder {
    tokens: Vec<String>,
}

impl Builder {
    fn push(&mut self, words: &[String]) -> EntitySpan {
        let start = self.tokens.len();
        self.tokens.extend_from_slice(words);
        EntitySpan::new(start, self.tokens.len() - 1)
    }

    fn word(&mut self, w: &str) {
        self.tokens.push(w.to_owned());
    }

    /// Appends `items` joined by `,` and a final `and`.
    fn list(&mut self, items: &[Vec<String>]) -> Vec<EntitySpan> {
        let mut spans = Vec::with_capacity(items.len());
        for (i, item) in items.iter().enumerate() {
            if i > 0 {
                self.word(if i + 1 == items.len() { "and" } else { "," });
            }
            spans.push(self.push(item));
        }
        spans
    }
}

struct Sampler<'a> {
    config: &'a SynthConfig,
    lex: &'a Lexicon,
    rng: ChaCha8Rng,
}

impl Sampler<'_> {
    /// `count` entities with pairwise-disjoint words.
    fn entities(&mut self, count: usize) -> Vec<Vec<String>> {
        let lens: Vec<usize> = (0..count)
            .map(|_| self.rng.random_range(1..=self.config.max_entity_len))
            .collect();
        let total: usize = lens.iter().sum();
        let mut pool: Vec<&String> = self
            .lex
            .entities
            .choose_multiple(&mut self.rng, total)
            .collect();
        lens.iter()
            .map(|&l| pool.drain(..l).cloned().collect())
            .collect()
    }

    fn star_size(&mut self, cap: usize) -> usize {
        let (tmin, tmax) = self.config.triples;
        self.rng.random_range(tmin.max(2)..=tmax.min(cap))
    }

    fn relations(&mut self, count: usize) -> Vec<usize> {
        let mut ids: Vec<usize> = (0..self.config.n_relations).collect();
        ids.shuffle(&mut self.rng);
        ids.truncate(count);
        ids
    }

    fn body(&mut self, pattern: PatternLabel) -> (Builder, Vec<Triple>) {
        let mut b = Builder::default();
        let mut triples = Vec::new();
        match pattern {
            PatternLabel::Normal => {
                let e = self.entities(2);
                let r = self.relations(1)[0];
                let s = b.push(&e[0]);
                b.word(&self.lex.cues[r]);
                let o = b.push(&e[1]);
                triples.push(Triple::new(s, r, o));
            }
            PatternLabel::Seo => {
                let k = self.star_size(usize::MAX);
                let e = self.entities(k + 1);
                let r = self.relations(1)[0];
                if self.rng.random_bool(0.5) {
                    let s = b.push(&e[0]);
                    b.word(&self.lex.cues[r]);
                    for o in b.list(&e[1..]) {
                        triples.push(Triple::new(s, r, o));
                    }
                } else {
                    let subjects = b.list(&e[1..]);
                    b.word(&self.lex.cues[r]);
                    let o = b.push(&e[0]);
                    for s in subjects {
                        triples.push(Triple::new(s, r, o));
                    }
                }
            }
            PatternLabel::Epo => {
                let k = self.star_size(self.config.n_relations);
                let e = self.entities(2);
                let rels = self.relations(k);
                let s = b.push(&e[0]);
                let cues: Vec<Vec<String>> = rels
                    .iter()
                    .map(|&r| vec![self.lex.cues[r].clone()])
                    .collect();
                b.list(&cues);
                let o = b.push(&e[1]);
                for &r in &rels {
                    triples.push(Triple::new(s, r, o));
                }
            }
            PatternLabel::Soo => {
                let extra = self.config.triples.1 >= 2
                    && self.rng.random_bool(self.config.soo_extra_object);
                let e = self.entities(if extra { 2 } else { 1 });
                let r = self.relations(1)[0];
                let suffix = &self.lex.suffixes[self.rng.random_range(0..self.lex.suffixes.len())];
                let inner = b.push(&e[0]);
                b.word(suffix);
                let outer = EntitySpan::new(inner.start, inner.end + 1);
                b.word(&self.lex.cues[r]);
                triples.push(Triple::new(outer, r, inner));
                if extra {
                    let o = b.push(&e[1]);
                    triples.push(Triple::new(outer, r, o));
                }
            }
        }
        (b, triples)
    }

    fn sentence(&mut self, id: String, pattern: PatternLabel) -> Result<AnnotatedSentence> {
        let (body, triples) = self.body(pattern);
        let (lmin, lmax) = self.config.length;
        let target = self.rng.random_range(lmin..=lmax);
        let pad = target.saturating_sub(body.tokens.len());
        let before = self.rng.random_range(0..=pad);
        let filler = |n: usize, rng: &mut ChaCha8Rng| -> Vec<String> {
            (0..n)
                .map(|_| self.lex.fillers[rng.random_range(0..self.lex.fillers.len())].clone())
                .collect()
        };
        let mut tokens = filler(before, &mut self.rng);
        tokens.extend(body.tokens);
        tokens.extend(filler(pad - before, &mut self.rng));
        let shift = |s: EntitySpan| EntitySpan::new(s.start + before, s.end + before);
        let triples = triples
            .into_iter()
            .map(|t| Triple::new(shift(t.subject), t.relation, shift(t.object)));
        AnnotatedSentence::new(Sentence::new(id, tokens)?, triples)
    }
}

/// Train and validation corpora of the desk learning benchmark: 200 / 50
/// sentences over a shared vocabulary, a quarter or more of them SOO.
pub fn benchmark_corpora(seed: u64) -> Result<(SyntheticCorpus, SyntheticCorpus)> {
    let base = SynthConfig {
        vocab_seed: seed,
        ..SynthConfig::default()
    };
    let train = gen_synthetic(&SynthConfig {
        seed: 100 + seed,
        counts: PatternCounts {
            normal: 60,
            seo: 50,
            epo: 40,
            soo: 50,
        },
        ..base.clone()
    })?;
    let valid = gen_synthetic(&SynthConfig {
        seed: 200 + seed,
        counts: PatternCounts {
            normal: 14,
            seo: 12,
            epo: 10,
            soo: 14,
        },
        ..base
    })?;
    Ok((train, valid))
}

/// Generates the corpus described by `config`; deterministic in
/// `(seed, vocab_seed)`. Sentence order is shuffled.
pub fn gen_synthetic(config: &SynthConfig) -> Result<SyntheticCorpus> {
    config.validate()?;
    let lex = Lexicon::new(config);
    let relations = RelationSet::new((0..config.n_relations).map(|k| format!("rel{k}")))?;
    let mut sampler = Sampler {
        config,
        lex: &lex,
        rng: ChaCha8Rng::seed_from_u64(config.seed),
    };

    let mut plan: Vec<PatternLabel> = PatternLabel::ALL
        .iter()
        .flat_map(|&p| std::iter::repeat_n(p, config.counts.get(p)))
        .collect();
    plan.shuffle(&mut sampler.rng);

    let mut sentences = Vec::with_capacity(plan.len());
    let mut manifest = Vec::with_capacity(plan.len());
    for (i, pattern) in plan.into_iter().enumerate() {
        let id = format!("syn-{}-{i}", config.seed);
        let a = sampler.sentence(id.clone(), pattern)?;
        let triples = to_raw_record(&a, &relations).triple_list;
        manifest.push(ManifestEntry {
            id,
            pattern,
            triples,
        });
        sentences.push(a);
    }
    Ok(SyntheticCorpus {
        sentences,
        relations,
        manifest,
    })
}

pub fn manifest_path(path: &Path) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(".manifest");
    PathBuf::from(name)
}

/// Writes the corpus as JSON lines, with the relation vocabulary and the
/// manifest (JSON lines) as sidecars.
pub fn write_synthetic(path: impl AsRef<Path>, corpus: &SyntheticCorpus) -> Result<()> {
    let path = path.as_ref();
    write_dataset(path, &corpus.sentences, &corpus.relations)?;
    write_relation_vocab(relations_sidecar(path), &corpus.relations)?;
    let mut text = String::new();
    for m in &corpus.manifest {
        text.push_str(&serde_json::to_string(m)?);
        text.push('\n');
    }
    let mpath = manifest_path(path);
    fs::write(&mpath, text).map_err(|e| Error::io(&mpath, e))
}
