//! Micro-averaged scoring, subtask metrics and breakdowns.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::data::{classify_with, PatternLabel, PatternRules};
use crate::error::{Error, Result};
use crate::inference::{Extraction, Role};
use crate::types::{AnnotatedSentence, AnnotationMode, EntitySpan, Sentence, TaggingMode};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ScoreReport {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

impl ScoreReport {
    pub fn from_counts(tp: usize, fp: usize, fn_: usize) -> Self {
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        ScoreReport {
            precision,
            recall,
            f1,
            tp,
            fp,
            fn_,
        }
    }

    /// Pools the counts of two reports.
    pub fn merge(&self, other: &ScoreReport) -> Self {
        ScoreReport::from_counts(self.tp + other.tp, self.fp + other.fp, self.fn_ + other.fn_)
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Counts {
    tp: usize,
    fp: usize,
    fn_: usize,
}

impl Counts {
    fn add_sets<T: Ord>(&mut self, pred: &BTreeSet<T>, gold: &BTreeSet<T>) {
        let tp = pred.intersection(gold).count();
        self.tp += tp;
        self.fp += pred.len() - tp;
        self.fn_ += gold.len() - tp;
    }

    fn report(&self) -> ScoreReport {
        ScoreReport::from_counts(self.tp, self.fp, self.fn_)
    }
}

type TripleKey = (String, usize, String);

fn entity_key(sentence: &Sentence, span: EntitySpan, mode: AnnotationMode) -> String {
    match mode {
        AnnotationMode::FullSpan => sentence.span_text(span),
        AnnotationMode::LastWord => sentence.tokens()[span.end].clone(),
    }
}

/// Triples as string-keyed matches: relation ids must agree and both
/// entities must agree as text (full span, or last token only).
pub fn triple_keys(annotated: &AnnotatedSentence, mode: AnnotationMode) -> BTreeSet<TripleKey> {
    let s = &annotated.sentence;
    annotated
        .triples
        .iter()
        .map(|t| {
            (
                entity_key(s, t.subject, mode),
                t.relation,
                entity_key(s, t.object, mode),
            )
        })
        .collect()
}

fn check_aligned<'a>(
    pred_ids: impl ExactSizeIterator<Item = &'a str>,
    gold: &[AnnotatedSentence],
) -> Result<()> {
    if pred_ids.len() != gold.len() {
        return Err(Error::LengthMismatch {
            expected: gold.len(),
            actual: pred_ids.len(),
        });
    }
    for (p, g) in pred_ids.zip(gold) {
        if p != g.sentence.id {
            return Err(Error::IdMismatch {
                pred: p.to_owned(),
                gold: g.sentence.id.clone(),
            });
        }
    }
    Ok(())
}

/// Micro precision, recall and F1 over exact triple matches. `pred` and
/// `gold` are aligned by position and must carry the same ids.
pub fn score_triples(
    pred: &[AnnotatedSentence],
    gold: &[AnnotatedSentence],
    mode: AnnotationMode,
) -> Result<ScoreReport> {
    check_aligned(pred.iter().map(|p| p.sentence.id.as_str()), gold)?;
    let mut counts = Counts::default();
    for (p, g) in pred.iter().zip(gold) {
        counts.add_sets(&triple_keys(p, mode), &triple_keys(g, mode));
    }
    Ok(counts.report())
}

/// Decisions taken before the final triples.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Intermediates {
    pub relations: BTreeSet<usize>,
    pub entities: BTreeSet<(EntitySpan, Role)>,
    pub pairs: BTreeSet<(EntitySpan, EntitySpan)>,
}

impl From<&Extraction> for Intermediates {
    fn from(e: &Extraction) -> Self {
        Intermediates {
            relations: e.relations.clone(),
            entities: e.entities.clone(),
            pairs: e.pairs.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub annotated: AnnotatedSentence,
    pub intermediates: Option<Intermediates>,
}

impl Prediction {
    pub fn from_extraction(sentence: Sentence, extraction: &Extraction) -> Self {
        Prediction {
            annotated: AnnotatedSentence {
                sentence,
                triples: extraction.triples.clone(),
            },
            intermediates: Some(extraction.into()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SubtaskReports {
    /// Predicted relation subsets vs. gold relation sets.
    pub relation: ScoreReport,
    /// `(span, role)` over all tagged relations.
    pub entity: ScoreReport,
    /// Subject-object pairs, regardless of relation.
    pub pair: ScoreReport,
}

pub fn gold_intermediates(gold: &AnnotatedSentence) -> Intermediates {
    let mut out = Intermediates::default();
    for t in &gold.triples {
        out.relations.insert(t.relation);
        out.entities.insert((t.subject, Role::Subject));
        out.entities.insert((t.object, Role::Object));
        out.pairs.insert((t.subject, t.object));
    }
    out
}

pub fn score_subtasks(pred: &[Prediction], gold: &[AnnotatedSentence]) -> Result<SubtaskReports> {
    check_aligned(pred.iter().map(|p| p.annotated.sentence.id.as_str()), gold)?;
    let (mut rel, mut ent, mut pair) = (Counts::default(), Counts::default(), Counts::default());
    for (p, g) in pred.iter().zip(gold) {
        let inter = p
            .intermediates
            .as_ref()
            .ok_or_else(|| Error::MissingIntermediates(p.annotated.sentence.id.clone()))?;
        let g = gold_intermediates(g);
        rel.add_sets(&inter.relations, &g.relations);
        ent.add_sets(&inter.entities, &g.entities);
        pair.add_sets(&inter.pairs, &g.pairs);
    }
    Ok(SubtaskReports {
        relation: rel.report(),
        entity: ent.report(),
        pair: pair.report(),
    })
}

/// Buckets of gold triple counts: 1, 2, 3, 4 and 5 or more.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum CountBucket {
    #[serde(rename = "N=1")]
    One,
    #[serde(rename = "N=2")]
    Two,
    #[serde(rename = "N=3")]
    Three,
    #[serde(rename = "N=4")]
    Four,
    #[serde(rename = "N>=5")]
    FivePlus,
}

impl CountBucket {
    pub const ALL: [CountBucket; 5] = [
        CountBucket::One,
        CountBucket::Two,
        CountBucket::Three,
        CountBucket::Four,
        CountBucket::FivePlus,
    ];

    pub fn of(n: usize) -> Option<CountBucket> {
        match n {
            0 => None,
            1 => Some(CountBucket::One),
            2 => Some(CountBucket::Two),
            3 => Some(CountBucket::Three),
            4 => Some(CountBucket::Four),
            _ => Some(CountBucket::FivePlus),
        }
    }
}

impl fmt::Display for CountBucket {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CountBucket::One => "N=1",
            CountBucket::Two => "N=2",
            CountBucket::Three => "N=3",
            CountBucket::Four => "N=4",
            CountBucket::FivePlus => "N>=5",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Breakdown {
    pub patterns: BTreeMap<PatternLabel, ScoreReport>,
    pub counts: BTreeMap<CountBucket, ScoreReport>,
}

/// Scores grouped by the gold sentence's overlap patterns (a sentence
/// counts in every pattern it carries) and by its gold triple count.
pub fn breakdown(
    pred: &[AnnotatedSentence],
    gold: &[AnnotatedSentence],
    mode: AnnotationMode,
    rules: PatternRules,
) -> Result<Breakdown> {
    check_aligned(pred.iter().map(|p| p.sentence.id.as_str()), gold)?;
    let mut patterns: BTreeMap<PatternLabel, Counts> = PatternLabel::ALL
        .iter()
        .map(|&p| (p, Counts::default()))
        .collect();
    let mut counts: BTreeMap<CountBucket, Counts> = CountBucket::ALL
        .iter()
        .map(|&b| (b, Counts::default()))
        .collect();
    for (p, g) in pred.iter().zip(gold) {
        let (pk, gk) = (triple_keys(p, mode), triple_keys(g, mode));
        for label in classify_with(g, rules) {
            patterns
                .get_mut(&label)
                .expect("all labels present")
                .add_sets(&pk, &gk);
        }
        if let Some(bucket) = CountBucket::of(g.triples.len()) {
            counts
                .get_mut(&bucket)
                .expect("all buckets present")
                .add_sets(&pk, &gk);
        }
    }
    Ok(Breakdown {
        patterns: patterns.into_iter().map(|(k, c)| (k, c.report())).collect(),
        counts: counts.into_iter().map(|(k, c)| (k, c.report())).collect(),
    })
}

/// Decoder parameters: relation classifier, relation embeddings, taggers
/// and the correspondence scorer.
pub fn decoder_param_count(d: usize, n_relations: usize, mode: TaggingMode) -> usize {
    let taggers = match mode {
        TaggingMode::Dual => 2 * (3 * d + 3),
        TaggingMode::Single => 5 * d + 5,
    };
    (d * n_relations + n_relations) + d * n_relations + taggers + (2 * d + 1)
}

/// Aligned text table of named reports.
pub fn report_table<'a>(rows: impl IntoIterator<Item = (String, &'a ScoreReport)>) -> String {
    let rows: Vec<(String, &ScoreReport)> = rows.into_iter().collect();
    let w = rows.iter().map(|(n, _)| n.len()).max().unwrap_or(0).max(4);
    let mut out = format!(
        "{:<w$}  {:>6}  {:>6}  {:>6}  {:>6}  {:>6}  {:>6}\n",
        "", "Prec", "Rec", "F1", "TP", "FP", "FN"
    );
    for (name, r) in rows {
        out.push_str(&format!(
            "{name:<w$}  {:>6.4}  {:>6.4}  {:>6.4}  {:>6}  {:>6}  {:>6}\n",
            r.precision, r.recall, r.f1, r.tp, r.fp, r.fn_
        ));
    }
    out
}

impl fmt::Display for ScoreReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "P={:.4} R={:.4} F1={:.4} (tp={}, fp={}, fn={})",
            self.precision, self.recall, self.f1, self.tp, self.fp, self.fn_
        )
    }
}

impl fmt::Display for Breakdown {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rows = self
            .patterns
            .iter()
            .map(|(k, r)| (k.to_string(), r))
            .chain(self.counts.iter().map(|(k, r)| (k.to_string(), r)));
        f.write_str(&report_table(rows))
    }
}
