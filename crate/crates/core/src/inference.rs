//! End-to-end triple extraction.
//!
//! Relations above `lambda1` are tagged, the tag distributions are
//! argmax-decoded to BIO spans, and every (subject, object) pair of a
//! relation is kept when the correspondence score of their start tokens
//! exceeds `lambda2`. The correspondence matrix is computed once per
//! sentence and shared by all relations.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::bio::bio_decode;
use crate::decoder::{PredictionBundle, TagDistributions};
use crate::error::{Error, Result};
use crate::labeling::{build_gold, GoldLabels};
use crate::model::{RelationQuery, Scorer};
use crate::tensor::Matrix;
use crate::types::{AnnotatedSentence, EntitySpan, Sentence, Tag, TagSeq, Triple};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Thresholds {
    pub lambda1: f64,
    pub lambda2: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            lambda1: 0.5,
            lambda2: 0.5,
        }
    }
}

impl Thresholds {
    pub fn new(lambda1: f64, lambda2: f64) -> Self {
        Thresholds { lambda1, lambda2 }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("lambda1", self.lambda1), ("lambda2", self.lambda2)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::InvalidArgument(format!(
                    "{name} must lie in (0, 1), got {v}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Subject,
    Object,
}

/// Relations to tag at inference.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RelationStrategy {
    /// Relations above `lambda1`.
    #[default]
    Predicted,
    /// Every relation, skipping relation prediction.
    All,
}

/// How subjects and objects of one relation are paired.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Pairing {
    /// Keep pairs whose start-token correspondence exceeds `lambda2`.
    #[default]
    GlobalCorrespondence,
    /// Pair each subject with its closest object by token distance.
    NearestNeighbor,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct InferenceOptions {
    pub relations: RelationStrategy,
    pub pairing: Pairing,
}

/// Triples plus the intermediate decisions that produced them.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Extraction {
    pub triples: BTreeSet<Triple>,
    pub relations: BTreeSet<usize>,
    /// Entities decoded under any tagged relation, pooled by role.
    pub entities: BTreeSet<(EntitySpan, Role)>,
    /// Subject-object pairs of the kept triples.
    pub pairs: BTreeSet<(EntitySpan, EntitySpan)>,
    /// Tagged relations that decoded no subject or no object.
    pub empty_relations: usize,
}

/// Per-position argmax; ties go to O, then B, then I.
pub fn argmax_tags(dist: &Matrix) -> TagSeq {
    dist.iter_rows()
        .map(|p| {
            let (b, i, o) = (p[0], p[1], p[2]);
            if o >= b && o >= i {
                Tag::O
            } else if b >= i {
                Tag::B
            } else {
                Tag::I
            }
        })
        .collect()
}

fn decode_roles(dists: &TagDistributions) -> (Vec<EntitySpan>, Vec<EntitySpan>) {
    (
        bio_decode(&argmax_tags(&dists.subject)),
        bio_decode(&argmax_tags(&dists.object)),
    )
}

fn distance(a: &EntitySpan, b: &EntitySpan) -> usize {
    if a.overlaps(b) {
        0
    } else if a.end < b.start {
        b.start - a.end
    } else {
        a.start - b.end
    }
}

/// Decodes a bundle whose `tag_dists` already hold the relations to tag.
pub fn decode_bundle(bundle: &PredictionBundle, lambda2: f64, pairing: Pairing) -> Extraction {
    let mut out = Extraction {
        relations: bundle.tag_dists.keys().copied().collect(),
        ..Extraction::default()
    };
    for (&k, dists) in &bundle.tag_dists {
        let (subjects, objects) = decode_roles(dists);
        out.entities
            .extend(subjects.iter().map(|s| (*s, Role::Subject)));
        out.entities
            .extend(objects.iter().map(|o| (*o, Role::Object)));
        if subjects.is_empty() || objects.is_empty() {
            out.empty_relations += 1;
            continue;
        }
        for s in &subjects {
            match pairing {
                Pairing::GlobalCorrespondence => {
                    for o in &objects {
                        if bundle.corr[(s.start, o.start)] > lambda2 {
                            out.triples.insert(Triple::new(*s, k, *o));
                        }
                    }
                }
                Pairing::NearestNeighbor => {
                    // Ties go to the leftmost object.
                    let o = objects
                        .iter()
                        .min_by_key(|o| distance(s, o))
                        .expect("non-empty");
                    out.triples.insert(Triple::new(*s, k, *o));
                }
            }
        }
    }
    out.pairs = out.triples.iter().map(|t| (t.subject, t.object)).collect();
    out
}

pub fn extract_with(
    scorer: &impl Scorer,
    sentence: &Sentence,
    thresholds: Thresholds,
    options: InferenceOptions,
) -> Result<Extraction> {
    let query = match options.relations {
        RelationStrategy::Predicted => RelationQuery::Above(thresholds.lambda1),
        RelationStrategy::All => RelationQuery::All,
    };
    let bundle = scorer.bundle(sentence, query)?;
    Ok(decode_bundle(&bundle, thresholds.lambda2, options.pairing))
}

pub fn extract_detailed(
    scorer: &impl Scorer,
    sentence: &Sentence,
    thresholds: Thresholds,
) -> Result<Extraction> {
    extract_with(scorer, sentence, thresholds, InferenceOptions::default())
}

pub fn extract_triples(
    scorer: &impl Scorer,
    sentence: &Sentence,
    thresholds: Thresholds,
) -> Result<BTreeSet<Triple>> {
    Ok(extract_detailed(scorer, sentence, thresholds)?.triples)
}

/// Runs [`extract_with`] over a corpus, keeping each gold sentence and
/// replacing its triples with the predicted ones.
pub fn predict_corpus(
    scorer: &impl Scorer,
    sentences: &[AnnotatedSentence],
    thresholds: Thresholds,
    options: InferenceOptions,
) -> Result<Vec<AnnotatedSentence>> {
    sentences
        .iter()
        .map(|a| {
            Ok(AnnotatedSentence {
                sentence: a.sentence.clone(),
                triples: extract_with(scorer, &a.sentence, thresholds, options)?.triples,
            })
        })
        .collect()
}

/// Exhaustive reference decoder over raw probability tensors. Scores every
/// relation, filters by `lambda1` itself, finds spans by checking every
/// `(start, end)` window against the BIO definition and tests every pair.
pub fn extract_triples_bruteforce(
    scorer: &impl Scorer,
    sentence: &Sentence,
    thresholds: Thresholds,
) -> Result<BTreeSet<Triple>> {
    let bundle = scorer.bundle(sentence, RelationQuery::All)?;
    let n = sentence.len();

    fn label(row: &[f64]) -> u8 {
        // 0 = B, 1 = I, 2 = O
        let mut best = 2u8;
        let mut best_p = row[2];
        for (c, p) in [(0u8, row[0]), (1u8, row[1])] {
            if p > best_p {
                best = c;
                best_p = p;
            } else if p == best_p && best != 2 && c < best {
                best = c;
            }
        }
        best
    }

    fn windows(dist: &Matrix, n: usize) -> Vec<(usize, usize)> {
        let labels: Vec<u8> = (0..n).map(|t| label(dist.row(t))).collect();
        let mut found = Vec::new();
        for a in 0..n {
            for b in a..n {
                let opens = labels[a] == 0;
                let inside = (a + 1..=b).all(|t| labels[t] == 1);
                let closed = b + 1 == n || labels[b + 1] != 1;
                if opens && inside && closed {
                    found.push((a, b));
                }
            }
        }
        found
    }

    let mut triples = BTreeSet::new();
    for k in 0..scorer.n_relations() {
        if !(bundle.p_rel[k] > thresholds.lambda1) {
            continue;
        }
        let dists = &bundle.tag_dists[&k];
        let subjects = windows(&dists.subject, n);
        let objects = windows(&dists.object, n);
        for &(sa, sb) in &subjects {
            for &(oa, ob) in &objects {
                if bundle.corr.as_slice()[sa * n + oa] > thresholds.lambda2 {
                    triples.insert(Triple::new(
                        EntitySpan::new(sa, sb),
                        k,
                        EntitySpan::new(oa, ob),
                    ));
                }
            }
        }
    }
    Ok(triples)
}

/// Emits the gold labels of one sentence as hard 0/1 probabilities.
#[derive(Debug, Clone)]
pub struct GoldScorer {
    n_relations: usize,
    labels: BTreeMap<String, GoldLabels>,
}

impl GoldScorer {
    pub fn new(sentences: &[AnnotatedSentence], n_relations: usize) -> Result<Self> {
        let labels = sentences
            .iter()
            .map(|a| Ok((a.sentence.id.clone(), build_gold(a, n_relations)?)))
            .collect::<Result<_>>()?;
        Ok(GoldScorer {
            n_relations,
            labels,
        })
    }
}

fn one_hot(tags: &[Tag]) -> Matrix {
    let mut m = Matrix::zeros(tags.len(), 3);
    for (t, tag) in tags.iter().enumerate() {
        m[(t, tag.index())] = 1.0;
    }
    m
}

impl Scorer for GoldScorer {
    fn n_relations(&self) -> usize {
        self.n_relations
    }

    fn bundle(&self, sentence: &Sentence, query: RelationQuery) -> Result<PredictionBundle> {
        let gold = self.labels.get(&sentence.id).ok_or_else(|| {
            Error::InvalidArgument(format!("no gold labels for `{}`", sentence.id))
        })?;
        let n = sentence.len();
        let p_rel: Vec<f64> = gold
            .rel_vector
            .iter()
            .map(|&y| if y { 1.0 } else { 0.0 })
            .collect();
        let relations: Vec<usize> = match query {
            RelationQuery::Above(l1) => (0..self.n_relations).filter(|&k| p_rel[k] > l1).collect(),
            RelationQuery::All => (0..self.n_relations).collect(),
        };
        let outside = vec![Tag::O; n];
        let tag_dists = relations
            .into_iter()
            .map(|k| {
                let (sub, obj) = match gold.tag_targets.get(&k) {
                    Some(t) => (one_hot(&t.subject), one_hot(&t.object)),
                    None => (one_hot(&outside), one_hot(&outside)),
                };
                (
                    k,
                    TagDistributions {
                        subject: sub,
                        object: obj,
                        joint: None,
                    },
                )
            })
            .collect();
        let mut corr = Matrix::zeros(n, n);
        for (c, &y) in corr.as_mut_slice().iter_mut().zip(gold.corr_matrix.cells()) {
            *c = if y { 1.0 } else { 0.0 };
        }
        Ok(PredictionBundle {
            p_rel,
            tag_dists,
            corr,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sp(s: usize, e: usize) -> EntitySpan {
        EntitySpan::new(s, e)
    }

    fn annotated(id: &str, n: usize, triples: &[Triple]) -> AnnotatedSentence {
        let tokens = (0..n).map(|i| format!("w{i}")).collect();
        AnnotatedSentence::new(Sentence::new(id, tokens).unwrap(), triples.iter().copied()).unwrap()
    }

    #[test]
    fn argmax_tie_breaking() {
        let m = Matrix::from_rows(&[
            vec![0.4, 0.2, 0.4],
            vec![0.4, 0.4, 0.2],
            vec![0.2, 0.5, 0.3],
            vec![1.0 / 3.0; 3],
        ]);
        assert_eq!(argmax_tags(&m), vec![Tag::O, Tag::B, Tag::I, Tag::O]);
    }

    #[test]
    fn gold_round_trip_single_triple() {
        let t = Triple::new(sp(0, 1), 2, sp(3, 3));
        let a = annotated("s", 5, &[t]);
        let scorer = GoldScorer::new(std::slice::from_ref(&a), 4).unwrap();
        let got = extract_triples(&scorer, &a.sentence, Thresholds::default()).unwrap();
        assert_eq!(got, BTreeSet::from([t]));
    }

    #[test]
    fn interference_adds_spurious_triple() {
        let (s1, o1, s2, o2) = (sp(0, 0), sp(2, 2), sp(4, 4), sp(6, 6));
        let gold = [
            Triple::new(s1, 0, o1),
            Triple::new(s2, 0, o2),
            Triple::new(s1, 1, o2),
        ];
        let a = annotated("s", 7, &gold);
        let scorer = GoldScorer::new(std::slice::from_ref(&a), 2).unwrap();
        let got = extract_triples(&scorer, &a.sentence, Thresholds::default()).unwrap();
        let mut want: BTreeSet<_> = gold.into_iter().collect();
        want.insert(Triple::new(s1, 0, o2));
        assert_eq!(got, want);
        assert_eq!(
            extract_triples_bruteforce(&scorer, &a.sentence, Thresholds::default()).unwrap(),
            want
        );
    }

    #[test]
    fn nothing_selected_yields_nothing() {
        let a = annotated("s", 3, &[]);
        let scorer = GoldScorer::new(std::slice::from_ref(&a), 3).unwrap();
        let ex = extract_detailed(&scorer, &a.sentence, Thresholds::default()).unwrap();
        assert!(ex.triples.is_empty() && ex.relations.is_empty());
        assert!(
            extract_triples_bruteforce(&scorer, &a.sentence, Thresholds::default())
                .unwrap()
                .is_empty()
        );
    }

    #[test]
    fn nearest_neighbor_pairs_each_subject_once() {
        let (s, o1, o2) = (sp(0, 0), sp(2, 2), sp(4, 4));
        let a = annotated("s", 5, &[Triple::new(s, 0, o1), Triple::new(s, 0, o2)]);
        let scorer = GoldScorer::new(std::slice::from_ref(&a), 1).unwrap();
        let options = InferenceOptions {
            pairing: Pairing::NearestNeighbor,
            ..Default::default()
        };
        let ex = extract_with(&scorer, &a.sentence, Thresholds::default(), options).unwrap();
        assert_eq!(ex.triples, BTreeSet::from([Triple::new(s, 0, o1)]));
    }

    #[test]
    fn all_relations_strategy_tags_everything() {
        let a = annotated("s", 3, &[Triple::new(sp(0, 0), 0, sp(2, 2))]);
        let scorer = GoldScorer::new(std::slice::from_ref(&a), 3).unwrap();
        let options = InferenceOptions {
            relations: RelationStrategy::All,
            ..Default::default()
        };
        let ex = extract_with(&scorer, &a.sentence, Thresholds::default(), options).unwrap();
        assert_eq!(ex.relations.len(), 3);
        assert_eq!(ex.empty_relations, 2);
        assert_eq!(ex.triples.len(), 1);
    }

    #[test]
    fn thresholds_are_validated() {
        assert!(Thresholds::new(0.0, 0.5).validate().is_err());
        assert!(Thresholds::new(0.5, 1.0).validate().is_err());
        assert!(Thresholds::new(0.3, 0.7).validate().is_ok());
    }
}
