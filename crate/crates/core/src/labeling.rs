//! Supervision targets built from annotated sentences.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::IteratorRandom;
use rand::Rng;

use crate::bio::{bio_decode, bio_encode};
use crate::error::{Error, Result};
use crate::types::{AnnotatedSentence, Tag, TagSeq, Triple};

/// Square boolean matrix indexed `(subject start, object start)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMatrix {
    n: usize,
    cells: Vec<bool>,
}

impl BinaryMatrix {
    pub fn new(n: usize) -> Self {
        BinaryMatrix {
            n,
            cells: vec![false; n * n],
        }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        self.cells[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize) {
        self.cells[i * self.n + j] = true;
    }

    pub fn count_ones(&self) -> usize {
        self.cells.iter().filter(|&&c| c).count()
    }

    pub fn cells(&self) -> &[bool] {
        &self.cells
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoleTags {
    pub subject: TagSeq,
    pub object: TagSeq,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GoldLabels {
    pub rel_vector: Vec<bool>,
    /// Keyed by relation id. Gold relations always; sampled negatives may
    /// add all-`O` entries.
    pub tag_targets: BTreeMap<usize, RoleTags>,
    pub corr_matrix: BinaryMatrix,
}

impl GoldLabels {
    pub fn len(&self) -> usize {
        self.corr_matrix.size()
    }

    pub fn is_empty(&self) -> bool {
        self.corr_matrix.size() == 0
    }
}

pub fn build_gold(annotated: &AnnotatedSentence, n_relations: usize) -> Result<GoldLabels> {
    annotated.check_relations(n_relations)?;
    let n = annotated.sentence.len();
    let mut rel_vector = vec![false; n_relations];
    let mut corr_matrix = BinaryMatrix::new(n);
    let mut by_relation: BTreeMap<usize, (BTreeSet<_>, BTreeSet<_>)> = BTreeMap::new();
    for t in &annotated.triples {
        rel_vector[t.relation] = true;
        corr_matrix.set(t.subject.start, t.object.start);
        let entry = by_relation.entry(t.relation).or_default();
        entry.0.insert(t.subject);
        entry.1.insert(t.object);
    }
    let tag_targets = by_relation
        .into_iter()
        .map(|(k, (subjects, objects))| {
            Ok((
                k,
                RoleTags {
                    subject: bio_encode(subjects, n)?,
                    object: bio_encode(objects, n)?,
                },
            ))
        })
        .collect::<Result<_>>()?;
    Ok(GoldLabels {
        rel_vector,
        tag_targets,
        corr_matrix,
    })
}

/// Adds up to `count` absent relations with all-`O` tag targets.
pub fn add_negative_relations<R: Rng + ?Sized>(gold: &mut GoldLabels, count: usize, rng: &mut R) {
    if count == 0 {
        return;
    }
    let n = gold.len();
    let absent = (0..gold.rel_vector.len()).filter(|k| !gold.rel_vector[*k]);
    for k in absent.choose_multiple(rng, count) {
        gold.tag_targets.insert(
            k,
            RoleTags {
                subject: vec![Tag::O; n],
                object: vec![Tag::O; n],
            },
        );
    }
}

/// 5-class targets for the single-sequence tagger, indexed like
/// [`crate::decoder::SINGLE_TAGS`].
pub fn single_sequence_targets(id: &str, tags: &RoleTags) -> Result<Vec<usize>> {
    tags.subject
        .iter()
        .zip(&tags.object)
        .enumerate()
        .map(|(t, pair)| match pair {
            (Tag::O, Tag::O) => Ok(4),
            (Tag::B, Tag::O) => Ok(0),
            (Tag::I, Tag::O) => Ok(1),
            (Tag::O, Tag::B) => Ok(2),
            (Tag::O, Tag::I) => Ok(3),
            _ => Err(Error::SingleTaggingConflict {
                id: id.to_owned(),
                reason: format!("token {t} is both subject and object"),
            }),
        })
        .collect()
}

/// Triples that decoding the hard gold targets would add beyond the gold
/// set: pairs of one relation's subjects and objects that are not gold
/// under it but whose start cell is marked by another triple.
pub fn interference(annotated: &AnnotatedSentence, n_relations: usize) -> Result<Vec<Triple>> {
    let gold = build_gold(annotated, n_relations)?;
    let mut spurious = Vec::new();
    for (&k, tags) in &gold.tag_targets {
        let subjects = bio_decode(&tags.subject);
        let objects = bio_decode(&tags.object);
        for s in &subjects {
            for o in &objects {
                let t = Triple::new(*s, k, *o);
                if gold.corr_matrix.get(s.start, o.start) && !annotated.triples.contains(&t) {
                    spurious.push(t);
                }
            }
        }
    }
    Ok(spurious)
}

pub fn has_interference(annotated: &AnnotatedSentence, n_relations: usize) -> Result<bool> {
    Ok(!interference(annotated, n_relations)?.is_empty())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{EntitySpan, Sentence};
    use Tag::{B, I, O};

    fn annotated(n: usize, triples: &[Triple]) -> AnnotatedSentence {
        let tokens = (0..n).map(|i| format!("w{i}")).collect();
        AnnotatedSentence::new(Sentence::new("s", tokens).unwrap(), triples.iter().copied())
            .unwrap()
    }

    fn sp(s: usize, e: usize) -> EntitySpan {
        EntitySpan::new(s, e)
    }

    #[test]
    fn single_triple_example() {
        let a = annotated(5, &[Triple::new(sp(0, 1), 2, sp(3, 3))]);
        let g = build_gold(&a, 4).unwrap();
        assert_eq!(g.rel_vector, vec![false, false, true, false]);
        let tags = &g.tag_targets[&2];
        assert_eq!(tags.subject, vec![B, I, O, O, O]);
        assert_eq!(tags.object, vec![O, O, O, B, O]);
        assert_eq!(g.tag_targets.len(), 1);
        assert_eq!(g.corr_matrix.count_ones(), 1);
        assert!(g.corr_matrix.get(0, 3));
        assert_eq!(bio_decode(&tags.subject), vec![sp(0, 1)]);
    }

    #[test]
    fn empty_sentence_labels() {
        let g = build_gold(&annotated(3, &[]), 2).unwrap();
        assert_eq!(g.rel_vector, vec![false, false]);
        assert!(g.tag_targets.is_empty());
        assert_eq!(g.corr_matrix.count_ones(), 0);
    }

    #[test]
    fn entity_pair_overlap_shares_one_cell() {
        let (s, o) = (sp(0, 0), sp(2, 3));
        let a = annotated(4, &[Triple::new(s, 0, o), Triple::new(s, 1, o)]);
        let g = build_gold(&a, 2).unwrap();
        assert_eq!(g.tag_targets.len(), 2);
        assert_eq!(g.tag_targets[&0], g.tag_targets[&1]);
        assert_eq!(g.corr_matrix.count_ones(), 1);
    }

    #[test]
    fn nested_same_role_entities_are_rejected() {
        let a = annotated(
            5,
            &[
                Triple::new(sp(0, 2), 0, sp(4, 4)),
                Triple::new(sp(1, 1), 0, sp(4, 4)),
            ],
        );
        assert!(matches!(
            build_gold(&a, 1),
            Err(Error::OverlappingSpans(_, _))
        ));
    }

    #[test]
    fn subject_object_overlap_is_representable() {
        let a = annotated(4, &[Triple::new(sp(0, 2), 0, sp(0, 1))]);
        let g = build_gold(&a, 1).unwrap();
        assert_eq!(g.tag_targets[&0].subject, vec![B, I, I, O]);
        assert_eq!(g.tag_targets[&0].object, vec![B, I, O, O]);
        assert!(single_sequence_targets("s", &g.tag_targets[&0]).is_err());
    }

    #[test]
    fn single_targets_encode_roles() {
        let tags = RoleTags {
            subject: vec![B, I, O, O],
            object: vec![O, O, B, O],
        };
        assert_eq!(
            single_sequence_targets("s", &tags).unwrap(),
            vec![0, 1, 2, 4]
        );
    }

    #[test]
    fn interference_detector() {
        // (s1,r,o1), (s2,r,o2), (s1,r',o2): pair (s1,o2) is marked by r'.
        let (s1, o1, s2, o2) = (sp(0, 0), sp(2, 2), sp(4, 4), sp(6, 6));
        let a = annotated(
            7,
            &[
                Triple::new(s1, 0, o1),
                Triple::new(s2, 0, o2),
                Triple::new(s1, 1, o2),
            ],
        );
        assert_eq!(interference(&a, 2).unwrap(), vec![Triple::new(s1, 0, o2)]);
        let clean = annotated(7, &[Triple::new(s1, 0, o1), Triple::new(s1, 0, o2)]);
        assert!(!has_interference(&clean, 1).unwrap());
    }

    #[test]
    fn negatives_are_absent_relations() {
        use rand::SeedableRng;
        let a = annotated(3, &[Triple::new(sp(0, 0), 1, sp(2, 2))]);
        let mut g = build_gold(&a, 5).unwrap();
        add_negative_relations(&mut g, 2, &mut rand_chacha::ChaCha8Rng::seed_from_u64(0));
        assert_eq!(g.tag_targets.len(), 3);
        for (k, tags) in &g.tag_targets {
            if *k != 1 {
                assert!(!g.rel_vector[*k]);
                assert!(tags.subject.iter().chain(&tags.object).all(|t| *t == O));
            }
        }
    }
}
