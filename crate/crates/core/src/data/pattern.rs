//! Overlapping-triple patterns: Normal, Single Entity Overlap (SEO),
//! Entity Pair Overlap (EPO) and Subject Object Overlap (SOO).
//!
//! Entities are identified by token span, so the same string at two
//! positions counts as two entities.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::types::{AnnotatedSentence, EntitySpan, Triple};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum PatternLabel {
    Normal,
    #[serde(rename = "SEO")]
    Seo,
    #[serde(rename = "EPO")]
    Epo,
    #[serde(rename = "SOO")]
    Soo,
}

impl PatternLabel {
    pub const ALL: [PatternLabel; 4] = [
        PatternLabel::Normal,
        PatternLabel::Seo,
        PatternLabel::Epo,
        PatternLabel::Soo,
    ];
}

impl fmt::Display for PatternLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PatternLabel::Normal => "Normal",
            PatternLabel::Seo => "SEO",
            PatternLabel::Epo => "EPO",
            PatternLabel::Soo => "SOO",
        })
    }
}

/// Switches for the two readings the pattern definitions leave open.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct PatternRules {
    /// Count a triple pair as SEO when it shares at least one entity
    /// (so EPO pairs are also SEO). Default: exactly one.
    pub seo_at_least_one: bool,
    /// Also flag SOO when an entity that is a subject somewhere overlaps,
    /// without being equal to, an entity that is an object somewhere.
    pub soo_across_triples: bool,
}

fn entities(t: &Triple) -> BTreeSet<EntitySpan> {
    BTreeSet::from([t.subject, t.object])
}

pub fn classify_pattern(annotated: &AnnotatedSentence) -> BTreeSet<PatternLabel> {
    classify_with(annotated, PatternRules::default())
}

pub fn classify_with(annotated: &AnnotatedSentence, rules: PatternRules) -> BTreeSet<PatternLabel> {
    let triples: Vec<&Triple> = annotated.triples.iter().collect();
    let mut labels = BTreeSet::new();
    for (i, a) in triples.iter().enumerate() {
        if a.subject.overlaps(&a.object) {
            labels.insert(PatternLabel::Soo);
        }
        let ea = entities(a);
        for b in &triples[i + 1..] {
            let eb = entities(b);
            let shared = ea.intersection(&eb).count();
            if ea == eb {
                labels.insert(PatternLabel::Epo);
            }
            let seo = if rules.seo_at_least_one {
                shared >= 1
            } else {
                shared == 1 && ea != eb
            };
            if seo {
                labels.insert(PatternLabel::Seo);
            }
        }
    }
    if rules.soo_across_triples {
        for a in &triples {
            for b in &triples {
                if a.subject != b.object && a.subject.overlaps(&b.object) {
                    labels.insert(PatternLabel::Soo);
                }
            }
        }
    }
    if labels.is_empty() {
        labels.insert(PatternLabel::Normal);
    }
    labels
}
