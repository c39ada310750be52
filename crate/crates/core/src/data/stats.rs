use std::fmt;

use serde::{Deserialize, Serialize};

use super::pattern::{classify_with, PatternLabel, PatternRules};
use crate::types::{AnnotatedSentence, RelationSet};

/// Corpus statistics: sentences per overlap pattern (patterns co-occur),
/// sentences with one vs. several triples, triple and relation counts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatsReport {
    pub sentences: usize,
    pub normal: usize,
    pub seo: usize,
    pub epo: usize,
    pub soo: usize,
    pub n_eq_1: usize,
    pub n_gt_1: usize,
    pub triples: usize,
    pub relations: usize,
}

pub fn dataset_stats(sentences: &[AnnotatedSentence], relations: &RelationSet) -> StatsReport {
    dataset_stats_with(sentences, relations, PatternRules::default())
}

pub fn dataset_stats_with(
    sentences: &[AnnotatedSentence],
    relations: &RelationSet,
    rules: PatternRules,
) -> StatsReport {
    let mut report = StatsReport {
        relations: relations.len(),
        ..StatsReport::default()
    };
    for a in sentences {
        report.sentences += 1;
        report.triples += a.triples.len();
        match a.triples.len() {
            0 => {}
            1 => report.n_eq_1 += 1,
            _ => report.n_gt_1 += 1,
        }
        for label in classify_with(a, rules) {
            match label {
                PatternLabel::Normal => report.normal += 1,
                PatternLabel::Seo => report.seo += 1,
                PatternLabel::Epo => report.epo += 1,
                PatternLabel::Soo => report.soo += 1,
            }
        }
    }
    report
}

impl fmt::Display for StatsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let header = [
            "Sentences",
            "Normal",
            "SEO",
            "EPO",
            "SOO",
            "N=1",
            "N>1",
            "#Triples",
            "#Relations",
        ];
        let values = [
            self.sentences,
            self.normal,
            self.seo,
            self.epo,
            self.soo,
            self.n_eq_1,
            self.n_gt_1,
            self.triples,
            self.relations,
        ];
        let widths: Vec<usize> = header
            .iter()
            .zip(values)
            .map(|(h, v)| h.len().max(v.to_string().len()))
            .collect();
        let head: Vec<String> = header
            .iter()
            .zip(&widths)
            .map(|(h, w)| format!("{h:>w$}"))
            .collect();
        let row: Vec<String> = values
            .iter()
            .zip(&widths)
            .map(|(v, w)| format!("{v:>w$}"))
            .collect();
        writeln!(f, "{}", head.join("  "))?;
        write!(f, "{}", row.join("  "))
    }
}
