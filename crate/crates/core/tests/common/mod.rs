#![allow(dead_code)]

use prgc::encoder::{EncoderConfig, Vocabulary};
use prgc::inference::Thresholds;
use prgc::model::Model;
use prgc::params::Parameters;
use std::collections::BTreeSet;

use prgc::data::{PatternLabel, PatternRules};
use prgc::types::{AnnotatedSentence, EntitySpan, RelationSet, Sentence, TaggingMode, Triple};
use rand::Rng;

pub const WORDS: [&str; 10] = [
    "the", "Acme", "bought", "Zeta", "in", "1999", ",", "and", "NYC", "x",
];

/// A random untrained model and sentence with `n <= 12`, `n_r <= 6`,
/// `d <= 8`. Decoder weights are scaled up so tag argmaxes and
/// correspondence scores spread across their range.
pub fn random_instance<R: Rng>(rng: &mut R) -> (Model, Sentence) {
    let n = rng.random_range(1..=12);
    let text: Vec<&str> = (0..n)
        .map(|_| WORDS[rng.random_range(0..WORDS.len())])
        .collect();
    let sentence = Sentence::from_text("r", &text.join(" ")).unwrap();
    let n_r = rng.random_range(1..=6);
    let relations = RelationSet::new((0..n_r).map(|k| format!("r{k}"))).unwrap();
    let config = EncoderConfig {
        dim: rng.random_range(2..=8),
        layers: rng.random_range(0..=2),
        window: 1,
        max_len: 12,
        context: rng.random_bool(0.5),
        ..EncoderConfig::default()
    };
    let mode = if rng.random_bool(0.5) {
        TaggingMode::Dual
    } else {
        TaggingMode::Single
    };
    let vocab = Vocabulary::build(WORDS[..6].iter().copied());
    let mut model = Model::new(config, vocab, relations, mode, rng).unwrap();
    let scale = rng.random_range(1.0..6.0);
    let shift: f64 = rng.random_range(-1.0..1.0);
    model.decoder.visit_mut(&mut |name, m| {
        m.scale(scale);
        if name.ends_with("bias") {
            m.as_mut_slice().iter_mut().for_each(|v| *v += shift);
        }
    });
    (model, sentence)
}

pub fn random_thresholds<R: Rng>(rng: &mut R) -> Thresholds {
    Thresholds::new(rng.random_range(0.05..0.95), rng.random_range(0.05..0.95))
}

pub fn touches(a: EntitySpan, b: EntitySpan) -> bool {
    (a.start..=a.end).any(|t| t >= b.start && t <= b.end)
}

/// Reference pattern labels: explicit double loop over triple pairs.
pub fn pattern_oracle(a: &AnnotatedSentence, rules: PatternRules) -> BTreeSet<PatternLabel> {
    let ts: Vec<Triple> = a.triples.iter().copied().collect();
    let mut out = BTreeSet::new();
    for t in &ts {
        if touches(t.subject, t.object) {
            out.insert(PatternLabel::Soo);
        }
    }
    for i in 0..ts.len() {
        for j in 0..ts.len() {
            if i == j {
                continue;
            }
            let (x, y) = (ts[i], ts[j]);
            let same_pair = (x.subject == y.subject && x.object == y.object)
                || (x.subject == y.object && x.object == y.subject);
            let mut mine = vec![x.subject];
            if x.object != x.subject {
                mine.push(x.object);
            }
            let shared = mine
                .iter()
                .filter(|e| **e == y.subject || **e == y.object)
                .count();
            if same_pair {
                out.insert(PatternLabel::Epo);
            }
            if (rules.seo_at_least_one && shared >= 1) || (shared == 1 && !same_pair) {
                out.insert(PatternLabel::Seo);
            }
            if rules.soo_across_triples && x.subject != y.object && touches(x.subject, y.object) {
                out.insert(PatternLabel::Soo);
            }
        }
    }
    if out.is_empty() {
        out.insert(PatternLabel::Normal);
    }
    out
}
