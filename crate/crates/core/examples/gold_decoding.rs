//! Feeds hard gold probabilities through the decoder. Decoding recovers
//! every gold triple; when two triples of different relations share start
//! tokens, the start-cell correspondence can also admit extra pairs, which
//! the interference detector predicts.
//!
//! cargo run --example gold_decoding

use prgc::inference::{extract_triples, extract_triples_bruteforce, GoldScorer, Thresholds};
use prgc::labeling::interference;
use prgc::types::{AnnotatedSentence, EntitySpan, RelationSet, Sentence, Triple};

fn describe(a: &AnnotatedSentence, relations: &RelationSet, t: &Triple) -> String {
    format!(
        "({} | {} | {})",
        a.sentence.span_text(t.subject),
        relations.name(t.relation).unwrap_or("?"),
        a.sentence.span_text(t.object)
    )
}

fn main() -> prgc::Result<()> {
    let relations = RelationSet::new(["lives_in", "works_in"])?;
    let s = EntitySpan::single;
    let sentences = vec![
        AnnotatedSentence::new(
            Sentence::from_text("clean", "Ada lives in London and works in Cambridge")?,
            [Triple::new(s(0), 0, s(3)), Triple::new(s(0), 1, s(7))],
        )?,
        // Both relations see subjects {Ada, Bo} and objects {Rome, Oslo};
        // the cross pairs' start cells are set by the other relation.
        AnnotatedSentence::new(
            Sentence::from_text("crossed", "Ada Rome Bo Oslo")?,
            [
                Triple::new(s(0), 0, s(1)),
                Triple::new(s(2), 0, s(3)),
                Triple::new(s(0), 1, s(3)),
                Triple::new(s(2), 1, s(1)),
            ],
        )?,
    ];

    let scorer = GoldScorer::new(&sentences, relations.len())?;
    for a in &sentences {
        let decoded = extract_triples(&scorer, &a.sentence, Thresholds::default())?;
        let oracle = extract_triples_bruteforce(&scorer, &a.sentence, Thresholds::default())?;
        assert_eq!(decoded, oracle);
        println!("{}: {}", a.sentence.id, a.sentence.text());
        println!("  superset of gold: {}", a.triples.is_subset(&decoded));
        for t in decoded.difference(&a.triples) {
            println!("  extra {}", describe(a, &relations, t));
        }
        for t in interference(a, relations.len())? {
            println!("  predicted extra {}", describe(a, &relations, &t));
        }
    }
    Ok(())
}
