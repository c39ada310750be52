//! Scores imperfect predictions against gold: exact-span and last-word
//! matching, the three subtask reports, and per-pattern / per-count
//! breakdowns.
//!
//! cargo run --example evaluate

use prgc::data::{gen_synthetic, PatternCounts, PatternRules, SynthConfig};
use prgc::eval::{breakdown, gold_intermediates, score_subtasks, score_triples, Prediction};
use prgc::types::{AnnotatedSentence, AnnotationMode, EntitySpan, Triple};

/// Drops the last triple of every third sentence and widens one subject
/// leftwards in every fifth (its last token is unchanged).
fn corrupt(gold: &[AnnotatedSentence]) -> Vec<AnnotatedSentence> {
    gold.iter()
        .enumerate()
        .map(|(i, g)| {
            let mut triples = g.triples.clone();
            if i % 3 == 0 && triples.len() > 1 {
                let last = *triples.iter().next_back().expect("non-empty");
                triples.remove(&last);
            }
            if i % 5 == 0 {
                triples = triples
                    .into_iter()
                    .map(|t| {
                        let start = t.subject.start.saturating_sub(1);
                        Triple::new(EntitySpan::new(start, t.subject.end), t.relation, t.object)
                    })
                    .collect();
            }
            AnnotatedSentence {
                sentence: g.sentence.clone(),
                triples,
            }
        })
        .collect()
}

fn main() -> prgc::Result<()> {
    let corpus = gen_synthetic(&SynthConfig {
        seed: 5,
        counts: PatternCounts {
            normal: 20,
            seo: 20,
            epo: 10,
            soo: 10,
        },
        ..SynthConfig::default()
    })?;
    let gold = &corpus.sentences;
    let pred = corrupt(gold);

    println!(
        "full span: {}",
        score_triples(&pred, gold, AnnotationMode::FullSpan)?
    );
    println!(
        "last word: {}",
        score_triples(&pred, gold, AnnotationMode::LastWord)?
    );

    // Subtask scoring needs the decoder's intermediate decisions; here they
    // are read off the predicted triples.
    let predictions: Vec<Prediction> = pred
        .iter()
        .map(|p| Prediction {
            annotated: p.clone(),
            intermediates: Some(gold_intermediates(p)),
        })
        .collect();
    let sub = score_subtasks(&predictions, gold)?;
    println!("relations: {}", sub.relation);
    println!("entities:  {}", sub.entity);
    println!("pairs:     {}", sub.pair);

    println!();
    print!(
        "{}",
        breakdown(
            &pred,
            gold,
            AnnotationMode::FullSpan,
            PatternRules::default()
        )?
    );
    Ok(())
}
