//! Trains briefly, saves a checkpoint, reloads it and extracts triples from
//! raw text, printing the intermediate relation and entity decisions.
//!
//! cargo run --release --example checkpoint_predict

use prgc::data::{gen_synthetic, tokenize, PatternCounts, SynthConfig};
use prgc::encoder::EncoderConfig;
use prgc::inference::{extract_detailed, Thresholds};
use prgc::training::{train, Checkpoint, TrainConfig, TrainData};
use prgc::types::Sentence;

fn main() -> prgc::Result<()> {
    let corpus = gen_synthetic(&SynthConfig {
        seed: 9,
        counts: PatternCounts {
            normal: 40,
            seo: 20,
            epo: 0,
            soo: 0,
        },
        ..SynthConfig::default()
    })?;
    let outcome = train(
        &TrainData {
            train: &corpus.sentences,
            valid: &[],
            relations: &corpus.relations,
        },
        &EncoderConfig {
            dim: 32,
            ..EncoderConfig::default()
        },
        &TrainConfig {
            epochs: 40,
            ..TrainConfig::default()
        },
        Thresholds::default(),
    )?;

    let path = std::env::temp_dir().join("prgc_checkpoint.json");
    outcome.checkpoint.save(&path)?;
    let restored = Checkpoint::load(&path)?;
    assert_eq!(restored, outcome.checkpoint);
    println!(
        "checkpoint at {} (epoch {})",
        path.display(),
        restored.epoch
    );

    let model = &restored.model;
    // Training sentences, re-tokenised from their text.
    for a in corpus.sentences.iter().take(3) {
        let sentence = Sentence::new("raw", tokenize(&a.sentence.text()))?;
        let x = extract_detailed(model, &sentence, restored.thresholds)?;
        println!("{}", sentence.text());
        let names: Vec<&str> = x
            .relations
            .iter()
            .map(|&k| model.relations.name(k).unwrap_or("?"))
            .collect();
        println!("  relations {names:?}, {} entities", x.entities.len());
        for t in &x.triples {
            println!(
                "  ({} | {} | {})",
                sentence.span_text(t.subject),
                model.relations.name(t.relation).unwrap_or("?"),
                sentence.span_text(t.object)
            );
        }
    }
    Ok(())
}
