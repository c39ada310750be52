//! Trains the desk model on the generated benchmark corpus and reports
//! validation F1, overall and per pattern.
//!
//! cargo run --release --example train_synthetic [seed] [epochs]

use std::time::Instant;

use prgc::data::{benchmark_corpora, PatternRules};
use prgc::encoder::EncoderConfig;
use prgc::eval::{breakdown, score_triples};
use prgc::inference::{extract_triples, Thresholds};
use prgc::training::{train, TrainConfig, TrainData};
use prgc::types::{AnnotatedSentence, AnnotationMode};

fn main() -> prgc::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let mut args = std::env::args()
        .skip(1)
        .map(|a| a.parse::<u64>().expect("integer argument"));
    let seed = args.next().unwrap_or(0);
    let epochs = args.next();

    let (train_set, valid_set) = benchmark_corpora(seed)?;
    let mut config = TrainConfig {
        seed,
        ..TrainConfig::default()
    };
    if let Some(e) = epochs {
        config.epochs = e as usize;
    }

    let start = Instant::now();
    let outcome = train(
        &TrainData {
            train: &train_set.sentences,
            valid: &[],
            relations: &train_set.relations,
        },
        &EncoderConfig::default(),
        &config,
        Thresholds::default(),
    )?;
    let last = outcome.history.last().expect("at least one epoch");
    println!(
        "trained {} epochs in {:.1?}, final loss {:.4}",
        outcome.history.len(),
        start.elapsed(),
        last.loss_total
    );

    let model = &outcome.checkpoint.model;
    let preds = valid_set
        .sentences
        .iter()
        .map(|a| {
            Ok(AnnotatedSentence {
                sentence: a.sentence.clone(),
                triples: extract_triples(model, &a.sentence, Thresholds::default())?,
            })
        })
        .collect::<prgc::Result<Vec<_>>>()?;
    println!(
        "validation: {}",
        score_triples(&preds, &valid_set.sentences, AnnotationMode::FullSpan)?
    );
    print!(
        "{}",
        breakdown(
            &preds,
            &valid_set.sentences,
            AnnotationMode::FullSpan,
            PatternRules::default()
        )?
    );
    Ok(())
}
