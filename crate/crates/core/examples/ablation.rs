//! Trains on the synthetic benchmark, then decodes the validation set three
//! ways: the full pipeline, tagging every relation instead of the predicted
//! ones, and nearest-neighbour pairing instead of the correspondence matrix.
//!
//! cargo run --release --example ablation [seed]

use prgc::data::benchmark_corpora;
use prgc::encoder::EncoderConfig;
use prgc::eval::score_triples;
use prgc::inference::{predict_corpus, InferenceOptions, Pairing, RelationStrategy, Thresholds};
use prgc::training::{train, TrainConfig, TrainData};
use prgc::types::AnnotationMode;

fn main() -> prgc::Result<()> {
    let seed = std::env::args()
        .nth(1)
        .and_then(|a| a.parse().ok())
        .unwrap_or(0);
    let (train_set, valid_set) = benchmark_corpora(seed)?;
    let outcome = train(
        &TrainData {
            train: &train_set.sentences,
            valid: &[],
            relations: &train_set.relations,
        },
        &EncoderConfig::default(),
        &TrainConfig {
            seed,
            ..TrainConfig::default()
        },
        Thresholds::default(),
    )?;
    let model = &outcome.checkpoint.model;

    let variants = [
        ("full", InferenceOptions::default()),
        (
            "all relations",
            InferenceOptions {
                relations: RelationStrategy::All,
                ..InferenceOptions::default()
            },
        ),
        (
            "nearest neighbour",
            InferenceOptions {
                pairing: Pairing::NearestNeighbor,
                ..InferenceOptions::default()
            },
        ),
    ];
    for (name, options) in variants {
        let preds = predict_corpus(model, &valid_set.sentences, Thresholds::default(), options)?;
        let report = score_triples(&preds, &valid_set.sentences, AnnotationMode::FullSpan)?;
        println!("{name:<18} {report}");
    }
    Ok(())
}
