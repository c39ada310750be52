//! Runs the three decoder components of a freshly initialised model on one
//! sentence: relation probabilities, relation-specific tag distributions
//! and the global correspondence matrix.
//!
//! cargo run --example decoder_forward

use prgc::decoder::{global_correspondence, predict_relations, select_relations, tag_sequences};
use prgc::encoder::{EncoderConfig, Vocabulary};
use prgc::eval::decoder_param_count;
use prgc::model::Model;
use prgc::params::Parameters;
use prgc::tensor::Matrix;
use prgc::types::{RelationSet, Sentence, TaggingMode};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn print_matrix(label: &str, m: &Matrix) {
    println!("{label}");
    for row in m.iter_rows() {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:.3}")).collect();
        println!("  {}", cells.join(" "));
    }
}

fn main() -> prgc::Result<()> {
    let sentence = Sentence::from_text("s1", "Barack Obama was born in Honolulu")?;
    let vocab = Vocabulary::build(sentence.tokens().iter().map(String::as_str));
    let relations = RelationSet::new(["place_of_birth", "nationality", "contains"])?;
    let config = EncoderConfig {
        dim: 8,
        ..EncoderConfig::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let model = Model::new(config, vocab, relations, TaggingMode::Dual, &mut rng)?;

    let h = model.encode(&sentence)?;
    println!("encoder output: {} x {}", h.h.rows(), h.h.cols());

    let p_rel = predict_relations(&h, &model.decoder)?;
    for (k, p) in p_rel.iter().enumerate() {
        println!("p({}) = {p:.4}", model.relations.name(k).unwrap_or("?"));
    }
    println!("above 0.5: {:?}", select_relations(&p_rel, 0.5));

    let dists = tag_sequences(&h, 0, &model.decoder)?;
    print_matrix("subject B/I/O under relation 0", &dists.subject);
    print_matrix("object B/I/O under relation 0", &dists.object);
    print_matrix(
        "global correspondence",
        &global_correspondence(&h, &model.decoder)?,
    );

    println!(
        "decoder parameters: {} (formula {})",
        model.decoder.num_params(),
        decoder_param_count(8, 3, TaggingMode::Dual)
    );
    Ok(())
}
