//! Generates a synthetic corpus, writes it in the public JSON-lines format,
//! reads it back and prints overlap patterns and corpus statistics.
//!
//! cargo run --example corpus_stats [out.json]

use std::collections::BTreeMap;
use std::path::PathBuf;

use prgc::data::{
    classify_pattern, dataset_stats, dataset_stats_with, gen_synthetic, load_dataset,
    write_synthetic, LoadOptions, PatternCounts, PatternRules, SynthConfig,
};

fn main() -> prgc::Result<()> {
    let out = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("prgc_corpus_stats.json"));

    let corpus = gen_synthetic(&SynthConfig {
        seed: 3,
        counts: PatternCounts {
            normal: 30,
            seo: 25,
            epo: 15,
            soo: 10,
        },
        ..SynthConfig::default()
    })?;
    write_synthetic(&out, &corpus)?;
    println!(
        "wrote {} sentences to {}",
        corpus.sentences.len(),
        out.display()
    );

    let loaded = load_dataset(
        &out,
        &LoadOptions {
            relations: Some(corpus.relations.clone()),
            ..LoadOptions::default()
        },
    )?;
    assert_eq!(loaded.sentences, corpus.sentences);

    // Pattern sets of the first few sentences; a sentence can carry several.
    for a in loaded.sentences.iter().take(4) {
        let labels: Vec<String> = classify_pattern(a).iter().map(|l| l.to_string()).collect();
        println!("{:<60} {}", a.sentence.text(), labels.join(","));
    }

    // Stats agree with the generator's manifest.
    let mut requested: BTreeMap<String, usize> = BTreeMap::new();
    for entry in &corpus.manifest {
        *requested.entry(entry.pattern.to_string()).or_default() += 1;
    }
    println!("requested: {requested:?}\n");
    println!("{}", dataset_stats(&loaded.sentences, &loaded.relations));

    let lenient = PatternRules {
        seo_at_least_one: true,
        soo_across_triples: true,
    };
    println!("with lenient SEO/SOO rules:");
    println!(
        "{}",
        dataset_stats_with(&loaded.sentences, &loaded.relations, lenient)
    );
    Ok(())
}
