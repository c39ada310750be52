//! Corpus ingestion, overlap patterns, statistics and synthetic corpora.

mod load;
mod pattern;
mod stats;
mod synth;

pub use load::{
    find_tokens, load_dataset, load_relation_vocab, parse_records, relations_sidecar,
    resolve_record, resolve_records, to_raw_record, tokenize, write_dataset, write_records,
    write_relation_vocab, LoadOptions, LoadedDataset, RawRecord, SkippedRecord,
};
pub use pattern::{classify_pattern, classify_with, PatternLabel, PatternRules};
pub use stats::{dataset_stats, dataset_stats_with, StatsReport};
pub use synth::{
    benchmark_corpora, gen_synthetic, manifest_path, write_synthetic, ManifestEntry, PatternCounts,
    SynthConfig, SyntheticCorpus,
};
