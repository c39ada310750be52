//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::time::{Duration, Instant};

use prgc::data::{
    benchmark_corpora, classify_with, dataset_stats, gen_synthetic, load_dataset, write_synthetic,
    LoadOptions, PatternCounts, PatternLabel, PatternRules, SynthConfig, SyntheticCorpus,
};
use prgc::encoder::EncoderConfig;
use prgc::error::Error;
use prgc::eval::{breakdown, score_triples, ScoreReport};
use prgc::inference::{
    extract_triples, extract_triples_bruteforce, predict_corpus, GoldScorer, InferenceOptions,
    Pairing, RelationStrategy, Thresholds,
};
use prgc::labeling::has_interference;
use prgc::model::Model;
use prgc::params::Parameters;
use prgc::training::{check_gradients, micro_instance, prepare, sentence_loss, train, LossWeights};
use prgc::training::{TrainConfig, TrainData};
use prgc::types::{AnnotatedSentence, AnnotationMode, TaggingMode, Triple};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

struct Verdict {
    pass: bool,
    detail: String,
}

impl Verdict {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Verdict {
            pass,
            detail: detail.into(),
        }
    }
}

fn within(elapsed: Duration, limit_secs: u64) -> bool {
    elapsed < Duration::from_secs(limit_secs)
}

fn quarter_mix(total: usize) -> PatternCounts {
    PatternCounts {
        normal: total / 4,
        seo: total / 4,
        epo: total / 4,
        soo: total - 3 * (total / 4),
    }
}

fn all_rules() -> [PatternRules; 4] {
    let r = |seo_at_least_one, soo_across_triples| PatternRules {
        seo_at_least_one,
        soo_across_triples,
    };
    [
        r(false, false),
        r(true, false),
        r(false, true),
        r(true, true),
    ]
}

fn closure() -> Verdict {
    let start = Instant::now();
    let corpus = gen_synthetic(&SynthConfig {
        seed: 1,
        counts: quarter_mix(1000),
        ..SynthConfig::default()
    })
    .unwrap();
    let requested = corpus.requested();
    let mut disagreements = 0;
    let mut missing = 0;
    for a in &corpus.sentences {
        for rules in all_rules() {
            disagreements +=
                usize::from(classify_with(a, rules) != common::pattern_oracle(a, rules));
        }
        missing += usize::from(
            !classify_with(a, PatternRules::default()).contains(&requested[&a.sentence.id]),
        );
    }

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("closure.json");
    write_synthetic(&path, &corpus).unwrap();
    let reloaded = load_dataset(
        &path,
        &LoadOptions {
            relations: Some(corpus.relations.clone()),
            ..LoadOptions::default()
        },
    )
    .unwrap();
    let stats = dataset_stats(&reloaded.sentences, &reloaded.relations);
    let mut oracle_counts: BTreeMap<PatternLabel, usize> = BTreeMap::new();
    for a in &corpus.sentences {
        for l in common::pattern_oracle(a, PatternRules::default()) {
            *oracle_counts.entry(l).or_default() += 1;
        }
    }
    let get = |l| oracle_counts.get(&l).copied().unwrap_or(0);
    let counts_agree = reloaded.sentences == corpus.sentences
        && stats.sentences == 1000
        && stats.normal == get(PatternLabel::Normal)
        && stats.seo == get(PatternLabel::Seo)
        && stats.epo == get(PatternLabel::Epo)
        && stats.soo == get(PatternLabel::Soo);
    let elapsed = start.elapsed();
    Verdict::new(
        disagreements == 0 && missing == 0 && counts_agree && within(elapsed, 60),
        format!(
            "1000 sentences, {disagreements} oracle disagreements over 4 rule settings, \
             {missing} missing requested patterns, stats after reload {} \
             (normal {} seo {} epo {} soo {}), {:.1}s",
            if counts_agree { "agree" } else { "DISAGREE" },
            stats.normal,
            stats.seo,
            stats.epo,
            stats.soo,
            elapsed.as_secs_f64()
        ),
    )
}

fn decode_oracle() -> Verdict {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (mut mismatches, mut nonempty) = (0, 0);
    for _ in 0..1000 {
        let (model, sentence) = common::random_instance(&mut rng);
        let th = common::random_thresholds(&mut rng);
        let fast = extract_triples(&model, &sentence, th).unwrap();
        let slow = extract_triples_bruteforce(&model, &sentence, th).unwrap();
        mismatches += usize::from(fast != slow);
        nonempty += usize::from(!fast.is_empty());
    }
    let elapsed = start.elapsed();
    Verdict::new(
        mismatches == 0 && within(elapsed, 60),
        format!(
            "1000 instances, {mismatches} mismatches, {nonempty} non-empty, {:.1}s",
            elapsed.as_secs_f64()
        ),
    )
}

fn gold_round_trip() -> Verdict {
    let start = Instant::now();
    let corpus = gen_synthetic(&SynthConfig {
        seed: 3,
        counts: quarter_mix(500),
        ..SynthConfig::default()
    })
    .unwrap();
    let n_r = corpus.relations.len();
    let scorer = GoldScorer::new(&corpus.sentences, n_r).unwrap();
    let (mut not_superset, mut not_equal, mut interfering) = (0, 0, 0);
    for a in &corpus.sentences {
        let decoded = extract_triples(&scorer, &a.sentence, Thresholds::default()).unwrap();
        not_superset += usize::from(!a.triples.is_subset(&decoded));
        if has_interference(a, n_r).unwrap() {
            interfering += 1;
        } else {
            not_equal += usize::from(decoded != a.triples);
        }
    }
    let elapsed = start.elapsed();
    Verdict::new(
        not_superset == 0 && not_equal == 0 && within(elapsed, 60),
        format!(
            "500 sentences, {not_superset} not supersets, {not_equal} inexact of {} \
             interference-free, {:.1}s",
            500 - interfering,
            elapsed.as_secs_f64()
        ),
    )
}

fn gradients() -> Verdict {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let weights = LossWeights {
        alpha: 0.7,
        beta: 1.3,
        gamma: 0.8,
    };
    let mut worst: f64 = 0.0;
    let mut worst_name = String::new();
    let mut covered = BTreeSet::new();
    let mut entries = 0;
    for mode in [TaggingMode::Dual, TaggingMode::Single] {
        for _ in 0..20 {
            let (model, p) = micro_instance(&mut rng, mode).unwrap();
            let check = check_gradients(&model, &p.ids, &p.gold, weights, 1e-5, 1e-7).unwrap();
            entries += check.entries();
            for t in &check.tensors {
                covered.insert(t.name.clone());
                if t.max_rel_error > worst {
                    worst = t.max_rel_error;
                    worst_name = t.name.clone();
                }
            }
        }
    }
    let required = [
        "encoder.embedding",
        "encoder.context.self",
        "encoder.context.left",
        "encoder.context.right",
        "encoder.context.bias",
        "decoder.rel.weight",
        "decoder.sub.weight",
        "decoder.tag.weight",
        "decoder.relation_embedding",
    ];
    let uncovered: Vec<&str> = required
        .iter()
        .copied()
        .filter(|r| !covered.iter().any(|c| c.starts_with(r)))
        .collect();
    let elapsed = start.elapsed();
    Verdict::new(
        worst < 1e-4 && uncovered.is_empty() && within(elapsed, 120),
        format!(
            "40 instances (20 per tagging mode), {} tensors, {entries} entries, max rel error \
             {worst:.2e} ({worst_name}), uncovered {uncovered:?}, {:.1}s",
            covered.len(),
            elapsed.as_secs_f64()
        ),
    )
}

fn uniform_losses() -> Verdict {
    let (ln2, ln3) = (2f64.ln(), 3f64.ln());
    let corpus = gen_synthetic(&SynthConfig {
        seed: 5,
        counts: quarter_mix(40),
        ..SynthConfig::default()
    })
    .unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut model = Model::new(
        EncoderConfig::default(),
        prgc::encoder::Vocabulary::build(
            corpus
                .sentences
                .iter()
                .flat_map(|a| a.sentence.tokens().iter().map(String::as_str)),
        ),
        corpus.relations.clone(),
        TaggingMode::Dual,
        &mut rng,
    )
    .unwrap();
    model.decoder.visit_mut(&mut |_, m| m.scale(0.0));
    let mut worst: f64 = 0.0;
    for a in &corpus.sentences {
        let p = prepare(&model, a).unwrap();
        let l = sentence_loss(&model, &p.ids, &p.gold, LossWeights::default()).unwrap();
        worst = worst
            .max((l.rel - ln2).abs())
            .max((l.global - ln2).abs())
            .max((l.seq - ln3).abs())
            .max((l.total - (2.0 * ln2 + ln3)).abs());
    }
    Verdict::new(
        worst < 1e-9,
        format!("40 sentences with a zeroed decoder, max deviation from ln2/ln3 {worst:.1e}"),
    )
}

struct Trained {
    seed: u64,
    train: SyntheticCorpus,
    valid: SyntheticCorpus,
    model: Model,
    seconds: f64,
}

fn train_benchmark(seed: u64) -> Trained {
    let (train_set, valid_set) = benchmark_corpora(seed).unwrap();
    let start = Instant::now();
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
    )
    .unwrap();
    Trained {
        seed,
        train: train_set,
        valid: valid_set,
        model: outcome.checkpoint.model,
        seconds: start.elapsed().as_secs_f64(),
    }
}

fn score(t: &Trained, options: InferenceOptions) -> (Vec<AnnotatedSentence>, ScoreReport) {
    let preds =
        predict_corpus(&t.model, &t.valid.sentences, Thresholds::default(), options).unwrap();
    let report = score_triples(&preds, &t.valid.sentences, AnnotationMode::FullSpan).unwrap();
    (preds, report)
}

fn learning_benchmark(t: &Trained) -> Verdict {
    let (preds, overall) = score(t, InferenceOptions::default());
    let by_pattern = breakdown(
        &preds,
        &t.valid.sentences,
        AnnotationMode::FullSpan,
        PatternRules::default(),
    )
    .unwrap();
    let soo = by_pattern.patterns[&PatternLabel::Soo];
    let soo_share = t
        .train
        .sentences
        .iter()
        .chain(&t.valid.sentences)
        .filter(|a| classify_with(a, PatternRules::default()).contains(&PatternLabel::Soo))
        .count() as f64
        / (t.train.sentences.len() + t.valid.sentences.len()) as f64;
    let single = gen_synthetic(&SynthConfig {
        seed: 100 + t.seed,
        vocab_seed: t.seed,
        tagging: TaggingMode::Single,
        counts: PatternCounts {
            normal: 60,
            seo: 50,
            epo: 40,
            soo: 50,
        },
        ..SynthConfig::default()
    });
    let refused = matches!(single, Err(Error::InfeasibleConfig(_)));
    let shape_ok = t.train.sentences.len() == 200
        && t.valid.sentences.len() == 50
        && t.train.relations.len() == 6
        && t.valid.relations == t.train.relations
        && soo_share >= 0.10;
    Verdict::new(
        overall.f1 >= 0.95 && soo.f1 >= 0.90 && refused && shape_ok && t.seconds < 600.0,
        format!(
            "200/50 sentences, n_r {}, SOO share {:.0}%, F1 {:.3}, SOO F1 {:.3}, \
             single tagging {}, trained in {:.1}s",
            t.train.relations.len(),
            100.0 * soo_share,
            overall.f1,
            soo.f1,
            if refused { "refused" } else { "NOT refused" },
            t.seconds
        ),
    )
}

fn threshold_nesting(t: &Trained) -> Verdict {
    let levels = [0.1, 0.3, 0.5, 0.7, 0.9];
    let sentences: Vec<_> = t
        .valid
        .sentences
        .iter()
        .chain(&t.train.sentences)
        .take(100)
        .collect();
    let mut violations = 0;
    let mut sizes = vec![0; levels.len()];
    for a in &sentences {
        let sets: Vec<BTreeSet<Triple>> = levels
            .iter()
            .map(|&l2| extract_triples(&t.model, &a.sentence, Thresholds::new(0.5, l2)).unwrap())
            .collect();
        for (k, s) in sets.iter().enumerate() {
            sizes[k] += s.len();
        }
        violations += sets.windows(2).filter(|w| !w[1].is_subset(&w[0])).count();
    }
    Verdict::new(
        violations == 0 && sentences.len() == 100,
        format!("100 sentences, {violations} violations, triples per level {sizes:?}"),
    )
}

fn ablations(runs: &[&Trained]) -> Verdict {
    let mut ok = true;
    let mut parts = Vec::new();
    for t in runs {
        let (_, full) = score(t, InferenceOptions::default());
        let (_, all) = score(
            t,
            InferenceOptions {
                relations: RelationStrategy::All,
                ..InferenceOptions::default()
            },
        );
        let (_, nn) = score(
            t,
            InferenceOptions {
                pairing: Pairing::NearestNeighbor,
                ..InferenceOptions::default()
            },
        );
        ok &= all.precision <= full.precision && nn.f1 <= full.f1;
        parts.push(format!(
            "seed {}: P {:.3} vs all-relations {:.3}, F1 {:.3} vs nearest {:.3}",
            t.seed, full.precision, all.precision, full.f1, nn.f1
        ));
    }
    Verdict::new(ok && runs.len() == 3, parts.join("; "))
}

fn main() {
    let mut results: Vec<(&str, Verdict)> = vec![
        ("1 pattern closure", closure()),
        ("2 decode oracle", decode_oracle()),
        ("3 gold round trip", gold_round_trip()),
        ("4 gradients", gradients()),
        ("5 uniform losses", uniform_losses()),
    ];
    let runs: Vec<Trained> = (0..3).map(train_benchmark).collect();
    results.push(("6 learning benchmark", learning_benchmark(&runs[0])));
    results.push(("7 threshold nesting", threshold_nesting(&runs[0])));
    results.push((
        "8 ablation direction",
        ablations(&runs.iter().collect::<Vec<_>>()),
    ));

    let mut failed = 0;
    for (name, v) in &results {
        println!(
            "{} {name}: {}",
            if v.pass { "PASS" } else { "FAIL" },
            v.detail
        );
        failed += usize::from(!v.pass);
    }
    println!(
        "{} of {} criteria passed",
        results.len() - failed,
        results.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
