//! Central finite-difference checks of the hand-derived gradients.

use rand::Rng;

use crate::encoder::{EncoderConfig, Vocabulary};
use crate::error::Result;
use crate::labeling::GoldLabels;
use crate::model::Model;
use crate::params::Parameters;
use crate::training::loss::LossWeights;
use crate::training::objective::{sentence_loss, sentence_loss_and_grad, Gradients};
use crate::training::prepare;
use crate::training::Prepared;
use crate::types::{AnnotatedSentence, EntitySpan, RelationSet, Sentence, TaggingMode, Triple};

/// Relative error `|a - b| / max(|a|, |b|, floor)`.
pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TensorCheck {
    pub name: String,
    pub entries: usize,
    pub max_rel_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheck {
    pub tensors: Vec<TensorCheck>,
}

impl GradCheck {
    pub fn max_rel_error(&self) -> f64 {
        self.tensors
            .iter()
            .map(|t| t.max_rel_error)
            .fold(0.0, f64::max)
    }

    pub fn worst(&self) -> Option<&TensorCheck> {
        self.tensors
            .iter()
            .max_by(|a, b| a.max_rel_error.total_cmp(&b.max_rel_error))
    }

    pub fn entries(&self) -> usize {
        self.tensors.iter().map(|t| t.entries).sum()
    }
}

fn shift(model: &mut Model, name: &str, idx: usize, delta: f64) {
    model.visit_mut(&mut |n, m| {
        if n == name {
            m.as_mut_slice()[idx] += delta;
        }
    });
}

/// Compares the analytic gradient of the total loss with central
/// differences of step `step`, entry by entry, for every parameter tensor.
pub fn check_gradients(
    model: &Model,
    ids: &[usize],
    gold: &GoldLabels,
    weights: LossWeights,
    step: f64,
    floor: f64,
) -> Result<GradCheck> {
    let mut grads = Gradients::zeros_for(model);
    sentence_loss_and_grad(model, ids, gold, weights, &mut grads)?;
    let mut analytic = Vec::new();
    grads.visit(&mut |name, m| analytic.push((name.to_owned(), m.as_slice().to_vec())));

    let mut probe = model.clone();
    let mut tensors = Vec::with_capacity(analytic.len());
    for (name, values) in analytic {
        let mut max_rel_error: f64 = 0.0;
        for (idx, &a) in values.iter().enumerate() {
            shift(&mut probe, &name, idx, step);
            let plus = sentence_loss(&probe, ids, gold, weights)?.total;
            shift(&mut probe, &name, idx, -2.0 * step);
            let minus = sentence_loss(&probe, ids, gold, weights)?.total;
            shift(&mut probe, &name, idx, step);
            let numeric = (plus - minus) / (2.0 * step);
            max_rel_error = max_rel_error.max(relative_error(a, numeric, floor));
        }
        tensors.push(TensorCheck {
            name,
            entries: values.len(),
            max_rel_error,
        });
    }
    Ok(GradCheck { tensors })
}

/// A small random model and labelled sentence: `d` in `2..=8`, `n` in
/// `1..=6`, `n_r` in `1..=4`, one or two gold triples.
pub fn micro_instance<R: Rng + ?Sized>(
    rng: &mut R,
    mode: TaggingMode,
) -> Result<(Model, Prepared)> {
    const WORDS: [&str; 8] = ["alpha", "Beta", "gamma", ",", "Delta", "7", "eps", "ZETA"];
    loop {
        let n = rng.random_range(1..=6);
        let text: Vec<&str> = (0..n)
            .map(|_| WORDS[rng.random_range(0..WORDS.len())])
            .collect();
        let sentence = Sentence::from_text("micro", &text.join(" "))?;
        let n_r = rng.random_range(1..=4);
        let relations = RelationSet::new((0..n_r).map(|k| format!("r{k}")))?;
        let span = |rng: &mut R| {
            let a = rng.random_range(0..n);
            EntitySpan::new(a, rng.random_range(a..n))
        };
        let triples = (0..rng.random_range(1..=2))
            .map(|_| Triple::new(span(rng), rng.random_range(0..n_r), span(rng)))
            .collect();
        let annotated = AnnotatedSentence { sentence, triples };
        let config = EncoderConfig {
            dim: rng.random_range(2..=8),
            layers: rng.random_range(0..=2),
            window: rng.random_range(1..=2),
            max_len: 8,
            context: rng.random_bool(0.5),
            ..EncoderConfig::default()
        };
        let vocab = Vocabulary::build(WORDS[..5].iter().copied());
        let model = Model::new(config, vocab, relations, mode, rng)?;
        if let Ok(prepared) = prepare(&model, &annotated) {
            return Ok((model, prepared));
        }
    }
}
