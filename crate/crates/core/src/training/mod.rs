//! Joint training: losses, gradients, the optimizer loop and checkpoints.

pub mod checkpoint;
pub mod gradcheck;
pub mod loss;
pub mod objective;
pub mod optim;

use log::{info, warn};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::encoder::{EncoderConfig, Vocabulary};
use crate::error::{Error, Result};
use crate::eval::score_triples;
use crate::inference::{extract_triples, Thresholds};
use crate::labeling::{add_negative_relations, build_gold, single_sequence_targets, GoldLabels};
use crate::model::Model;
use crate::tensor::Matrix;
use crate::types::{AnnotatedSentence, AnnotationMode, RelationSet, TaggingMode};

pub use checkpoint::{Checkpoint, RngState};
pub use gradcheck::{check_gradients, micro_instance, relative_error, GradCheck, TensorCheck};
pub use loss::{loss_global, loss_rel, loss_seq, loss_total, LossWeights, EPS};
pub use objective::{
    sentence_loss, sentence_loss_and_grad, sentence_loss_and_grad_masked, Gradients, SentenceLoss,
};
pub use optim::{clip_global_norm, AdamSettings, AdamW};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub encoder_lr: f64,
    pub decoder_lr: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub seed: u64,
    /// Absent relations added per sentence with all-`O` tag targets.
    pub negative_relation_samples: usize,
    /// Word dropout strength `a`: a training token seen `c` times is
    /// replaced by the unknown entry of its shape with probability
    /// `a / (a + c)`. `0` disables it.
    pub word_dropout: f64,
    /// Inverted dropout rate on the encoder output.
    pub hidden_dropout: f64,
    /// Decay both learning rates linearly to zero over the run.
    pub lr_decay: bool,
    /// Global gradient-norm bound; `0` disables clipping.
    pub grad_clip: f64,
    /// Return the best-on-validation model instead of the last one.
    pub select_best: bool,
    pub tagging: TaggingMode,
}

impl Default for TrainConfig {
    /// Settings for training the randomly initialised desk encoder from
    /// scratch on a few hundred sentences.
    fn default() -> Self {
        TrainConfig {
            encoder_lr: 5e-3,
            decoder_lr: 1e-2,
            weight_decay: 0.01,
            batch_size: 8,
            epochs: 100,
            alpha: 1.0,
            beta: 1.0,
            gamma: 1.0,
            seed: 0,
            negative_relation_samples: 0,
            word_dropout: 2.0,
            hidden_dropout: 0.2,
            lr_decay: true,
            grad_clip: 1.0,
            select_best: false,
            tagging: TaggingMode::Dual,
        }
    }
}

impl TrainConfig {
    /// Rates, decay, batch size and epoch count of the BERT setup on NYT.
    pub fn nyt() -> Self {
        TrainConfig {
            encoder_lr: 5e-5,
            decoder_lr: 1e-3,
            batch_size: 64,
            epochs: 100,
            word_dropout: 0.0,
            hidden_dropout: 0.1,
            lr_decay: false,
            ..TrainConfig::default()
        }
    }

    /// The BERT setup with WebNLG's small batches.
    pub fn webnlg() -> Self {
        TrainConfig {
            batch_size: 6,
            ..TrainConfig::nyt()
        }
    }

    pub fn weights(&self) -> LossWeights {
        LossWeights {
            alpha: self.alpha,
            beta: self.beta,
            gamma: self.gamma,
        }
    }

    pub fn adam(&self) -> AdamSettings {
        AdamSettings {
            encoder_lr: self.encoder_lr,
            decoder_lr: self.decoder_lr,
            weight_decay: self.weight_decay,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if !(self.encoder_lr > 0.0 && self.decoder_lr > 0.0) {
            return bad("learning rates must be positive".into());
        }
        if self.weight_decay < 0.0 || self.grad_clip < 0.0 {
            return bad("weight_decay and grad_clip must be non-negative".into());
        }
        if !(self.word_dropout >= 0.0 && self.word_dropout.is_finite()) {
            return bad("word_dropout must be finite and non-negative".into());
        }
        if !(0.0..1.0).contains(&self.hidden_dropout) {
            return bad("hidden_dropout must be in [0, 1)".into());
        }
        if self.batch_size == 0 || self.epochs == 0 {
            return bad("batch_size and epochs must be positive".into());
        }
        if [self.alpha, self.beta, self.gamma]
            .iter()
            .any(|w| *w < 0.0 || !w.is_finite())
        {
            return bad("loss weights must be finite and non-negative".into());
        }
        Ok(())
    }
}

/// One line of the metrics history.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss_rel: f64,
    pub loss_seq: f64,
    pub loss_global: f64,
    pub loss_total: f64,
    pub val_f1: Option<f64>,
}

/// A sentence ready for the objective.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub id: String,
    pub ids: Vec<usize>,
    pub gold: GoldLabels,
}

/// Gold labels plus token ids; sentences the tagger layout cannot represent
/// come back as `Err` with the reason.
pub fn prepare(model: &Model, annotated: &AnnotatedSentence) -> Result<Prepared> {
    let gold = build_gold(annotated, model.relations.len())?;
    if model.mode() == TaggingMode::Single {
        for tags in gold.tag_targets.values() {
            single_sequence_targets(&annotated.sentence.id, tags)?;
        }
    }
    let ids = model.encoder.ids(&annotated.sentence)?;
    Ok(Prepared {
        id: annotated.sentence.id.clone(),
        ids,
        gold,
    })
}

fn drop_words<R: Rng>(vocab: &Vocabulary, ids: &[usize], keep: &[f64], rng: &mut R) -> Vec<usize> {
    ids.iter()
        .map(|&id| {
            if keep[id] < 1.0 && !rng.random_bool(keep[id]) {
                vocab.unk_for(id)
            } else {
                id
            }
        })
        .collect()
}

/// Mean of the per-sentence losses.
fn dropout_mask<R: Rng>(n: usize, d: usize, rate: f64, rng: &mut R) -> Matrix {
    let mut m = Matrix::zeros(n, d);
    let keep = 1.0 / (1.0 - rate);
    for t in 0..n {
        for v in m.row_mut(t) {
            if rng.random::<f64>() >= rate {
                *v = keep;
            }
        }
    }
    m
}

pub fn batch_loss(model: &Model, batch: &[Prepared], weights: LossWeights) -> Result<SentenceLoss> {
    let mut total = SentenceLoss::default();
    for p in batch {
        total.add(&sentence_loss(model, &p.ids, &p.gold, weights)?);
    }
    Ok(total.scaled(1.0 / batch.len().max(1) as f64))
}

pub struct TrainData<'a> {
    pub train: &'a [AnnotatedSentence],
    pub valid: &'a [AnnotatedSentence],
    pub relations: &'a RelationSet,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub checkpoint: Checkpoint,
    pub history: Vec<EpochRecord>,
    /// `(sentence id, reason)` for training sentences left out.
    pub skipped: Vec<(String, String)>,
}

pub fn validation_f1(
    model: &Model,
    valid: &[AnnotatedSentence],
    thresholds: Thresholds,
) -> Result<f64> {
    let mut preds = Vec::with_capacity(valid.len());
    for a in valid {
        let triples = extract_triples(model, &a.sentence, thresholds)?;
        preds.push(AnnotatedSentence {
            sentence: a.sentence.clone(),
            triples,
        });
    }
    Ok(score_triples(&preds, valid, AnnotationMode::FullSpan)?.f1)
}

/// Mini-batch AdamW over the joint objective. Returns the final-epoch model
/// unless `select_best` is set.
pub fn train(
    data: &TrainData<'_>,
    encoder_config: &EncoderConfig,
    config: &TrainConfig,
    thresholds: Thresholds,
) -> Result<TrainOutcome> {
    config.validate()?;
    thresholds.validate()?;
    if data.train.is_empty() {
        return Err(Error::InvalidArgument("training split is empty".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let vocab = Vocabulary::build(
        data.train
            .iter()
            .flat_map(|a| a.sentence.tokens().iter().map(String::as_str)),
    );
    let mut model = Model::new(
        encoder_config.clone(),
        vocab,
        data.relations.clone(),
        config.tagging,
        &mut rng,
    )?;

    let mut prepared = Vec::with_capacity(data.train.len());
    let mut skipped = Vec::new();
    for a in data.train {
        match prepare(&model, a) {
            Ok(p) => prepared.push(p),
            Err(e) => {
                warn!("skipping training sentence {}: {e}", a.sentence.id);
                skipped.push((a.sentence.id.clone(), e.to_string()));
            }
        }
    }
    if prepared.is_empty() {
        return Err(Error::InvalidArgument(
            "no usable training sentences after labeling".into(),
        ));
    }
    info!(
        "training on {} sentences ({} skipped), {} parameters",
        prepared.len(),
        skipped.len(),
        crate::params::Parameters::num_params(&model)
    );

    let mut counts = vec![0usize; model.encoder.vocab.len()];
    for p in &prepared {
        for &id in &p.ids {
            counts[id] += 1;
        }
    }
    let a = config.word_dropout;
    let keep: Vec<f64> = counts
        .iter()
        .map(|&c| 1.0 - a / (a + c.max(1) as f64))
        .collect();

    let weights = config.weights();
    let mut optimizer = AdamW::new(config.adam(), &model);
    let total_steps = config.epochs * prepared.len().div_ceil(config.batch_size);
    let mut order: Vec<usize> = (0..prepared.len()).collect();
    let mut history = Vec::with_capacity(config.epochs);
    let mut best: Option<(f64, Model, usize)> = None;

    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = SentenceLoss::default();
        for (step, batch) in order.chunks(config.batch_size).enumerate() {
            let mut grads = Gradients::zeros_for(&model);
            let mut batch_loss = SentenceLoss::default();
            for &i in batch {
                let mut gold = prepared[i].gold.clone();
                add_negative_relations(&mut gold, config.negative_relation_samples, &mut rng);
                let ids = drop_words(&model.encoder.vocab, &prepared[i].ids, &keep, &mut rng);
                let mask = (config.hidden_dropout > 0.0).then(|| {
                    dropout_mask(
                        ids.len(),
                        model.encoder.config.dim,
                        config.hidden_dropout,
                        &mut rng,
                    )
                });
                let loss = objective::sentence_loss_and_grad_masked(
                    &model,
                    &ids,
                    &gold,
                    weights,
                    mask.as_ref(),
                    &mut grads,
                )?;
                batch_loss.add(&loss);
            }
            if !batch_loss.total.is_finite() {
                return Err(Error::DivergedLoss { epoch, step });
            }
            epoch_loss.add(&batch_loss);
            crate::params::Parameters::scale(&mut grads, 1.0 / batch.len() as f64);
            if config.grad_clip > 0.0 {
                clip_global_norm(&mut grads, config.grad_clip);
            }
            let scale = if config.lr_decay {
                1.0 - optimizer.steps() as f64 / total_steps as f64
            } else {
                1.0
            };
            optimizer.step_scaled(&mut model, &grads, scale);
        }
        let epoch_loss = epoch_loss.scaled(1.0 / prepared.len() as f64);
        let val_f1 = if data.valid.is_empty() {
            None
        } else {
            Some(validation_f1(&model, data.valid, thresholds)?)
        };
        info!(
            "epoch {epoch}: loss {:.5} (rel {:.5}, seq {:.5}, global {:.5}) val_f1 {:?}",
            epoch_loss.total, epoch_loss.rel, epoch_loss.seq, epoch_loss.global, val_f1
        );
        if config.select_best {
            if let Some(f1) = val_f1 {
                if best.as_ref().is_none_or(|(b, _, _)| f1 > *b) {
                    best = Some((f1, model.clone(), epoch));
                }
            }
        }
        history.push(EpochRecord {
            epoch,
            loss_rel: epoch_loss.rel,
            loss_seq: epoch_loss.seq,
            loss_global: epoch_loss.global,
            loss_total: epoch_loss.total,
            val_f1,
        });
    }

    let (model, epoch) = match best {
        Some((_, m, e)) => (m, e),
        None => (model, config.epochs),
    };
    let checkpoint = Checkpoint::new(
        model,
        config.clone(),
        thresholds,
        epoch,
        RngState::capture(&rng),
    );
    Ok(TrainOutcome {
        checkpoint,
        history,
        skipped,
    })
}
