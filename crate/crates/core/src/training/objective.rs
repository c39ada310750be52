//! Per-sentence joint loss with hand-derived gradients for every encoder
//! and decoder tensor.

use crate::decoder::{
    global_correspondence, relation_logits, tag_sequences, DecoderParams, TagDistributions,
    TaggerParams,
};
use crate::encoder::{avgpool, EncoderParams};
use crate::error::Result;
use crate::labeling::{single_sequence_targets, GoldLabels};
use crate::model::Model;
use crate::params::{ParamVisitor, ParamVisitorMut, Parameters};
use crate::tensor::{sigmoid, Matrix};
use crate::training::loss::{loss_global, loss_rel, loss_seq, loss_total, LossWeights};

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SentenceLoss {
    pub rel: f64,
    pub seq: f64,
    pub global: f64,
    pub total: f64,
}

impl SentenceLoss {
    pub fn add(&mut self, other: &SentenceLoss) {
        self.rel += other.rel;
        self.seq += other.seq;
        self.global += other.global;
        self.total += other.total;
    }

    pub fn scaled(mut self, factor: f64) -> Self {
        self.rel *= factor;
        self.seq *= factor;
        self.global *= factor;
        self.total *= factor;
        self
    }
}

/// Gradient buffers shaped like a [`Model`]'s parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub encoder: EncoderParams,
    pub decoder: DecoderParams,
}

impl Gradients {
    pub fn zeros_for(model: &Model) -> Self {
        Gradients {
            encoder: model.encoder.params.zeros_like(),
            decoder: model.decoder.zeros_like(),
        }
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        let mut theirs = Vec::new();
        other.visit(&mut |_, m| theirs.push(m.clone()));
        let mut i = 0;
        self.visit_mut(&mut |_, m| {
            m.add_assign(&theirs[i]);
            i += 1;
        });
    }
}

impl Parameters for Gradients {
    fn visit(&self, f: &mut ParamVisitor<'_>) {
        self.encoder.visit(f);
        self.decoder.visit(f);
    }

    fn visit_mut(&mut self, f: &mut ParamVisitorMut<'_>) {
        self.encoder.visit_mut(f);
        self.decoder.visit_mut(f);
    }
}

/// Forward pass only.
pub fn sentence_loss(
    model: &Model,
    ids: &[usize],
    gold: &GoldLabels,
    weights: LossWeights,
) -> Result<SentenceLoss> {
    let trace = model.encoder.forward(ids);
    let h = &trace.output;
    let p_rel: Vec<f64> = relation_logits(h, &model.decoder)?
        .into_iter()
        .map(sigmoid)
        .collect();
    let dists = gold
        .tag_targets
        .keys()
        .map(|&k| Ok((k, tag_sequences(h, k, &model.decoder)?)))
        .collect::<Result<_>>()?;
    let corr = global_correspondence(h, &model.decoder)?;
    let rel = loss_rel(&p_rel, &gold.rel_vector)?;
    let seq = loss_seq(&dists, &gold.tag_targets)?;
    let global = loss_global(&corr, &gold.corr_matrix)?;
    Ok(SentenceLoss {
        rel,
        seq,
        global,
        total: loss_total(rel, seq, global, weights),
    })
}

/// Forward and backward pass; gradients are added into `grads`.
pub fn sentence_loss_and_grad(
    model: &Model,
    ids: &[usize],
    gold: &GoldLabels,
    weights: LossWeights,
    grads: &mut Gradients,
) -> Result<SentenceLoss> {
    sentence_loss_and_grad_masked(model, ids, gold, weights, None, grads)
}

/// As [`sentence_loss_and_grad`], with the encoder output multiplied
/// elementwise by `mask` (dropout) before the decoder.
pub fn sentence_loss_and_grad_masked(
    model: &Model,
    ids: &[usize],
    gold: &GoldLabels,
    weights: LossWeights,
    mask: Option<&Matrix>,
    grads: &mut Gradients,
) -> Result<SentenceLoss> {
    let dec = &model.decoder;
    let trace = model.encoder.forward(ids);
    let masked;
    let h = match mask {
        Some(m) => {
            let mut out = trace.output.clone();
            out.h.mul_assign(m);
            masked = out;
            &masked
        }
        None => &trace.output,
    };
    let n = h.len();
    let d = dec.dim();
    let n_r = dec.n_relations();
    let mut dh = Matrix::zeros(n, d);

    // Relation prediction.
    let pooled = avgpool(h);
    let p_rel: Vec<f64> = relation_logits(h, dec)?.into_iter().map(sigmoid).collect();
    let rel = loss_rel(&p_rel, &gold.rel_vector)?;
    let g_rel: Vec<f64> = p_rel
        .iter()
        .zip(&gold.rel_vector)
        .map(|(&p, &y)| weights.alpha * (p - if y { 1.0 } else { 0.0 }) / n_r as f64)
        .collect();
    let mut d_pooled = vec![0.0; d];
    for (i, dp) in d_pooled.iter_mut().enumerate() {
        for (k, &g) in g_rel.iter().enumerate() {
            grads.decoder.rel_weight[(i, k)] += pooled[i] * g;
            *dp += dec.rel_weight[(i, k)] * g;
        }
    }
    for (k, &g) in g_rel.iter().enumerate() {
        grads.decoder.rel_bias[(0, k)] += g;
    }
    for t in 0..n {
        for (i, dp) in d_pooled.iter().enumerate() {
            dh[(t, i)] += dp / n as f64;
        }
    }

    // Relation-specific tagging.
    let mut dists = std::collections::BTreeMap::new();
    for &k in gold.tag_targets.keys() {
        dists.insert(k, tag_sequences(h, k, dec)?);
    }
    let seq = loss_seq(&dists, &gold.tag_targets)?;
    let n_pot = gold.tag_targets.len();
    if n_pot > 0 {
        for (&k, targets) in &gold.tag_targets {
            let u = dec.relation_vector(k);
            let dist: &TagDistributions = &dists[&k];
            let mut heads: Vec<(&Matrix, Vec<usize>, f64, usize)> = Vec::new();
            match &dist.joint {
                None => {
                    let scale = weights.beta / (2 * n * n_pot) as f64;
                    heads.push((
                        &dist.subject,
                        targets.subject.iter().map(|t| t.index()).collect(),
                        scale,
                        0,
                    ));
                    heads.push((
                        &dist.object,
                        targets.object.iter().map(|t| t.index()).collect(),
                        scale,
                        1,
                    ));
                }
                Some(joint) => {
                    let scale = weights.beta / (n * n_pot) as f64;
                    heads.push((joint, single_sequence_targets("", targets)?, scale, 0));
                }
            }
            for (probs, gold_tags, scale, head) in heads {
                let (w, gw, gb) = tagger_head(dec, &mut grads.decoder.tagger, head);
                let classes = w.cols();
                for t in 0..n {
                    let dz: Vec<f64> = (0..classes)
                        .map(|c| {
                            let y = if c == gold_tags[t] { 1.0 } else { 0.0 };
                            (probs[(t, c)] - y) * scale
                        })
                        .collect();
                    for i in 0..d {
                        let v = h.h[(t, i)] + u[i];
                        let mut dv = 0.0;
                        for (c, &g) in dz.iter().enumerate() {
                            gw[(i, c)] += v * g;
                            dv += w[(i, c)] * g;
                        }
                        dh[(t, i)] += dv;
                        grads.decoder.relation_embedding[(i, k)] += dv;
                    }
                    for (c, &g) in dz.iter().enumerate() {
                        gb[(0, c)] += g;
                    }
                }
            }
        }
    }

    // Global correspondence.
    let corr = global_correspondence(h, dec)?;
    let global = loss_global(&corr, &gold.corr_matrix)?;
    let scale = weights.gamma / (n * n) as f64;
    let mut row_sums = vec![0.0; n];
    let mut col_sums = vec![0.0; n];
    for i in 0..n {
        for j in 0..n {
            let y = if gold.corr_matrix.get(i, j) { 1.0 } else { 0.0 };
            let g = (corr[(i, j)] - y) * scale;
            row_sums[i] += g;
            col_sums[j] += g;
        }
    }
    let w = dec.glob_weight.row(0).to_vec();
    for t in 0..n {
        for i in 0..d {
            grads.decoder.glob_weight[(0, i)] += row_sums[t] * h.h[(t, i)];
            grads.decoder.glob_weight[(0, d + i)] += col_sums[t] * h.h[(t, i)];
            dh[(t, i)] += row_sums[t] * w[i] + col_sums[t] * w[d + i];
        }
    }
    grads.decoder.glob_bias[(0, 0)] += row_sums.iter().sum::<f64>();

    if let Some(m) = mask {
        dh.mul_assign(m);
    }
    model.encoder.backward(&trace, &dh, &mut grads.encoder);

    Ok(SentenceLoss {
        rel,
        seq,
        global,
        total: loss_total(rel, seq, global, weights),
    })
}

/// `(weight, weight grad, bias grad)` for tagger head 0 (subject or the
/// single tagger) or head 1 (object).
fn tagger_head<'a>(
    dec: &'a DecoderParams,
    grads: &'a mut TaggerParams,
    head: usize,
) -> (&'a Matrix, &'a mut Matrix, &'a mut Matrix) {
    match (&dec.tagger, grads, head) {
        (
            TaggerParams::Dual { sub_weight, .. },
            TaggerParams::Dual {
                sub_weight: gw,
                sub_bias: gb,
                ..
            },
            0,
        ) => (sub_weight, gw, gb),
        (
            TaggerParams::Dual { obj_weight, .. },
            TaggerParams::Dual {
                obj_weight: gw,
                obj_bias: gb,
                ..
            },
            _,
        ) => (obj_weight, gw, gb),
        (
            TaggerParams::Single { weight, .. },
            TaggerParams::Single {
                weight: gw,
                bias: gb,
            },
            _,
        ) => (weight, gw, gb),
        _ => unreachable!("gradient buffers mirror the model's tagger layout"),
    }
}
