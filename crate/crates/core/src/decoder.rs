//! The three decoder components: potential relation prediction,
//! relation-specific sequence tagging and global correspondence.
//!
//! All functions here are pure; gradients live in `training::objective`.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::encoder::{avgpool, EncoderOutput};
use crate::error::{Error, Result};
use crate::params::{ParamVisitor, ParamVisitorMut, Parameters};
use crate::tensor::{dot, sigmoid, softmax, Matrix};
use crate::types::TaggingMode;

/// Class order of the single-sequence tagger.
pub const SINGLE_TAGS: [&str; 5] = ["B-sub", "I-sub", "B-obj", "I-obj", "O"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum TaggerParams {
    Dual {
        sub_weight: Matrix,
        sub_bias: Matrix,
        obj_weight: Matrix,
        obj_bias: Matrix,
    },
    Single {
        weight: Matrix,
        bias: Matrix,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecoderParams {
    /// `d x n_r`; column `k` scores relation `k`.
    pub rel_weight: Matrix,
    /// `1 x n_r`.
    pub rel_bias: Matrix,
    /// `d x n_r`; column `k` is the embedding of relation `k`.
    pub relation_embedding: Matrix,
    pub tagger: TaggerParams,
    /// `1 x 2d`: subject half first, then object half.
    pub glob_weight: Matrix,
    /// `1 x 1`.
    pub glob_bias: Matrix,
}

impl DecoderParams {
    pub fn zeros(d: usize, n_relations: usize, mode: TaggingMode) -> Self {
        let tagger = match mode {
            TaggingMode::Dual => TaggerParams::Dual {
                sub_weight: Matrix::zeros(d, 3),
                sub_bias: Matrix::zeros(1, 3),
                obj_weight: Matrix::zeros(d, 3),
                obj_bias: Matrix::zeros(1, 3),
            },
            TaggingMode::Single => TaggerParams::Single {
                weight: Matrix::zeros(d, 5),
                bias: Matrix::zeros(1, 5),
            },
        };
        DecoderParams {
            rel_weight: Matrix::zeros(d, n_relations),
            rel_bias: Matrix::zeros(1, n_relations),
            relation_embedding: Matrix::zeros(d, n_relations),
            tagger,
            glob_weight: Matrix::zeros(1, 2 * d),
            glob_bias: Matrix::zeros(1, 1),
        }
    }

    /// Matrices uniform in `[-1/sqrt(d), 1/sqrt(d)]`, biases zero.
    pub fn init<R: Rng + ?Sized>(
        d: usize,
        n_relations: usize,
        mode: TaggingMode,
        rng: &mut R,
    ) -> Self {
        let bound = 1.0 / (d as f64).sqrt();
        let mut params = DecoderParams::zeros(d, n_relations, mode);
        params.visit_mut(&mut |name, m| {
            if !crate::params::is_bias(name) {
                *m = Matrix::uniform(m.rows(), m.cols(), bound, rng);
            }
        });
        params
    }

    pub fn zeros_like(&self) -> Self {
        DecoderParams::zeros(self.dim(), self.n_relations(), self.mode())
    }

    pub fn dim(&self) -> usize {
        self.rel_weight.rows()
    }

    pub fn n_relations(&self) -> usize {
        self.rel_weight.cols()
    }

    pub fn mode(&self) -> TaggingMode {
        match self.tagger {
            TaggerParams::Dual { .. } => TaggingMode::Dual,
            TaggerParams::Single { .. } => TaggingMode::Single,
        }
    }

    fn check_dim(&self, h: &EncoderOutput) -> Result<()> {
        if h.dim() != self.dim() {
            return Err(Error::DimensionMismatch(format!(
                "encoder output has d={}, decoder expects d={}",
                h.dim(),
                self.dim()
            )));
        }
        if h.is_empty() {
            return Err(Error::EmptySentence);
        }
        Ok(())
    }

    fn check_relation(&self, relation: usize) -> Result<()> {
        if relation >= self.n_relations() {
            return Err(Error::UnknownRelation {
                id: relation,
                n_relations: self.n_relations(),
            });
        }
        Ok(())
    }

    /// Column `k` of the relation embedding matrix.
    pub fn relation_vector(&self, relation: usize) -> Vec<f64> {
        (0..self.dim())
            .map(|i| self.relation_embedding[(i, relation)])
            .collect()
    }
}

impl Parameters for DecoderParams {
    fn visit(&self, f: &mut ParamVisitor<'_>) {
        f("decoder.rel.weight", &self.rel_weight);
        f("decoder.rel.bias", &self.rel_bias);
        f("decoder.relation_embedding", &self.relation_embedding);
        match &self.tagger {
            TaggerParams::Dual {
                sub_weight,
                sub_bias,
                obj_weight,
                obj_bias,
            } => {
                f("decoder.sub.weight", sub_weight);
                f("decoder.sub.bias", sub_bias);
                f("decoder.obj.weight", obj_weight);
                f("decoder.obj.bias", obj_bias);
            }
            TaggerParams::Single { weight, bias } => {
                f("decoder.tag.weight", weight);
                f("decoder.tag.bias", bias);
            }
        }
        f("decoder.glob.weight", &self.glob_weight);
        f("decoder.glob.bias", &self.glob_bias);
    }

    fn visit_mut(&mut self, f: &mut ParamVisitorMut<'_>) {
        f("decoder.rel.weight", &mut self.rel_weight);
        f("decoder.rel.bias", &mut self.rel_bias);
        f("decoder.relation_embedding", &mut self.relation_embedding);
        match &mut self.tagger {
            TaggerParams::Dual {
                sub_weight,
                sub_bias,
                obj_weight,
                obj_bias,
            } => {
                f("decoder.sub.weight", sub_weight);
                f("decoder.sub.bias", sub_bias);
                f("decoder.obj.weight", obj_weight);
                f("decoder.obj.bias", obj_bias);
            }
            TaggerParams::Single { weight, bias } => {
                f("decoder.tag.weight", weight);
                f("decoder.tag.bias", bias);
            }
        }
        f("decoder.glob.weight", &mut self.glob_weight);
        f("decoder.glob.bias", &mut self.glob_bias);
    }
}

/// Subject and object tag distributions for one relation, each `n x 3`
/// with columns ordered B, I, O.
#[derive(Debug, Clone, PartialEq)]
pub struct TagDistributions {
    pub subject: Matrix,
    pub object: Matrix,
    /// The underlying `n x 5` distribution in single-sequence mode.
    pub joint: Option<Matrix>,
}

/// Per-sentence decoder outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionBundle {
    pub p_rel: Vec<f64>,
    pub tag_dists: BTreeMap<usize, TagDistributions>,
    pub corr: Matrix,
}

pub fn relation_logits(h: &EncoderOutput, params: &DecoderParams) -> Result<Vec<f64>> {
    params.check_dim(h)?;
    let pooled = avgpool(h);
    let d = params.dim();
    Ok((0..params.n_relations())
        .map(|k| {
            let mut z = params.rel_bias[(0, k)];
            for (i, p) in pooled.iter().enumerate().take(d) {
                z += params.rel_weight[(i, k)] * p;
            }
            z
        })
        .collect())
}

/// One independent sigmoid probability per relation.
pub fn predict_relations(h: &EncoderOutput, params: &DecoderParams) -> Result<Vec<f64>> {
    Ok(relation_logits(h, params)?
        .into_iter()
        .map(sigmoid)
        .collect())
}

/// Relations whose probability strictly exceeds `threshold`, ascending.
pub fn select_relations(p_rel: &[f64], threshold: f64) -> Vec<usize> {
    p_rel
        .iter()
        .enumerate()
        .filter(|(_, &p)| p > threshold)
        .map(|(k, _)| k)
        .collect()
}

/// Logits of the tagger for `relation`, `n x 3` (dual, subject then object)
/// or a single `n x 5` matrix (single mode, returned as the first element).
pub(crate) fn tag_logits(
    h: &EncoderOutput,
    relation: usize,
    params: &DecoderParams,
) -> Result<(Matrix, Option<Matrix>)> {
    params.check_dim(h)?;
    params.check_relation(relation)?;
    let u = params.relation_vector(relation);
    let n = h.len();
    let linear = |w: &Matrix, b: &Matrix| {
        let classes = w.cols();
        let mut out = Matrix::zeros(n, classes);
        for t in 0..n {
            let v: Vec<f64> = h.h.row(t).iter().zip(&u).map(|(a, b)| a + b).collect();
            for c in 0..classes {
                let mut z = b[(0, c)];
                for (i, vi) in v.iter().enumerate() {
                    z += w[(i, c)] * vi;
                }
                out[(t, c)] = z;
            }
        }
        out
    };
    Ok(match &params.tagger {
        TaggerParams::Dual {
            sub_weight,
            sub_bias,
            obj_weight,
            obj_bias,
        } => (
            linear(sub_weight, sub_bias),
            Some(linear(obj_weight, obj_bias)),
        ),
        TaggerParams::Single { weight, bias } => (linear(weight, bias), None),
    })
}

fn row_softmax(logits: &Matrix) -> Matrix {
    let rows: Vec<Vec<f64>> = logits.iter_rows().map(softmax).collect();
    Matrix::from_rows(&rows)
}

/// Relation-specific BIO distributions for subjects and objects.
pub fn tag_sequences(
    h: &EncoderOutput,
    relation: usize,
    params: &DecoderParams,
) -> Result<TagDistributions> {
    let (first, second) = tag_logits(h, relation, params)?;
    Ok(match second {
        Some(obj) => TagDistributions {
            subject: row_softmax(&first),
            object: row_softmax(&obj),
            joint: None,
        },
        None => {
            let joint = row_softmax(&first);
            let n = joint.rows();
            let mut subject = Matrix::zeros(n, 3);
            let mut object = Matrix::zeros(n, 3);
            for t in 0..n {
                let p = joint.row(t);
                subject
                    .row_mut(t)
                    .copy_from_slice(&[p[0], p[1], p[2] + p[3] + p[4]]);
                object
                    .row_mut(t)
                    .copy_from_slice(&[p[2], p[3], p[0] + p[1] + p[4]]);
            }
            TagDistributions {
                subject,
                object,
                joint: Some(joint),
            }
        }
    })
}

/// `n x n` matrix; entry `(i, j)` scores token `i` as a subject start
/// paired with token `j` as an object start.
pub fn global_correspondence(h: &EncoderOutput, params: &DecoderParams) -> Result<Matrix> {
    params.check_dim(h)?;
    let n = h.len();
    let d = params.dim();
    let w = params.glob_weight.row(0);
    let (w_sub, w_obj) = w.split_at(d);
    let sub: Vec<f64> = h.h.iter_rows().map(|r| dot(w_sub, r)).collect();
    let obj: Vec<f64> = h.h.iter_rows().map(|r| dot(w_obj, r)).collect();
    let b = params.glob_bias[(0, 0)];
    let mut m = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            m[(i, j)] = sigmoid(sub[i] + obj[j] + b);
        }
    }
    Ok(m)
}

/// Runs all three components, tagging only `relations`.
pub fn predict_bundle(
    h: &EncoderOutput,
    params: &DecoderParams,
    relations: &[usize],
) -> Result<PredictionBundle> {
    let p_rel = predict_relations(h, params)?;
    let corr = global_correspondence(h, params)?;
    let tag_dists = relations
        .iter()
        .map(|&r| Ok((r, tag_sequences(h, r, params)?)))
        .collect::<Result<_>>()?;
    Ok(PredictionBundle {
        p_rel,
        tag_dists,
        corr,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(11)
    }

    fn random_h(n: usize, d: usize, rng: &mut ChaCha8Rng) -> EncoderOutput {
        EncoderOutput::new(Matrix::uniform(n, d, 1.5, rng))
    }

    fn sig(x: f64) -> f64 {
        1.0 / (1.0 + (-x).exp())
    }

    #[test]
    fn zero_params_give_uniform_outputs() {
        let mut r = rng();
        let h = random_h(3, 4, &mut r);
        for mode in [TaggingMode::Dual, TaggingMode::Single] {
            let p = DecoderParams::zeros(4, 2, mode);
            assert!(predict_relations(&h, &p).unwrap().iter().all(|&x| x == 0.5));
            let corr = global_correspondence(&h, &p).unwrap();
            assert!(corr.as_slice().iter().all(|&x| x == 0.5));
        }
        let p = DecoderParams::zeros(4, 2, TaggingMode::Dual);
        let tags = tag_sequences(&h, 1, &p).unwrap();
        for m in [&tags.subject, &tags.object] {
            for x in m.as_slice() {
                assert!((x - 1.0 / 3.0).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn bias_drives_probability_up_monotonically() {
        let mut r = rng();
        let h = random_h(3, 4, &mut r);
        let mut p = DecoderParams::init(4, 3, TaggingMode::Dual, &mut r);
        let mut last = 0.0;
        for b in [-5.0, -1.0, 0.0, 1.0, 5.0, 20.0] {
            p.rel_bias[(0, 1)] = b;
            let prob = predict_relations(&h, &p).unwrap()[1];
            assert!(prob > last);
            last = prob;
        }
        assert!(last > 0.999_999);
    }

    #[test]
    fn relation_prediction_matches_scalar_loop() {
        let mut r = rng();
        let (n, d, nr) = (5, 4, 3);
        let h = random_h(n, d, &mut r);
        let p = DecoderParams::init(d, nr, TaggingMode::Dual, &mut r);
        let got = predict_relations(&h, &p).unwrap();
        for k in 0..nr {
            let mut z = p.rel_bias.as_slice()[k];
            for i in 0..d {
                let mut mean = 0.0;
                for t in 0..n {
                    mean += h.h.as_slice()[t * d + i];
                }
                mean /= n as f64;
                z += p.rel_weight.as_slice()[i * nr + k] * mean;
            }
            assert!((got[k] - sig(z)).abs() < 1e-9);
        }
    }

    #[test]
    fn select_relations_examples() {
        assert_eq!(select_relations(&[0.9, 0.3], 0.5), vec![0]);
        assert!(select_relations(&[0.5, 0.5], 0.5).is_empty());
        assert_eq!(select_relations(&[0.6, 0.7, 0.1], 0.55), vec![0, 1]);
    }

    #[test]
    fn selection_equals_logit_threshold() {
        let mut r = rng();
        for _ in 0..50 {
            let h = random_h(4, 5, &mut r);
            let p = DecoderParams::init(5, 6, TaggingMode::Dual, &mut r);
            let logits = relation_logits(&h, &p).unwrap();
            let probs = predict_relations(&h, &p).unwrap();
            for lambda in [0.2, 0.5, 0.8] {
                let cut = (lambda / (1.0 - lambda) as f64).ln();
                let by_logit: Vec<usize> = (0..6).filter(|&k| logits[k] > cut).collect();
                assert_eq!(select_relations(&probs, lambda), by_logit);
            }
        }
    }

    #[test]
    fn tagging_matches_scalar_loop() {
        let mut r = rng();
        let (n, d, nr) = (3, 4, 2);
        let h = random_h(n, d, &mut r);
        let p = DecoderParams::init(d, nr, TaggingMode::Dual, &mut r);
        let TaggerParams::Dual {
            sub_weight,
            sub_bias,
            obj_weight,
            obj_bias,
        } = &p.tagger
        else {
            unreachable!()
        };
        let rel = 1;
        let got = tag_sequences(&h, rel, &p).unwrap();
        for (w, b, out) in [
            (sub_weight, sub_bias, &got.subject),
            (obj_weight, obj_bias, &got.object),
        ] {
            for t in 0..n {
                let mut z = [0.0; 3];
                for (c, zc) in z.iter_mut().enumerate() {
                    *zc = b.as_slice()[c];
                    for i in 0..d {
                        let v = h.h.as_slice()[t * d + i]
                            + p.relation_embedding.as_slice()[i * nr + rel];
                        *zc += w.as_slice()[i * 3 + c] * v;
                    }
                }
                let total: f64 = z.iter().map(|x| x.exp()).sum();
                for c in 0..3 {
                    assert!((out[(t, c)] - z[c].exp() / total).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn tag_rows_are_stochastic_in_both_modes() {
        let mut r = rng();
        for mode in [TaggingMode::Dual, TaggingMode::Single] {
            let h = random_h(6, 4, &mut r);
            let mut p = DecoderParams::init(4, 3, mode, &mut r);
            p.scale(7.0);
            for rel in 0..3 {
                let tags = tag_sequences(&h, rel, &p).unwrap();
                for m in [&tags.subject, &tags.object] {
                    for row in m.iter_rows() {
                        assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-6);
                        assert!(row.iter().all(|&x| (0.0..=1.0).contains(&x)));
                    }
                }
                assert_eq!(tags.joint.is_some(), mode == TaggingMode::Single);
            }
        }
    }

    #[test]
    fn correspondence_matches_scalar_loop() {
        let mut r = rng();
        let (n, d) = (3, 4);
        let h = random_h(n, d, &mut r);
        let p = DecoderParams::init(d, 2, TaggingMode::Dual, &mut r);
        let m = global_correspondence(&h, &p).unwrap();
        let w = p.glob_weight.as_slice();
        for i in 0..n {
            for j in 0..n {
                let mut z = p.glob_bias.as_slice()[0];
                for k in 0..d {
                    z += w[k] * h.h.as_slice()[i * d + k];
                    z += w[d + k] * h.h.as_slice()[j * d + k];
                }
                assert!((m[(i, j)] - sig(z)).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn correspondence_single_token_and_locality() {
        let mut r = rng();
        let p = DecoderParams::init(4, 2, TaggingMode::Dual, &mut r);
        let h1 = random_h(1, 4, &mut r);
        assert_eq!(global_correspondence(&h1, &p).unwrap().shape(), (1, 1));

        let h = random_h(4, 4, &mut r);
        let base = global_correspondence(&h, &p).unwrap();
        let mut perturbed = h.clone();
        perturbed.h.row_mut(3).iter_mut().for_each(|x| *x += 0.7);
        let after = global_correspondence(&perturbed, &p).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(base[(i, j)], after[(i, j)]);
            }
        }
        assert_ne!(base[(3, 0)], after[(3, 0)]);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let mut r = rng();
        let p = DecoderParams::zeros(4, 2, TaggingMode::Dual);
        let h = random_h(3, 5, &mut r);
        assert!(matches!(
            predict_relations(&h, &p),
            Err(Error::DimensionMismatch(_))
        ));
        assert!(matches!(
            tag_sequences(&h, 0, &p),
            Err(Error::DimensionMismatch(_))
        ));
        assert!(matches!(
            global_correspondence(&h, &p),
            Err(Error::DimensionMismatch(_))
        ));
        let h = random_h(3, 4, &mut r);
        assert!(matches!(
            tag_sequences(&h, 2, &p),
            Err(Error::UnknownRelation { .. })
        ));
    }
}
