//! The relation, tagging and correspondence losses and their weighted sum.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::decoder::TagDistributions;
use crate::error::{Error, Result};
use crate::labeling::{single_sequence_targets, BinaryMatrix, RoleTags};
use crate::tensor::Matrix;

/// Probabilities are clamped to `[EPS, 1 - EPS]` before taking logs.
pub const EPS: f64 = 1e-12;

fn clamp(p: f64) -> f64 {
    p.clamp(EPS, 1.0 - EPS)
}

fn bce(p: f64, y: bool) -> f64 {
    let p = clamp(p);
    if y {
        -p.ln()
    } else {
        -(1.0 - p).ln()
    }
}

/// Mean binary cross-entropy over all relations.
pub fn loss_rel(p_rel: &[f64], rel_vector: &[bool]) -> Result<f64> {
    if p_rel.len() != rel_vector.len() {
        return Err(Error::LengthMismatch {
            expected: rel_vector.len(),
            actual: p_rel.len(),
        });
    }
    if p_rel.is_empty() {
        return Ok(0.0);
    }
    let total: f64 = p_rel.iter().zip(rel_vector).map(|(&p, &y)| bce(p, y)).sum();
    Ok(total / p_rel.len() as f64)
}

/// Gold-tag negative log-likelihood over the target relations.
///
/// Dual mode divides the subject plus object sum by `2 * n * |targets|`.
/// Single mode scores the 5-class distribution and divides by
/// `n * |targets|`. No targets gives zero.
pub fn loss_seq(
    tag_dists: &BTreeMap<usize, TagDistributions>,
    tag_targets: &BTreeMap<usize, RoleTags>,
) -> Result<f64> {
    if tag_targets.is_empty() {
        return Ok(0.0);
    }
    let mut total = 0.0;
    let mut positions = 0usize;
    for (k, targets) in tag_targets {
        let dists = tag_dists.get(k).ok_or(Error::MissingRelation(*k))?;
        let n = targets.subject.len();
        if dists.subject.rows() != n {
            return Err(Error::LengthMismatch {
                expected: n,
                actual: dists.subject.rows(),
            });
        }
        match &dists.joint {
            None => {
                for t in 0..n {
                    total -= clamp(dists.subject[(t, targets.subject[t].index())]).ln();
                    total -= clamp(dists.object[(t, targets.object[t].index())]).ln();
                }
                positions += 2 * n;
            }
            Some(joint) => {
                let gold = single_sequence_targets("", targets)?;
                for (t, g) in gold.into_iter().enumerate() {
                    total -= clamp(joint[(t, g)]).ln();
                }
                positions += n;
            }
        }
    }
    Ok(total / positions as f64)
}

/// Mean binary cross-entropy over all `n * n` cells.
pub fn loss_global(corr: &Matrix, corr_matrix: &BinaryMatrix) -> Result<f64> {
    let n = corr_matrix.size();
    if corr.shape() != (n, n) {
        return Err(Error::ShapeMismatch {
            expected: (n, n),
            actual: corr.shape(),
        });
    }
    if n == 0 {
        return Ok(0.0);
    }
    let total: f64 = corr
        .as_slice()
        .iter()
        .zip(corr_matrix.cells())
        .map(|(&p, &y)| bce(p, y))
        .sum();
    Ok(total / (n * n) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            alpha: 1.0,
            beta: 1.0,
            gamma: 1.0,
        }
    }
}

pub fn loss_total(l_rel: f64, l_seq: f64, l_global: f64, w: LossWeights) -> f64 {
    w.alpha * l_rel + w.beta * l_seq + w.gamma * l_global
}
