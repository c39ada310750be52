//! Adam with decoupled weight decay and separate encoder/decoder rates.

use serde::{Deserialize, Serialize};

use crate::params::{is_bias, Parameters};
use crate::tensor::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamSettings {
    pub encoder_lr: f64,
    pub decoder_lr: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamW {
    pub settings: AdamSettings,
    step: u64,
    first: Vec<Matrix>,
    second: Vec<Matrix>,
}

impl AdamW {
    pub fn new<P: Parameters>(settings: AdamSettings, params: &P) -> Self {
        let mut first = Vec::new();
        params.visit(&mut |_, m| first.push(Matrix::zeros(m.rows(), m.cols())));
        let second = first.clone();
        AdamW {
            settings,
            step: 0,
            first,
            second,
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// Applies one update. Tensors whose name starts with `encoder.` use the
    /// encoder rate; biases are not decayed.
    pub fn step<P: Parameters, G: Parameters>(&mut self, params: &mut P, grads: &G) {
        self.step_scaled(params, grads, 1.0);
    }

    /// As [`AdamW::step`] with both learning rates multiplied by `lr_scale`.
    pub fn step_scaled<P: Parameters, G: Parameters>(
        &mut self,
        params: &mut P,
        grads: &G,
        lr_scale: f64,
    ) {
        self.step += 1;
        let s = self.settings;
        let bias1 = 1.0 - s.beta1.powi(self.step as i32);
        let bias2 = 1.0 - s.beta2.powi(self.step as i32);

        let mut flat = Vec::new();
        grads.visit(&mut |_, g| flat.push(g.as_slice().to_vec()));

        let mut idx = 0;
        let first = &mut self.first;
        let second = &mut self.second;
        params.visit_mut(&mut |name, p| {
            let lr = lr_scale
                * if name.starts_with("encoder.") {
                    s.encoder_lr
                } else {
                    s.decoder_lr
                };
            let decay = if is_bias(name) { 0.0 } else { s.weight_decay };
            let g = &flat[idx];
            let m = first[idx].as_mut_slice();
            let v = second[idx].as_mut_slice();
            for (((w, &gi), mi), vi) in p.as_mut_slice().iter_mut().zip(g).zip(m).zip(v) {
                *mi = s.beta1 * *mi + (1.0 - s.beta1) * gi;
                *vi = s.beta2 * *vi + (1.0 - s.beta2) * gi * gi;
                let m_hat = *mi / bias1;
                let v_hat = *vi / bias2;
                *w -= lr * (m_hat / (v_hat.sqrt() + s.eps) + decay * *w);
            }
            idx += 1;
        });
    }
}

/// Rescales `grads` so their global L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
pub fn clip_global_norm<G: Parameters>(grads: &mut G, max_norm: f64) -> f64 {
    let norm = grads.sum_squares().sqrt();
    if norm > max_norm && norm > 0.0 {
        grads.scale(max_norm / norm);
    }
    norm
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::{ParamVisitor, ParamVisitorMut};

    struct Pair {
        enc: Matrix,
        dec_bias: Matrix,
    }

    impl Parameters for Pair {
        fn visit(&self, f: &mut ParamVisitor<'_>) {
            f("encoder.w", &self.enc);
            f("decoder.bias", &self.dec_bias);
        }
        fn visit_mut(&mut self, f: &mut ParamVisitorMut<'_>) {
            f("encoder.w", &mut self.enc);
            f("decoder.bias", &mut self.dec_bias);
        }
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let settings = AdamSettings {
            encoder_lr: 0.1,
            decoder_lr: 0.01,
            weight_decay: 0.0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        };
        let mut p = Pair {
            enc: Matrix::row_vector(vec![1.0]),
            dec_bias: Matrix::row_vector(vec![1.0]),
        };
        let g = Pair {
            enc: Matrix::row_vector(vec![3.0]),
            dec_bias: Matrix::row_vector(vec![-2.0]),
        };
        let mut opt = AdamW::new(settings, &p);
        opt.step(&mut p, &g);
        // Bias-corrected first step is lr * sign(g).
        assert!((p.enc[(0, 0)] - 0.9).abs() < 1e-6);
        assert!((p.dec_bias[(0, 0)] - 1.01).abs() < 1e-6);
    }

    #[test]
    fn decay_skips_biases() {
        let settings = AdamSettings {
            encoder_lr: 0.1,
            decoder_lr: 0.1,
            weight_decay: 0.5,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        };
        let mut p = Pair {
            enc: Matrix::row_vector(vec![2.0]),
            dec_bias: Matrix::row_vector(vec![2.0]),
        };
        let g = Pair {
            enc: Matrix::row_vector(vec![0.0]),
            dec_bias: Matrix::row_vector(vec![0.0]),
        };
        let mut opt = AdamW::new(settings, &p);
        opt.step(&mut p, &g);
        assert!((p.enc[(0, 0)] - (2.0 - 0.1 * 0.5 * 2.0)).abs() < 1e-12);
        assert_eq!(p.dec_bias[(0, 0)], 2.0);
    }

    #[test]
    fn clipping_bounds_the_norm() {
        let mut g = Pair {
            enc: Matrix::row_vector(vec![3.0]),
            dec_bias: Matrix::row_vector(vec![4.0]),
        };
        assert_eq!(clip_global_norm(&mut g, 1.0), 5.0);
        assert!((g.sum_squares().sqrt() - 1.0).abs() < 1e-12);
        assert_eq!(clip_global_norm(&mut g, 10.0), g.sum_squares().sqrt());
    }
}
