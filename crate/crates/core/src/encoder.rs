//! Token encoders.
//!
//! Anything that maps a [`Sentence`] to one `d`-dimensional row per token
//! implements [`TokenEncoder`]. The crate ships [`DeskEncoder`], a small
//! trainable encoder: token embeddings followed by residual windowed
//! convolutions with `tanh`, so every row sees `layers * window` neighbours
//! on each side. Pretrained subword models plug in through
//! [`SubwordEncoder`] + [`FirstSubwordPooling`].

use std::collections::HashMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{ParamVisitor, ParamVisitorMut, Parameters};
use crate::tensor::Matrix;
use crate::types::Sentence;

/// Unknown lowercase or generic token.
pub const UNK: &str = "<unk>";
pub const UNK_ID: usize = 0;

/// Orthographic class of a token.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Shape {
    Lower,
    Capitalized,
    Upper,
    Digit,
    Punct,
    Other,
}

impl Shape {
    pub const COUNT: usize = 6;
    pub const ALL: [Shape; Shape::COUNT] = [
        Shape::Lower,
        Shape::Capitalized,
        Shape::Upper,
        Shape::Digit,
        Shape::Punct,
        Shape::Other,
    ];

    pub fn of(token: &str) -> Shape {
        let mut chars = token.chars();
        let first = match chars.next() {
            Some(c) => c,
            None => return Shape::Other,
        };
        if !token.chars().any(char::is_alphanumeric) {
            return Shape::Punct;
        }
        if token.chars().any(|c| c.is_numeric()) {
            return Shape::Digit;
        }
        let rest_lower = chars.clone().all(|c| !c.is_uppercase());
        let rest_upper = chars.all(|c| !c.is_lowercase());
        if first.is_uppercase() {
            if token.chars().count() > 1 && rest_upper {
                Shape::Upper
            } else if rest_lower {
                Shape::Capitalized
            } else {
                Shape::Other
            }
        } else if token.chars().all(|c| !c.is_uppercase()) {
            Shape::Lower
        } else {
            Shape::Other
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    /// Reserved vocabulary entry for unknown tokens of this shape; its id
    /// equals [`Shape::index`].
    pub fn unk_token(self) -> &'static str {
        match self {
            Shape::Lower => UNK,
            Shape::Capitalized => "<unk:Xx>",
            Shape::Upper => "<unk:XX>",
            Shape::Digit => "<unk:0>",
            Shape::Punct => "<unk:.>",
            Shape::Other => "<unk:?>",
        }
    }
}

/// Encoded sentence: `n` rows by `d` columns.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderOutput {
    pub h: Matrix,
}

impl EncoderOutput {
    pub fn new(h: Matrix) -> Self {
        EncoderOutput { h }
    }

    pub fn len(&self) -> usize {
        self.h.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.h.rows() == 0
    }

    pub fn dim(&self) -> usize {
        self.h.cols()
    }
}

/// Column-wise mean over token rows.
pub fn avgpool(h: &EncoderOutput) -> Vec<f64> {
    h.h.column_means()
}

pub trait TokenEncoder {
    fn dim(&self) -> usize;

    fn max_len(&self) -> usize;

    fn encode(&self, sentence: &Sentence) -> Result<EncoderOutput>;
}

/// Token to id map. The first [`Shape::COUNT`] ids are the per-shape
/// unknown-token entries.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    shapes: Vec<Shape>,
    index: HashMap<String, usize>,
}

impl Default for Vocabulary {
    fn default() -> Self {
        let mut vocab = Vocabulary {
            tokens: Vec::new(),
            shapes: Vec::new(),
            index: HashMap::new(),
        };
        for shape in Shape::ALL {
            vocab.push(shape.unk_token(), shape);
        }
        vocab
    }
}

impl Vocabulary {
    fn push(&mut self, token: &str, shape: Shape) {
        self.index.insert(token.to_owned(), self.tokens.len());
        self.tokens.push(token.to_owned());
        self.shapes.push(shape);
    }

    /// Builds a vocabulary in first-seen order.
    pub fn build<'a>(tokens: impl IntoIterator<Item = &'a str>) -> Self {
        let mut vocab = Vocabulary::default();
        for tok in tokens {
            if !vocab.index.contains_key(tok) {
                vocab.push(tok, Shape::of(tok));
            }
        }
        vocab
    }

    pub fn id(&self, token: &str) -> usize {
        self.index
            .get(token)
            .copied()
            .unwrap_or_else(|| Shape::of(token).index())
    }

    pub fn shape(&self, id: usize) -> Shape {
        self.shapes[id]
    }

    /// Unknown-token id with the same shape as `id`.
    pub fn unk_for(&self, id: usize) -> usize {
        self.shapes[id].index()
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn ids(&self, sentence: &Sentence) -> Vec<usize> {
        sentence.tokens().iter().map(|t| self.id(t)).collect()
    }
}

impl Serialize for Vocabulary {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.tokens[Shape::COUNT..].serialize(s)
    }
}

impl<'de> Deserialize<'de> for Vocabulary {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let tokens = Vec::<String>::deserialize(d)?;
        let mut vocab = Vocabulary::default();
        for tok in &tokens {
            if vocab.index.contains_key(tok) {
                return Err(serde::de::Error::custom(format!(
                    "duplicate or reserved vocabulary entry `{tok}`"
                )));
            }
            vocab.push(tok, Shape::of(tok));
        }
        Ok(vocab)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EncoderConfig {
    pub dim: usize,
    /// Number of residual convolution layers (0 gives a bag of embeddings).
    pub layers: usize,
    /// Neighbours seen on each side per layer.
    pub window: usize,
    pub max_len: usize,
    /// Embeddings start uniform in `[-embedding_init, embedding_init]`.
    pub embedding_init: f64,
    /// Adds a final layer that mixes in the means of all tokens to the left
    /// and to the right of each position.
    pub context: bool,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        EncoderConfig {
            dim: 64,
            layers: 2,
            window: 2,
            max_len: 100,
            embedding_init: 1.0,
            context: true,
        }
    }
}

impl EncoderConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim < 2 {
            return Err(Error::InvalidArgument(format!(
                "encoder dim must be >= 2, got {}",
                self.dim
            )));
        }
        if !(self.embedding_init > 0.0 && self.embedding_init.is_finite()) {
            return Err(Error::InvalidArgument(
                "embedding_init must be positive".into(),
            ));
        }
        if self.max_len == 0 {
            return Err(Error::InvalidArgument("max_len must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvLayer {
    /// `2 * window + 1` kernels, each `d x d` (output row, input column);
    /// kernel `k` reads the token at offset `k - window`.
    pub kernels: Vec<Matrix>,
    pub bias: Matrix,
}

/// `y_t = x_t + tanh(b + S x_t + L mean(x_<t) + R mean(x_>t))`; an empty
/// side contributes zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextLayer {
    pub self_kernel: Matrix,
    pub left: Matrix,
    pub right: Matrix,
    pub bias: Matrix,
}

impl ContextLayer {
    fn zeros(d: usize) -> Self {
        ContextLayer {
            self_kernel: Matrix::zeros(d, d),
            left: Matrix::zeros(d, d),
            right: Matrix::zeros(d, d),
            bias: Matrix::zeros(1, d),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderParams {
    pub embedding: Matrix,
    /// One row per [`Shape`], added to every token embedding.
    pub shape_embedding: Matrix,
    pub layers: Vec<ConvLayer>,
    #[serde(default)]
    pub context: Option<ContextLayer>,
}

impl EncoderParams {
    pub fn init<R: Rng + ?Sized>(config: &EncoderConfig, vocab_size: usize, rng: &mut R) -> Self {
        let d = config.dim;
        let embedding = Matrix::uniform(vocab_size, d, config.embedding_init, rng);
        let shape_embedding = Matrix::uniform(Shape::COUNT, d, config.embedding_init, rng);
        let taps = 2 * config.window + 1;
        let bound = 1.0 / ((d * taps) as f64).sqrt();
        let layers = (0..config.layers)
            .map(|_| ConvLayer {
                kernels: (0..taps)
                    .map(|_| Matrix::uniform(d, d, bound, rng))
                    .collect(),
                bias: Matrix::zeros(1, d),
            })
            .collect();
        let context = config.context.then(|| {
            let bound = 1.0 / ((3 * d) as f64).sqrt();
            ContextLayer {
                self_kernel: Matrix::uniform(d, d, bound, rng),
                left: Matrix::uniform(d, d, bound, rng),
                right: Matrix::uniform(d, d, bound, rng),
                bias: Matrix::zeros(1, d),
            }
        });
        EncoderParams {
            embedding,
            shape_embedding,
            layers,
            context,
        }
    }

    pub fn zeros_like(&self) -> Self {
        EncoderParams {
            embedding: Matrix::zeros(self.embedding.rows(), self.embedding.cols()),
            shape_embedding: Matrix::zeros(Shape::COUNT, self.shape_embedding.cols()),
            layers: self
                .layers
                .iter()
                .map(|l| ConvLayer {
                    kernels: l
                        .kernels
                        .iter()
                        .map(|k| Matrix::zeros(k.rows(), k.cols()))
                        .collect(),
                    bias: Matrix::zeros(1, l.bias.cols()),
                })
                .collect(),
            context: self
                .context
                .as_ref()
                .map(|c| ContextLayer::zeros(c.bias.cols())),
        }
    }
}

impl Parameters for EncoderParams {
    fn visit(&self, f: &mut ParamVisitor<'_>) {
        f("encoder.embedding", &self.embedding);
        f("encoder.shape_embedding", &self.shape_embedding);
        for (l, layer) in self.layers.iter().enumerate() {
            for (k, kernel) in layer.kernels.iter().enumerate() {
                f(&format!("encoder.layer{l}.kernel{k}"), kernel);
            }
            f(&format!("encoder.layer{l}.bias"), &layer.bias);
        }
        if let Some(c) = &self.context {
            f("encoder.context.self", &c.self_kernel);
            f("encoder.context.left", &c.left);
            f("encoder.context.right", &c.right);
            f("encoder.context.bias", &c.bias);
        }
    }

    fn visit_mut(&mut self, f: &mut ParamVisitorMut<'_>) {
        f("encoder.embedding", &mut self.embedding);
        f("encoder.shape_embedding", &mut self.shape_embedding);
        for (l, layer) in self.layers.iter_mut().enumerate() {
            for (k, kernel) in layer.kernels.iter_mut().enumerate() {
                f(&format!("encoder.layer{l}.kernel{k}"), kernel);
            }
            f(&format!("encoder.layer{l}.bias"), &mut layer.bias);
        }
        if let Some(c) = &mut self.context {
            f("encoder.context.self", &mut c.self_kernel);
            f("encoder.context.left", &mut c.left);
            f("encoder.context.right", &mut c.right);
            f("encoder.context.bias", &mut c.bias);
        }
    }
}

#[derive(Debug, Clone)]
struct ContextTrace {
    input: Matrix,
    left: Matrix,
    right: Matrix,
    activation: Matrix,
}

/// Means of the rows strictly before and strictly after each position.
fn side_means(x: &Matrix) -> (Matrix, Matrix) {
    let (n, d) = (x.rows(), x.cols());
    let mut left = Matrix::zeros(n, d);
    let mut right = Matrix::zeros(n, d);
    let mut acc = vec![0.0; d];
    for t in 0..n {
        if t > 0 {
            for (l, a) in left.row_mut(t).iter_mut().zip(&acc) {
                *l = a / t as f64;
            }
        }
        for (a, v) in acc.iter_mut().zip(x.row(t)) {
            *a += v;
        }
    }
    acc.iter_mut().for_each(|a| *a = 0.0);
    for t in (0..n).rev() {
        let after = n - 1 - t;
        if after > 0 {
            for (r, a) in right.row_mut(t).iter_mut().zip(&acc) {
                *r = a / after as f64;
            }
        }
        for (a, v) in acc.iter_mut().zip(x.row(t)) {
            *a += v;
        }
    }
    (left, right)
}

fn add_matvec(out: &mut [f64], m: &Matrix, v: &[f64]) {
    for (o, z) in out.iter_mut().enumerate() {
        *z += crate::tensor::dot(m.row(o), v);
    }
}

fn add_outer(g: &mut Matrix, dz: &[f64], v: &[f64]) {
    for (o, &dzo) in dz.iter().enumerate() {
        if dzo == 0.0 {
            continue;
        }
        for (gv, x) in g.row_mut(o).iter_mut().zip(v) {
            *gv += dzo * x;
        }
    }
}

fn add_tmatvec(out: &mut [f64], m: &Matrix, dz: &[f64]) {
    for (o, &dzo) in dz.iter().enumerate() {
        for (dv, k) in out.iter_mut().zip(m.row(o)) {
            *dv += k * dzo;
        }
    }
}

/// Intermediate values kept for backpropagation.
#[derive(Debug, Clone)]
pub struct EncoderTrace {
    ids: Vec<usize>,
    /// Input to each layer; `inputs[0]` is the embedding lookup.
    inputs: Vec<Matrix>,
    /// `tanh` output of each layer.
    activations: Vec<Matrix>,
    context: Option<ContextTrace>,
    pub output: EncoderOutput,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeskEncoder {
    pub config: EncoderConfig,
    pub vocab: Vocabulary,
    pub params: EncoderParams,
}

impl DeskEncoder {
    pub fn new<R: Rng + ?Sized>(
        config: EncoderConfig,
        vocab: Vocabulary,
        rng: &mut R,
    ) -> Result<Self> {
        config.validate()?;
        let params = EncoderParams::init(&config, vocab.len(), rng);
        Ok(DeskEncoder {
            config,
            vocab,
            params,
        })
    }

    pub fn ids(&self, sentence: &Sentence) -> Result<Vec<usize>> {
        sentence.check_len(self.config.max_len)?;
        Ok(self.vocab.ids(sentence))
    }

    pub fn forward(&self, ids: &[usize]) -> EncoderTrace {
        self.forward_with(&self.params, ids)
    }

    pub fn forward_with(&self, params: &EncoderParams, ids: &[usize]) -> EncoderTrace {
        let n = ids.len();
        let d = self.config.dim;
        let w = self.config.window as isize;

        let mut x = Matrix::zeros(n, d);
        for (t, &id) in ids.iter().enumerate() {
            let shape = params.shape_embedding.row(self.vocab.shape(id).index());
            for ((x, e), s) in x
                .row_mut(t)
                .iter_mut()
                .zip(params.embedding.row(id))
                .zip(shape)
            {
                *x = e + s;
            }
        }

        let mut inputs = Vec::with_capacity(params.layers.len());
        let mut activations = Vec::with_capacity(params.layers.len());
        for layer in &params.layers {
            let mut a = Matrix::zeros(n, d);
            for t in 0..n {
                let z = a.row_mut(t);
                z.copy_from_slice(layer.bias.row(0));
                for (k, kernel) in layer.kernels.iter().enumerate() {
                    let src = t as isize + k as isize - w;
                    if src < 0 || src >= n as isize {
                        continue;
                    }
                    let xs = x.row(src as usize);
                    for (o, zo) in z.iter_mut().enumerate() {
                        *zo += crate::tensor::dot(kernel.row(o), xs);
                    }
                }
                z.iter_mut().for_each(|v| *v = v.tanh());
            }
            let mut y = x.clone();
            y.add_assign(&a);
            inputs.push(x);
            activations.push(a);
            x = y;
        }

        let context = params.context.as_ref().map(|c| {
            let (left, right) = side_means(&x);
            let mut a = Matrix::zeros(n, d);
            for t in 0..n {
                let z = a.row_mut(t);
                z.copy_from_slice(c.bias.row(0));
                add_matvec(z, &c.self_kernel, x.row(t));
                add_matvec(z, &c.left, left.row(t));
                add_matvec(z, &c.right, right.row(t));
                z.iter_mut().for_each(|v| *v = v.tanh());
            }
            let trace = ContextTrace {
                input: x.clone(),
                left,
                right,
                activation: a,
            };
            x.add_assign(&trace.activation);
            trace
        });

        EncoderTrace {
            ids: ids.to_vec(),
            inputs,
            activations,
            context,
            output: EncoderOutput::new(x),
        }
    }

    /// Accumulates parameter gradients given `dh`, the loss gradient with
    /// respect to the encoder output.
    pub fn backward(&self, trace: &EncoderTrace, dh: &Matrix, grads: &mut EncoderParams) {
        let n = trace.ids.len();
        let d = self.config.dim;
        let w = self.config.window as isize;
        let mut dy = dh.clone();

        if let (Some(c), Some(ct)) = (&self.params.context, &trace.context) {
            let g = grads.context.as_mut().expect("context gradient buffer");
            let mut dx = dy.clone();
            // Per-position gradients of the left and right means, pre-scaled
            // by the mean's denominator.
            let mut gl = Matrix::zeros(n, d);
            let mut gr = Matrix::zeros(n, d);
            for t in 0..n {
                let dz: Vec<f64> = dy
                    .row(t)
                    .iter()
                    .zip(ct.activation.row(t))
                    .map(|(g, a)| g * (1.0 - a * a))
                    .collect();
                for (b, v) in g.bias.row_mut(0).iter_mut().zip(&dz) {
                    *b += v;
                }
                add_outer(&mut g.self_kernel, &dz, ct.input.row(t));
                add_outer(&mut g.left, &dz, ct.left.row(t));
                add_outer(&mut g.right, &dz, ct.right.row(t));
                add_tmatvec(dx.row_mut(t), &c.self_kernel, &dz);
                if t > 0 {
                    let row = gl.row_mut(t);
                    add_tmatvec(row, &c.left, &dz);
                    row.iter_mut().for_each(|v| *v /= t as f64);
                }
                let after = n - 1 - t;
                if after > 0 {
                    let row = gr.row_mut(t);
                    add_tmatvec(row, &c.right, &dz);
                    row.iter_mut().for_each(|v| *v /= after as f64);
                }
            }
            // x_s feeds the left mean of every t > s and the right mean of every t < s.
            let mut acc = vec![0.0; d];
            for s in (0..n).rev() {
                for (dv, a) in dx.row_mut(s).iter_mut().zip(&acc) {
                    *dv += a;
                }
                for (a, v) in acc.iter_mut().zip(gl.row(s)) {
                    *a += v;
                }
            }
            acc.iter_mut().for_each(|a| *a = 0.0);
            for s in 0..n {
                for (dv, a) in dx.row_mut(s).iter_mut().zip(&acc) {
                    *dv += a;
                }
                for (a, v) in acc.iter_mut().zip(gr.row(s)) {
                    *a += v;
                }
            }
            dy = dx;
        }

        for (l, layer) in self.params.layers.iter().enumerate().rev() {
            let x = &trace.inputs[l];
            let a = &trace.activations[l];
            let g = &mut grads.layers[l];
            // Residual path.
            let mut dx = dy.clone();
            for t in 0..n {
                let dz: Vec<f64> = dy
                    .row(t)
                    .iter()
                    .zip(a.row(t))
                    .map(|(g, a)| g * (1.0 - a * a))
                    .collect();
                for (b, v) in g.bias.row_mut(0).iter_mut().zip(&dz) {
                    *b += v;
                }
                for (k, kernel) in layer.kernels.iter().enumerate() {
                    let src = t as isize + k as isize - w;
                    if src < 0 || src >= n as isize {
                        continue;
                    }
                    let src = src as usize;
                    let xs = x.row(src);
                    let gk = &mut g.kernels[k];
                    for (o, &dzo) in dz.iter().enumerate() {
                        if dzo == 0.0 {
                            continue;
                        }
                        for (gv, xv) in gk.row_mut(o).iter_mut().zip(xs) {
                            *gv += dzo * xv;
                        }
                    }
                    let dxs = dx.row_mut(src);
                    for (o, &dzo) in dz.iter().enumerate() {
                        for (i, dv) in dxs.iter_mut().enumerate().take(d) {
                            *dv += kernel[(o, i)] * dzo;
                        }
                    }
                }
            }
            dy = dx;
        }

        for (t, &id) in trace.ids.iter().enumerate() {
            for (g, v) in grads.embedding.row_mut(id).iter_mut().zip(dy.row(t)) {
                *g += v;
            }
            let shape = self.vocab.shape(id).index();
            for (g, v) in grads
                .shape_embedding
                .row_mut(shape)
                .iter_mut()
                .zip(dy.row(t))
            {
                *g += v;
            }
        }
    }
}

impl TokenEncoder for DeskEncoder {
    fn dim(&self) -> usize {
        self.config.dim
    }

    fn max_len(&self) -> usize {
        self.config.max_len
    }

    fn encode(&self, sentence: &Sentence) -> Result<EncoderOutput> {
        let ids = self.ids(sentence)?;
        Ok(self.forward(&ids).output)
    }
}

/// A subword-level encoder, e.g. a pretrained transformer.
pub trait SubwordEncoder {
    fn dim(&self) -> usize;

    fn max_len(&self) -> usize;

    /// Splits one word into at least one piece.
    fn split(&self, word: &str) -> Vec<String>;

    /// One row per piece.
    fn encode_pieces(&self, pieces: &[String]) -> Result<Matrix>;
}

/// Represents each word by the row of its first subword piece.
#[derive(Debug, Clone)]
pub struct FirstSubwordPooling<E>(pub E);

impl<E: SubwordEncoder> TokenEncoder for FirstSubwordPooling<E> {
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn max_len(&self) -> usize {
        self.0.max_len()
    }

    fn encode(&self, sentence: &Sentence) -> Result<EncoderOutput> {
        sentence.check_len(self.0.max_len())?;
        let mut pieces = Vec::new();
        let mut first = Vec::with_capacity(sentence.len());
        for word in sentence.tokens() {
            let split = self.0.split(word);
            if split.is_empty() {
                return Err(Error::DimensionMismatch(format!(
                    "word `{word}` split into zero pieces"
                )));
            }
            first.push(pieces.len());
            pieces.extend(split);
        }
        let rows = self.0.encode_pieces(&pieces)?;
        if rows.rows() != pieces.len() || rows.cols() != self.0.dim() {
            return Err(Error::DimensionMismatch(format!(
                "subword encoder returned {:?} for {} pieces",
                rows.shape(),
                pieces.len()
            )));
        }
        let mut h = Matrix::zeros(sentence.len(), self.0.dim());
        for (t, &p) in first.iter().enumerate() {
            h.row_mut(t).copy_from_slice(rows.row(p));
        }
        Ok(EncoderOutput::new(h))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn encoder(layers: usize) -> DeskEncoder {
        let vocab = Vocabulary::build(["a", "b", "c", "d"]);
        let config = EncoderConfig {
            dim: 6,
            layers,
            window: 1,
            max_len: 10,
            context: layers > 0,
            ..EncoderConfig::default()
        };
        DeskEncoder::new(config, vocab, &mut ChaCha8Rng::seed_from_u64(3)).unwrap()
    }

    fn sentence(text: &str) -> Sentence {
        Sentence::from_text("s", text).unwrap()
    }

    #[test]
    fn shape_and_determinism() {
        let enc = encoder(2);
        let out = enc.encode(&sentence("a")).unwrap();
        assert_eq!(out.h.shape(), (1, 6));
        let s = sentence("a b c");
        assert_eq!(enc.encode(&s).unwrap(), enc.encode(&s).unwrap());
        assert!(enc.encode(&s).unwrap().h.all_finite());
    }

    #[test]
    fn unknown_tokens_use_shape_unk_row() {
        let enc = encoder(0);
        let row = |id: usize, shape: Shape| -> Vec<f64> {
            enc.params
                .embedding
                .row(id)
                .iter()
                .zip(enc.params.shape_embedding.row(shape.index()))
                .map(|(a, b)| a + b)
                .collect()
        };
        let out = enc.encode(&sentence("zzz Zzz")).unwrap();
        assert_eq!(out.h.row(0), row(UNK_ID, Shape::Lower).as_slice());
        assert_eq!(
            out.h.row(1),
            row(Shape::Capitalized.index(), Shape::Capitalized).as_slice()
        );
    }

    #[test]
    fn shapes() {
        let cases = [
            ("the", Shape::Lower),
            ("Paris", Shape::Capitalized),
            ("NYT", Shape::Upper),
            ("1990s", Shape::Digit),
            (",", Shape::Punct),
            ("iPhone", Shape::Other),
            ("A", Shape::Capitalized),
        ];
        for (tok, shape) in cases {
            assert_eq!(Shape::of(tok), shape, "{tok}");
        }
    }

    #[test]
    fn vocabulary_serde_round_trip() {
        let v = Vocabulary::build(["a", "B", "a", "3"]);
        assert_eq!(v.len(), Shape::COUNT + 3);
        let json = serde_json::to_string(&v).unwrap();
        assert_eq!(json, r#"["a","B","3"]"#);
        let back: Vocabulary = serde_json::from_str(&json).unwrap();
        assert_eq!(back, v);
        assert_eq!(v.unk_for(v.id("B")), Shape::Capitalized.index());
        assert!(serde_json::from_str::<Vocabulary>(r#"["<unk>"]"#).is_err());
    }

    #[test]
    fn too_long_is_rejected() {
        let enc = encoder(1);
        let s = sentence("a a a a a a a a a a a");
        assert!(matches!(
            enc.encode(&s),
            Err(Error::SentenceTooLong {
                len: 11,
                max_len: 10
            })
        ));
    }

    #[test]
    fn context_mixing_changes_rows() {
        let enc = encoder(2);
        let x = enc.encode(&sentence("a b c")).unwrap();
        let y = enc.encode(&sentence("d b a")).unwrap();
        assert_ne!(x.h.row(1), y.h.row(1));
    }

    #[test]
    fn backward_matches_central_differences() {
        use rand::Rng;
        let enc = encoder(2);
        let ids = enc.ids(&sentence("a b zz C d a")).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let n = ids.len();
        let weights: Vec<f64> = (0..n * 6).map(|_| rng.random_range(-1.0..1.0)).collect();
        let loss = |p: &EncoderParams| -> f64 {
            let h = enc.forward_with(p, &ids).output.h;
            (0..n)
                .flat_map(|t| (0..6).map(move |i| (t, i)))
                .map(|(t, i)| weights[t * 6 + i] * h[(t, i)])
                .sum()
        };
        let mut dh = Matrix::zeros(n, 6);
        for t in 0..n {
            for i in 0..6 {
                dh[(t, i)] = weights[t * 6 + i];
            }
        }
        let mut grads = enc.params.zeros_like();
        enc.backward(&enc.forward(&ids), &dh, &mut grads);
        let mut analytic = Vec::new();
        grads.visit(&mut |name, m| analytic.push((name.to_string(), m.clone())));
        let mut checked = 0;
        for (name, g) in analytic {
            for idx in 0..g.rows() * g.cols() {
                let (r, c) = (idx / g.cols(), idx % g.cols());
                let probe = |delta: f64| {
                    let mut p = enc.params.clone();
                    p.visit_mut(&mut |nm, m| {
                        if nm == name {
                            m[(r, c)] += delta;
                        }
                    });
                    loss(&p)
                };
                let numeric = (probe(1e-6) - probe(-1e-6)) / 2e-6;
                let err =
                    (numeric - g[(r, c)]).abs() / numeric.abs().max(g[(r, c)].abs()).max(1e-6);
                assert!(err < 1e-4, "{name}[{r},{c}]: {numeric} vs {}", g[(r, c)]);
                checked += 1;
            }
        }
        assert!(checked > 0 && grads.context.is_some());
    }

    #[test]
    fn bag_encoder_permutation_only_moves_rows() {
        let enc = encoder(0);
        let x = enc.encode(&sentence("a b c")).unwrap();
        let y = enc.encode(&sentence("c b a")).unwrap();
        assert_eq!(x.h.row(0), y.h.row(2));
        assert_eq!(x.h.row(1), y.h.row(1));
    }

    #[test]
    fn avgpool_examples() {
        let rows = EncoderOutput::new(Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]));
        assert_eq!(avgpool(&rows), vec![0.5, 0.5]);
        let same = EncoderOutput::new(Matrix::from_rows(&vec![vec![0.3, -2.0]; 4]));
        let pooled = avgpool(&same);
        assert!((pooled[0] - 0.3).abs() < 1e-12 && (pooled[1] + 2.0).abs() < 1e-12);
        let one = EncoderOutput::new(Matrix::from_rows(&[vec![7.0, 8.0]]));
        assert_eq!(avgpool(&one), vec![7.0, 8.0]);
    }

    struct CharPieces;

    impl SubwordEncoder for CharPieces {
        fn dim(&self) -> usize {
            2
        }
        fn max_len(&self) -> usize {
            10
        }
        fn split(&self, word: &str) -> Vec<String> {
            word.chars().map(String::from).collect()
        }
        fn encode_pieces(&self, pieces: &[String]) -> Result<Matrix> {
            let rows: Vec<Vec<f64>> = pieces
                .iter()
                .enumerate()
                .map(|(i, p)| vec![i as f64, p.as_bytes()[0] as f64])
                .collect();
            Ok(Matrix::from_rows(&rows))
        }
    }

    #[test]
    fn first_subword_pooling_picks_first_piece() {
        let enc = FirstSubwordPooling(CharPieces);
        let out = enc.encode(&sentence("ab c")).unwrap();
        assert_eq!(out.h.row(0), &[0.0, b'a' as f64]);
        assert_eq!(out.h.row(1), &[2.0, b'c' as f64]);
    }
}
