use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::decoder::{self, DecoderParams, PredictionBundle};
use crate::encoder::{DeskEncoder, EncoderConfig, EncoderOutput, TokenEncoder, Vocabulary};
use crate::error::{Error, Result};
use crate::params::{ParamVisitor, ParamVisitorMut, Parameters};
use crate::types::{RelationSet, Sentence, TaggingMode};

/// Which relations get tagged when scoring a sentence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RelationQuery {
    /// Only relations with probability above the threshold.
    Above(f64),
    /// Every relation in the set.
    All,
}

/// Anything that produces decoder outputs for a sentence.
pub trait Scorer {
    fn n_relations(&self) -> usize;

    fn bundle(&self, sentence: &Sentence, query: RelationQuery) -> Result<PredictionBundle>;
}

/// Encoder, decoder and the relation vocabulary they were trained on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Model {
    pub encoder: DeskEncoder,
    pub decoder: DecoderParams,
    pub relations: RelationSet,
}

impl Model {
    pub fn new<R: Rng + ?Sized>(
        config: EncoderConfig,
        vocab: Vocabulary,
        relations: RelationSet,
        mode: TaggingMode,
        rng: &mut R,
    ) -> Result<Self> {
        if relations.is_empty() {
            return Err(Error::InvalidArgument("relation set is empty".into()));
        }
        let d = config.dim;
        let encoder = DeskEncoder::new(config, vocab, rng)?;
        let decoder = DecoderParams::init(d, relations.len(), mode, rng);
        Ok(Model {
            encoder,
            decoder,
            relations,
        })
    }

    pub fn mode(&self) -> TaggingMode {
        self.decoder.mode()
    }

    pub fn encode(&self, sentence: &Sentence) -> Result<EncoderOutput> {
        self.encoder.encode(sentence)
    }
}

impl Scorer for Model {
    fn n_relations(&self) -> usize {
        self.relations.len()
    }

    fn bundle(&self, sentence: &Sentence, query: RelationQuery) -> Result<PredictionBundle> {
        let h = self.encode(sentence)?;
        let p_rel = decoder::predict_relations(&h, &self.decoder)?;
        let relations = match query {
            RelationQuery::Above(threshold) => decoder::select_relations(&p_rel, threshold),
            RelationQuery::All => (0..self.n_relations()).collect(),
        };
        decoder::predict_bundle(&h, &self.decoder, &relations)
    }
}

impl Parameters for Model {
    fn visit(&self, f: &mut ParamVisitor<'_>) {
        self.encoder.params.visit(f);
        self.decoder.visit(f);
    }

    fn visit_mut(&mut self, f: &mut ParamVisitorMut<'_>) {
        self.encoder.params.visit_mut(f);
        self.decoder.visit_mut(f);
    }
}
