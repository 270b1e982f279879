//! Training and evaluation of the correspondence network, emotion probes on
//! frozen embeddings, and crossmodal retrieval.

mod eval;
mod probe;
mod retrieve;
mod trainer;

pub use eval::{embed_store, evaluate_correspondence, score_pairs, Confusion, EvalReport};
pub use probe::{train_probe, ProbeConfig, ProbeOutcome, ProbeSample};
pub use retrieve::{retrieval_scores, retrieve, RetrievalHit};
pub use trainer::{init_model, train, EpochStats, TrainConfig, TrainOutcome, TrainReport};

use crate::error::{Error, Result};
use crate::io::FeatureStore;

/// Image embeddings and music features that pair ids refer to.
#[derive(Debug, Clone, Copy)]
pub struct Stores<'a> {
    pub images: &'a FeatureStore,
    pub music: &'a FeatureStore,
}

impl<'a> Stores<'a> {
    pub fn new(images: &'a FeatureStore, music: &'a FeatureStore) -> Self {
        Self { images, music }
    }
}

/// Rows of `store` for `ids`, stacked into one buffer.
pub(crate) fn gather(store: &FeatureStore, rows: impl Iterator<Item = usize>) -> Vec<f32> {
    let mut out = Vec::new();
    for r in rows {
        out.extend_from_slice(store.row(r));
    }
    out
}

pub(crate) fn locate(store: &FeatureStore, id: &str, what: &str) -> Result<usize> {
    store.position(id).ok_or_else(|| Error::data(format!("{what} {id} not found in store")))
}
