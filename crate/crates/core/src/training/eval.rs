use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{gather, locate, Stores};
use crate::acpnet::{AcpModel, Modality};
use crate::dataset::CorrespondencePair;
use crate::error::{Error, Result};
use crate::io::FeatureStore;
use crate::neural::{softmax, Matrix};

const CHUNK: usize = 256;

/// Counts of decisions against labels, "positive" meaning a true correspondence.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub true_pos: usize,
    pub true_neg: usize,
    pub false_pos: usize,
    pub false_neg: usize,
}

impl Confusion {
    pub fn record(&mut self, predicted: bool, label: bool) {
        match (predicted, label) {
            (true, true) => self.true_pos += 1,
            (false, false) => self.true_neg += 1,
            (true, false) => self.false_pos += 1,
            (false, true) => self.false_neg += 1,
        }
    }

    pub fn total(&self) -> usize {
        self.true_pos + self.true_neg + self.false_pos + self.false_neg
    }

    pub fn correct(&self) -> usize {
        self.true_pos + self.true_neg
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub accuracy: f64,
    pub pairs: usize,
    pub confusion: Confusion,
}

/// Embeds every record of `store` with the matching branch.
pub fn embed_store(model: &AcpModel<f32>, modality: Modality, store: &FeatureStore) -> Result<FeatureStore> {
    let dim = model.architecture().embed_dim();
    let mut out = FeatureStore::new(dim);
    for start in (0..store.len()).step_by(CHUNK) {
        let end = (start + CHUNK).min(store.len());
        let x = Matrix::from_vec(end - start, store.dim(), gather(store, start..end))?;
        let emb = match modality {
            Modality::Image => model.embed_images(&x)?,
            Modality::Music => model.embed_music(&x)?,
        };
        for r in 0..emb.rows() {
            out.push(store.id(start + r), emb.row(r))?;
        }
    }
    Ok(out)
}

/// Embeddings of the distinct ids, in id order, plus an id -> row map.
fn embed_ids<'p>(
    model: &AcpModel<f32>,
    modality: Modality,
    store: &FeatureStore,
    ids: impl Iterator<Item = &'p str>,
) -> Result<(Matrix<f32>, BTreeMap<&'p str, usize>)> {
    let what = match modality {
        Modality::Image => "image",
        Modality::Music => "segment",
    };
    let mut map = BTreeMap::new();
    for id in ids {
        map.insert(id, 0);
    }
    let mut rows = Vec::with_capacity(map.len());
    for (i, (id, slot)) in map.iter_mut().enumerate() {
        rows.push(locate(store, id, what)?);
        *slot = i;
    }
    let dim = model.architecture().embed_dim();
    let mut data = Vec::with_capacity(rows.len() * dim);
    for chunk in rows.chunks(CHUNK) {
        let x = Matrix::from_vec(chunk.len(), store.dim(), gather(store, chunk.iter().copied()))?;
        let emb = match modality {
            Modality::Image => model.embed_images(&x)?,
            Modality::Music => model.embed_music(&x)?,
        };
        data.extend_from_slice(emb.as_slice());
    }
    Ok((Matrix::from_vec(rows.len(), dim, data)?, map))
}

/// `p_true` for every pair, in input order. Each distinct image and segment
/// is embedded once; the scores equal `acp_forward` on each pair exactly.
pub fn score_pairs(model: &AcpModel<f32>, pairs: &[CorrespondencePair], stores: &Stores) -> Result<Vec<f32>> {
    let (img_emb, img_map) = embed_ids(model, Modality::Image, stores.images, pairs.iter().map(|p| p.image_id.as_str()))?;
    let (mus_emb, mus_map) = embed_ids(model, Modality::Music, stores.music, pairs.iter().map(|p| p.segment_id.as_str()))?;
    let dim = model.architecture().embed_dim();
    let mut scores = Vec::with_capacity(pairs.len());
    for chunk in pairs.chunks(CHUNK) {
        let mut vi = Vec::with_capacity(chunk.len() * dim);
        let mut vm = Vec::with_capacity(chunk.len() * dim);
        for p in chunk {
            vi.extend_from_slice(img_emb.row(img_map[p.image_id.as_str()]));
            vm.extend_from_slice(mus_emb.row(mus_map[p.segment_id.as_str()]));
        }
        let logits = model.fuse_batch(&Matrix::from_vec(chunk.len(), dim, vi)?, &Matrix::from_vec(chunk.len(), dim, vm)?)?;
        scores.extend((0..logits.rows()).map(|r| softmax(logits.row(r))[1]));
    }
    Ok(scores)
}

/// Fraction of pairs where `p_true > 0.5` agrees with the label.
pub fn evaluate_correspondence(model: &AcpModel<f32>, pairs: &[CorrespondencePair], stores: &Stores) -> Result<EvalReport> {
    if pairs.is_empty() {
        return Err(Error::invalid("cannot evaluate on an empty pair set"));
    }
    let scores = score_pairs(model, pairs, stores)?;
    let mut confusion = Confusion::default();
    for (p, s) in pairs.iter().zip(scores) {
        confusion.record(s > 0.5, p.label);
    }
    Ok(EvalReport { accuracy: confusion.correct() as f64 / pairs.len() as f64, pairs: pairs.len(), confusion })
}
