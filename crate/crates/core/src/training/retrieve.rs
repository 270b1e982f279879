use serde::{Deserialize, Serialize};

use super::gather;
use crate::acpnet::AcpModel;
use crate::error::{Error, Result};
use crate::io::FeatureStore;
use crate::neural::{softmax, Matrix};

const CHUNK: usize = 256;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalHit {
    pub segment_id: String,
    pub p_true: f32,
}

/// `p_true` of the query image against every library segment, in library order.
pub fn retrieval_scores(model: &AcpModel<f32>, query: &[f32], library: &FeatureStore) -> Result<Vec<f32>> {
    if library.is_empty() {
        return Err(Error::invalid("retrieval library is empty"));
    }
    let v_img = model.image_forward(query)?;
    let mut scores = Vec::with_capacity(library.len());
    for start in (0..library.len()).step_by(CHUNK) {
        let end = (start + CHUNK).min(library.len());
        let x = Matrix::from_vec(end - start, library.dim(), gather(library, start..end))?;
        let v_mus = model.embed_music(&x)?;
        let v_img_rep = Matrix::from_vec(end - start, v_img.len(), v_img.repeat(end - start))?;
        let logits = model.fuse_batch(&v_img_rep, &v_mus)?;
        scores.extend((0..logits.rows()).map(|r| softmax(logits.row(r))[1]));
    }
    Ok(scores)
}

/// The `k` library segments with the highest `p_true` for the query image,
/// best first; equal scores are ordered by segment id.
pub fn retrieve(model: &AcpModel<f32>, query: &[f32], library: &FeatureStore, k: usize) -> Result<Vec<RetrievalHit>> {
    if k > library.len() {
        return Err(Error::invalid(format!("k = {k} exceeds library size {}", library.len())));
    }
    let scores = retrieval_scores(model, query, library)?;
    let mut ranked: Vec<(usize, f32)> = scores.into_iter().enumerate().collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| library.id(a.0).cmp(library.id(b.0))));
    Ok(ranked.into_iter().take(k).map(|(i, p_true)| RetrievalHit { segment_id: library.id(i).to_string(), p_true }).collect())
}
