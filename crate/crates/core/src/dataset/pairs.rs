use std::collections::BTreeMap;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::EmotionClass;
use crate::error::{Error, Result};

/// Bounds of the non-overlapping segments of a song, in seconds. Trailing
/// audio shorter than one segment is dropped.
pub fn segment_song(duration_secs: f64, segment_secs: f64) -> Vec<(f64, f64)> {
    if !(duration_secs > 0.0) || !(segment_secs > 0.0) {
        return Vec::new();
    }
    let n = (duration_secs / segment_secs).floor() as usize;
    (0..n).map(|k| (k as f64 * segment_secs, (k + 1) as f64 * segment_secs)).collect()
}

/// Identifier of segment `k` of a song.
pub fn segment_id(song_id: &str, k: usize) -> String {
    format!("{song_id}#{k}")
}

/// Splits a segment id back into song id and index.
pub fn parse_segment_id(id: &str) -> Option<(&str, usize)> {
    let (song, k) = id.rsplit_once('#')?;
    Some((song, k.parse().ok()?))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledImage {
    pub id: String,
    pub class: EmotionClass,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledSegment {
    pub id: String,
    pub song_id: String,
    pub class: EmotionClass,
}

/// An image/segment pair; `label` is true iff both share a class.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CorrespondencePair {
    pub image_id: String,
    pub segment_id: String,
    pub label: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PairConfig {
    /// Same-class images drawn per segment (fewer if the class is small).
    pub true_per_segment: usize,
    /// False pairs per true pair.
    pub false_ratio: f64,
    pub seed: u64,
}

impl Default for PairConfig {
    fn default() -> Self {
        Self { true_per_segment: 10, false_ratio: 1.0, seed: 0 }
    }
}

/// Samples true pairs from the same-class cross product (per segment) and
/// `round(false_ratio * n_true)` distinct false pairs uniformly from the
/// differing-class cross product. Output is sorted and independent of the
/// input order.
pub fn generate_pairs(images: &[LabeledImage], segments: &[LabeledSegment], cfg: &PairConfig) -> Result<Vec<CorrespondencePair>> {
    if images.is_empty() || segments.is_empty() {
        return Err(Error::invalid("pair generation needs at least one image and one segment"));
    }
    if !(cfg.false_ratio >= 0.0) || !cfg.false_ratio.is_finite() {
        return Err(Error::invalid("false ratio must be a non-negative number"));
    }
    let mut images: Vec<&LabeledImage> = images.iter().collect();
    images.sort_by(|a, b| a.id.cmp(&b.id));
    let mut segments: Vec<&LabeledSegment> = segments.iter().collect();
    segments.sort_by(|a, b| a.id.cmp(&b.id));

    let mut same: BTreeMap<EmotionClass, Vec<usize>> = BTreeMap::new();
    let mut other: BTreeMap<EmotionClass, Vec<usize>> = BTreeMap::new();
    for class in EmotionClass::ALL {
        for (i, img) in images.iter().enumerate() {
            let bucket = if img.class == class { &mut same } else { &mut other };
            bucket.entry(class).or_default().push(i);
        }
    }
    let empty = Vec::new();
    let same_of = |c: EmotionClass| same.get(&c).unwrap_or(&empty);
    let other_of = |c: EmotionClass| other.get(&c).unwrap_or(&empty);

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut pairs = Vec::new();
    for seg in &segments {
        let pool = same_of(seg.class);
        let take = cfg.true_per_segment.min(pool.len());
        for j in index::sample(&mut rng, pool.len(), take).into_iter() {
            pairs.push(CorrespondencePair { image_id: images[pool[j]].id.clone(), segment_id: seg.id.clone(), label: true });
        }
    }
    let n_true = pairs.len();
    if n_true == 0 {
        return Err(Error::invalid("no segment shares a class with any image; no true pairs possible"));
    }

    let n_false = (cfg.false_ratio * n_true as f64).round() as usize;
    // Prefix sums over segments of the differing-class pool sizes index the
    // false cross product.
    let mut offsets = Vec::with_capacity(segments.len() + 1);
    offsets.push(0usize);
    for seg in &segments {
        offsets.push(offsets.last().unwrap() + other_of(seg.class).len());
    }
    let available = *offsets.last().unwrap();
    if n_false > available {
        return Err(Error::invalid(format!("{n_false} false pairs requested but only {available} exist; a class is missing on one side")));
    }
    for flat in index::sample(&mut rng, available, n_false).into_iter() {
        let s = offsets.partition_point(|&o| o <= flat) - 1;
        let seg = segments[s];
        let img = images[other_of(seg.class)[flat - offsets[s]]];
        pairs.push(CorrespondencePair { image_id: img.id.clone(), segment_id: seg.id.clone(), label: false });
    }
    pairs.sort_by(|a, b| (&a.segment_id, &a.image_id).cmp(&(&b.segment_id, &b.image_id)));
    Ok(pairs)
}
