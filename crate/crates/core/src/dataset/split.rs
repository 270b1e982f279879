use std::collections::{BTreeSet, HashMap};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::CorrespondencePair;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Partition {
    Train,
    Val,
    Test,
}

impl Partition {
    pub const ALL: [Partition; 3] = [Partition::Train, Partition::Val, Partition::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Partition::Train => "train",
            Partition::Val => "val",
            Partition::Test => "test",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitRatios {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        Self { train: 0.7, val: 0.1, test: 0.2 }
    }
}

impl SplitRatios {
    /// Partition sizes for `n` items: train and val are rounded, test takes the rest.
    pub fn counts(&self, n: usize) -> Result<[usize; 3]> {
        let total = self.train + self.val + self.test;
        if !(self.train > 0.0 && self.val > 0.0 && self.test > 0.0) || !total.is_finite() {
            return Err(Error::invalid("split ratios must be positive"));
        }
        let train = (n as f64 * self.train / total).round() as usize;
        let val = (n as f64 * self.val / total).round() as usize;
        if train + val >= n || train == 0 || val == 0 {
            return Err(Error::invalid(format!("{n} items cannot populate all three partitions")));
        }
        Ok([train, val, n - train - val])
    }
}

/// Song-disjoint and image-disjoint train/val/test partition of a pair list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSplit {
    pub seed: u64,
    pub train: Vec<CorrespondencePair>,
    pub val: Vec<CorrespondencePair>,
    pub test: Vec<CorrespondencePair>,
    pub songs: [Vec<String>; 3],
    pub images: [Vec<String>; 3],
    /// Pairs dropped because their endpoints fell in different partitions.
    pub discarded: usize,
}

impl DatasetSplit {
    pub fn pairs(&self, part: Partition) -> &[CorrespondencePair] {
        match part {
            Partition::Train => &self.train,
            Partition::Val => &self.val,
            Partition::Test => &self.test,
        }
    }
}

fn assign(mut ids: Vec<String>, counts: [usize; 3], rng: &mut ChaCha8Rng) -> [Vec<String>; 3] {
    ids.shuffle(rng);
    let test = ids.split_off(counts[0] + counts[1]);
    let val = ids.split_off(counts[0]);
    let mut parts = [ids, val, test];
    parts.iter_mut().for_each(|p| p.sort());
    parts
}

/// Partitions songs and images independently by the given ratios, then
/// keeps each pair only if both endpoints landed in the same partition.
pub fn split_dataset(
    pairs: &[CorrespondencePair],
    song_of_segment: &HashMap<String, String>,
    ratios: &SplitRatios,
    seed: u64,
) -> Result<DatasetSplit> {
    let mut songs = BTreeSet::new();
    let mut images = BTreeSet::new();
    for p in pairs {
        let song = song_of_segment.get(&p.segment_id).ok_or_else(|| Error::data(format!("segment {} has no parent song", p.segment_id)))?;
        songs.insert(song.clone());
        images.insert(p.image_id.clone());
    }
    let song_counts = ratios
        .counts(songs.len())
        .map_err(|_| Error::invalid(format!("{} songs are too few to populate train, val and test", songs.len())))?;
    let image_counts = ratios
        .counts(images.len())
        .map_err(|_| Error::invalid(format!("{} images are too few to populate train, val and test", images.len())))?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let song_parts = assign(songs.into_iter().collect(), song_counts, &mut rng);
    let image_parts = assign(images.into_iter().collect(), image_counts, &mut rng);

    let index = |parts: &[Vec<String>; 3]| -> HashMap<String, usize> {
        parts.iter().enumerate().flat_map(|(i, p)| p.iter().map(move |id| (id.clone(), i))).collect()
    };
    let song_part = index(&song_parts);
    let image_part = index(&image_parts);

    let mut out: [Vec<CorrespondencePair>; 3] = Default::default();
    let mut discarded = 0;
    for p in pairs {
        let s = song_part[&song_of_segment[&p.segment_id]];
        if image_part[&p.image_id] == s {
            out[s].push(p.clone());
        } else {
            discarded += 1;
        }
    }
    let [train, val, test] = out;
    Ok(DatasetSplit { seed, train, val, test, songs: song_parts, images: image_parts, discarded })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixture(n_songs: usize) -> (Vec<CorrespondencePair>, HashMap<String, String>) {
        let mut pairs = Vec::new();
        let mut map = HashMap::new();
        for s in 0..n_songs {
            for k in 0..2 {
                let seg = format!("song{s}#{k}");
                map.insert(seg.clone(), format!("song{s}"));
                for i in 0..10 {
                    pairs.push(CorrespondencePair { image_id: format!("img{i}"), segment_id: seg.clone(), label: (s + i) % 2 == 0 });
                }
            }
        }
        (pairs, map)
    }

    #[test]
    fn ten_songs_split_seven_one_two() {
        let (pairs, map) = fixture(10);
        let split = split_dataset(&pairs, &map, &SplitRatios::default(), 5).unwrap();
        assert_eq!(split.songs.iter().map(Vec::len).collect::<Vec<_>>(), vec![7, 1, 2]);
        assert_eq!(split.images.iter().map(Vec::len).collect::<Vec<_>>(), vec![7, 1, 2]);
        assert_eq!(split.train.len() + split.val.len() + split.test.len() + split.discarded, pairs.len());
    }

    #[test]
    fn same_seed_same_split() {
        let (pairs, map) = fixture(20);
        let a = split_dataset(&pairs, &map, &SplitRatios::default(), 9).unwrap();
        let b = split_dataset(&pairs, &map, &SplitRatios::default(), 9).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn too_few_songs() {
        let (pairs, map) = fixture(3);
        assert!(matches!(split_dataset(&pairs, &map, &SplitRatios::default(), 0), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn orphan_segment_is_a_data_error() {
        let (pairs, _) = fixture(10);
        assert!(matches!(split_dataset(&pairs, &HashMap::new(), &SplitRatios::default(), 0), Err(Error::Data(_))));
    }
}
