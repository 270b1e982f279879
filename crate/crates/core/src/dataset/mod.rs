//! Weak labeling and correspondence-pair construction.

mod emotion;
mod pairs;
mod split;
mod tags;

pub use emotion::{regroup_image_label, EmotionClass, ImageLabel};
pub use pairs::{generate_pairs, parse_segment_id, segment_id, segment_song, CorrespondencePair, LabeledImage, LabeledSegment, PairConfig};
pub use split::{split_dataset, DatasetSplit, Partition, SplitRatios};
pub use tags::{classify_tag, label_song, resolve_song_label, Blocklist, ClassCounts, TAG_KEYWORDS};
