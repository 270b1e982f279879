//! File-level drivers: feature extraction over WAV files, and building a
//! dataset directory from song/image manifests.
//!
//! A dataset directory holds:
//!
//! | file | contents |
//! |------|----------|
//! | `features.afcf` | 193-d music features, one record per segment |
//! | `images.afcf` | image embeddings keyed by image id |
//! | `pairs.csv` | every generated pair |
//! | `train.csv`, `val.csv`, `test.csv` | pairs kept in each partition |
//! | `segment_labels.csv` | segment id, class, song |
//! | `image_labels.csv` | image id, fine label, class |
//! | `dataset.json` | build settings, counts and partition membership |

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::audio::{read_wav, resample_mono, Analyzer, FeatureConfig, SegmentSpec, FEATURE_DIM};
use crate::dataset::{
    generate_pairs, label_song, regroup_image_label, segment_id, segment_song, split_dataset, Blocklist, CorrespondencePair, DatasetSplit,
    EmotionClass, LabeledImage, LabeledSegment, PairConfig, SplitRatios,
};
use crate::error::{Error, Result};
use crate::io::{
    read_images, read_json_file, read_pairs, read_songs, write_json_file, write_labels, write_pairs, FeatureStore, LabelRow, SongEntry,
};

pub const FEATURES_FILE: &str = "features.afcf";
pub const IMAGE_STORE_FILE: &str = "images.afcf";
pub const PAIRS_FILE: &str = "pairs.csv";
pub const SEGMENT_LABELS_FILE: &str = "segment_labels.csv";
pub const IMAGE_LABELS_FILE: &str = "image_labels.csv";
pub const DATASET_FILE: &str = "dataset.json";

pub fn partition_file(part: crate::dataset::Partition) -> String {
    format!("{}.csv", part.as_str())
}

/// A song to analyze: its id and audio file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AudioSource {
    pub song_id: String,
    pub path: PathBuf,
}

#[derive(Debug)]
pub struct Extraction {
    pub store: FeatureStore,
    /// Songs that could not be analyzed, with the reason.
    pub failures: Vec<(String, Error)>,
    /// Songs that decoded but were shorter than one segment.
    pub too_short: Vec<String>,
}

/// Segment features of one WAV file, resampled to the analyzer's rate.
pub fn extract_file(analyzer: &Analyzer, seg: &SegmentSpec, src: &AudioSource) -> Result<Vec<Vec<f32>>> {
    let mut clip = read_wav(&src.path, src.song_id.clone())?;
    if clip.sample_rate != analyzer.config().sample_rate {
        clip = resample_mono(&clip, analyzer.config().sample_rate)?;
    }
    Ok(analyzer.song_features(&clip, seg)?.iter().map(|v| v.to_f32()).collect())
}

/// Extracts every source in parallel. Records are ordered by song id and
/// segment index regardless of input order or thread count.
pub fn extract_features(sources: &[AudioSource], cfg: &FeatureConfig, seg: &SegmentSpec) -> Result<Extraction> {
    seg.validate()?;
    let analyzer = Analyzer::new(*cfg)?;
    let mut sorted: Vec<&AudioSource> = sources.iter().collect();
    sorted.sort_by(|a, b| a.song_id.cmp(&b.song_id));
    if let Some(w) = sorted.windows(2).find(|w| w[0].song_id == w[1].song_id) {
        return Err(Error::invalid(format!("song id {} appears twice", w[0].song_id)));
    }
    let results: Vec<Result<Vec<Vec<f32>>>> = sorted.par_iter().map(|src| extract_file(&analyzer, seg, src)).collect();
    let mut out = Extraction { store: FeatureStore::new(FEATURE_DIM), failures: Vec::new(), too_short: Vec::new() };
    for (src, res) in sorted.iter().zip(results) {
        match res {
            Ok(segments) if segments.is_empty() => out.too_short.push(src.song_id.clone()),
            Ok(segments) => {
                for (k, v) in segments.iter().enumerate() {
                    out.store.push(segment_id(&src.song_id, k), v)?;
                }
            }
            Err(e) => out.failures.push((src.song_id.clone(), e)),
        }
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct BuildOptions {
    pub songs: PathBuf,
    pub images: PathBuf,
    /// Embedding store indexed by the image manifest's `embedding_index`.
    pub embeddings: PathBuf,
    /// Precomputed segment features; extracted from the songs' WAVs when absent.
    pub features: Option<PathBuf>,
    pub blocklist: Option<PathBuf>,
    pub pairs: PairConfig,
    pub split: SplitRatios,
    pub feature_config: FeatureConfig,
    pub segments: SegmentSpec,
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExcludedSong {
    pub id: String,
    pub reason: String,
}

/// Contents of `dataset.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub pair_config: PairConfig,
    pub split_ratios: SplitRatios,
    pub segment_spec: SegmentSpec,
    pub songs_total: usize,
    pub songs_used: usize,
    pub excluded_songs: Vec<ExcludedSong>,
    pub segments: usize,
    pub images: usize,
    pub segments_per_class: BTreeMap<EmotionClass, usize>,
    pub images_per_class: BTreeMap<EmotionClass, usize>,
    pub pairs: usize,
    pub true_pairs: usize,
    pub partition_pairs: [usize; 3],
    pub discarded_pairs: usize,
    pub split_seed: u64,
    pub partition_songs: [Vec<String>; 3],
    pub partition_images: [Vec<String>; 3],
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

/// Labels, pairs and splits a corpus and writes the dataset directory.
pub fn build_dataset(opts: &BuildOptions) -> Result<DatasetSummary> {
    let songs = read_songs(&opts.songs)?;
    let images = read_images(&opts.images)?;
    let blocklist = match &opts.blocklist {
        Some(p) => Blocklist::load(p)?,
        None => Blocklist::default(),
    };
    let embeddings = FeatureStore::read(&opts.embeddings)?;

    let mut excluded = Vec::new();
    let mut labeled: Vec<(&SongEntry, EmotionClass)> = Vec::new();
    for s in &songs {
        match label_song(&s.tags, &blocklist) {
            Ok(c) => labeled.push((s, c)),
            Err(Error::NoLabel) => excluded.push(ExcludedSong { id: s.id.clone(), reason: "no emotion tag".into() }),
            Err(e) => return Err(e),
        }
    }

    let features = match &opts.features {
        Some(p) => FeatureStore::read(p)?,
        None => {
            let base = opts.songs.parent().unwrap_or(Path::new("."));
            let mut sources = Vec::new();
            for (s, _) in &labeled {
                let path = s
                    .wav_path
                    .as_ref()
                    .ok_or_else(|| Error::data(format!("song {} has no wav_path and no feature store was given", s.id)))?;
                sources.push(AudioSource { song_id: s.id.clone(), path: resolve(base, path) });
            }
            let ex = extract_features(&sources, &opts.feature_config, &opts.segments)?;
            for (id, e) in &ex.failures {
                log::warn!("skipping song {id}: {e}");
            }
            ex.store
        }
    };
    if features.dim() != FEATURE_DIM {
        return Err(Error::shape(format!("feature store dim {} is not {FEATURE_DIM}", features.dim())));
    }

    let mut segments = Vec::new();
    let mut music = FeatureStore::new(FEATURE_DIM);
    let mut used = 0;
    for (s, class) in &labeled {
        let n = segment_song(s.duration_s, opts.segments.segment_secs).len();
        let ids: Vec<String> = (0..n).map(|k| segment_id(&s.id, k)).filter(|id| features.get(id).is_some()).collect();
        if ids.len() < n {
            log::warn!("song {}: {} of {n} segments have features", s.id, ids.len());
        }
        if ids.is_empty() {
            let reason = if n == 0 { "shorter than one segment" } else { "no segment features" };
            excluded.push(ExcludedSong { id: s.id.clone(), reason: reason.into() });
            continue;
        }
        used += 1;
        for id in ids {
            music.push(id.clone(), features.require(&id)?)?;
            segments.push(LabeledSegment { id, song_id: s.id.clone(), class: *class });
        }
    }
    excluded.sort_by(|a, b| a.id.cmp(&b.id));

    let mut image_store = FeatureStore::new(embeddings.dim());
    let mut labeled_images = Vec::new();
    let mut image_rows = Vec::new();
    for img in &images {
        let class = regroup_image_label(&img.original_label)?;
        if img.embedding_index >= embeddings.len() {
            return Err(Error::data(format!("image {} points at embedding row {} of {}", img.id, img.embedding_index, embeddings.len())));
        }
        image_store.push(img.id.clone(), embeddings.row(img.embedding_index))?;
        labeled_images.push(LabeledImage { id: img.id.clone(), class });
        image_rows.push(LabelRow { id: img.id.clone(), label: img.original_label.to_lowercase(), group: None });
    }

    let pairs = generate_pairs(&labeled_images, &segments, &opts.pairs)?;
    let song_of: HashMap<String, String> = segments.iter().map(|s| (s.id.clone(), s.song_id.clone())).collect();
    let split = split_dataset(&pairs, &song_of, &opts.split, opts.pairs.seed)?;

    std::fs::create_dir_all(&opts.out)?;
    music.write(&opts.out.join(FEATURES_FILE))?;
    image_store.write(&opts.out.join(IMAGE_STORE_FILE))?;
    write_pairs(&opts.out.join(PAIRS_FILE), &pairs)?;
    for part in crate::dataset::Partition::ALL {
        write_pairs(&opts.out.join(partition_file(part)), split.pairs(part))?;
    }
    let seg_rows: Vec<LabelRow> =
        segments.iter().map(|s| LabelRow { id: s.id.clone(), label: s.class.as_str().into(), group: Some(s.song_id.clone()) }).collect();
    write_labels(&opts.out.join(SEGMENT_LABELS_FILE), &seg_rows)?;
    write_labels(&opts.out.join(IMAGE_LABELS_FILE), &image_rows)?;

    let mut segments_per_class = BTreeMap::new();
    segments.iter().for_each(|s| *segments_per_class.entry(s.class).or_insert(0) += 1);
    let mut images_per_class = BTreeMap::new();
    labeled_images.iter().for_each(|i| *images_per_class.entry(i.class).or_insert(0) += 1);
    let summary = DatasetSummary {
        pair_config: opts.pairs,
        split_ratios: opts.split,
        segment_spec: opts.segments,
        songs_total: songs.len(),
        songs_used: used,
        excluded_songs: excluded,
        segments: segments.len(),
        images: labeled_images.len(),
        segments_per_class,
        images_per_class,
        pairs: pairs.len(),
        true_pairs: pairs.iter().filter(|p| p.label).count(),
        partition_pairs: [split.train.len(), split.val.len(), split.test.len()],
        discarded_pairs: split.discarded,
        split_seed: split.seed,
        partition_songs: split.songs.clone(),
        partition_images: split.images.clone(),
    };
    write_json_file(&opts.out.join(DATASET_FILE), &summary)?;
    Ok(summary)
}

/// A dataset directory loaded for training.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub dir: PathBuf,
    pub summary: DatasetSummary,
    pub split: DatasetSplit,
    pub music: FeatureStore,
    pub images: FeatureStore,
}

impl Dataset {
    pub fn load(dir: &Path) -> Result<Self> {
        let summary: DatasetSummary = read_json_file(&dir.join(DATASET_FILE))?;
        let read = |part| read_pairs(&dir.join(partition_file(part)));
        use crate::dataset::Partition::*;
        let split = DatasetSplit {
            seed: summary.split_seed,
            train: read(Train)?,
            val: read(Val)?,
            test: read(Test)?,
            songs: summary.partition_songs.clone(),
            images: summary.partition_images.clone(),
            discarded: summary.discarded_pairs,
        };
        Ok(Self {
            dir: dir.to_path_buf(),
            music: FeatureStore::read(&dir.join(FEATURES_FILE))?,
            images: FeatureStore::read(&dir.join(IMAGE_STORE_FILE))?,
            summary,
            split,
        })
    }

    pub fn stores(&self) -> crate::training::Stores<'_> {
        crate::training::Stores::new(&self.images, &self.music)
    }

    pub fn all_pairs(&self) -> Result<Vec<CorrespondencePair>> {
        read_pairs(&self.dir.join(PAIRS_FILE))
    }
}

/// Number of probe classes for a modality: broad classes for music, fine
/// labels for images.
pub fn probe_classes(modality: crate::acpnet::Modality) -> usize {
    match modality {
        crate::acpnet::Modality::Music => EmotionClass::ALL.len(),
        crate::acpnet::Modality::Image => crate::dataset::ImageLabel::ALL.len(),
    }
}

/// Frozen embeddings of every labeled id, ready for a probe.
pub fn probe_samples(
    model: &crate::acpnet::AcpModel<f32>,
    modality: crate::acpnet::Modality,
    labels: &[LabelRow],
    store: &FeatureStore,
) -> Result<Vec<crate::training::ProbeSample>> {
    use crate::acpnet::Modality;
    labels
        .iter()
        .map(|row| {
            let class = match modality {
                Modality::Music => row.label.parse::<EmotionClass>()?.index(),
                Modality::Image => row.label.parse::<crate::dataset::ImageLabel>()?.index(),
            };
            let embedding = model.extract_embedding(modality, store.require(&row.id)?)?;
            Ok(crate::training::ProbeSample { embedding, class, group: row.group().to_string() })
        })
        .collect()
}
