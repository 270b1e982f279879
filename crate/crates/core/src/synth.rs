//! Synthetic corpus generator: class-conditional music, tagged song
//! manifests, labeled image manifests and clustered image embeddings.
//!
//! Each class has its own chord, register, tempo and envelope, and its own
//! embedding cluster, so a correspondence model can learn the task from a
//! few dozen songs.

use std::path::{Path, PathBuf};

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::audio::{write_wav, AudioClip};
use crate::dataset::{EmotionClass, ImageLabel};
use crate::error::{Error, Result};
use crate::io::{write_images, write_json_file, write_songs, FeatureStore, ImageEntry, SongEntry};

pub const SONGS_FILE: &str = "songs.json";
pub const IMAGES_FILE: &str = "images.json";
pub const EMBEDDINGS_FILE: &str = "embeddings.afcf";
pub const TRUTH_FILE: &str = "truth.json";

const POSITIVE_TAGS: &[&str] = &["this will always make me happy", "so energetic", "makes me energetic and wanna dance", "joyous", "happy"];
const NEUTRAL_TAGS: &[&str] = &["soothing for the ear to hear", "cool and relaxing music", "calmness", "relax"];
const NEGATIVE_TAGS: &[&str] = &["sad", "makes me sad", "for the painfully alone"];
const FILLER_TAGS: &[&str] = &["rock", "favorites", "2000s", "female vocalists", "instrumental", "indie"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyntheticSpec {
    pub n_songs: usize,
    pub n_images: usize,
    /// Class probabilities, in the order positive, neutral, negative.
    pub priors: [f64; 3],
    pub min_duration_s: f64,
    pub max_duration_s: f64,
    pub sample_rate: u32,
    pub embedding_dim: usize,
    /// Standard deviation of the class centers' coordinates.
    pub center_scale: f64,
    /// Standard deviation of images around their class center.
    pub spread: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            n_songs: 60,
            n_images: 600,
            priors: [1.0 / 3.0; 3],
            min_duration_s: 60.0,
            max_duration_s: 130.0,
            sample_rate: 22050,
            embedding_dim: 2048,
            center_scale: 1.0,
            spread: 0.5,
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_songs == 0 || self.n_images == 0 || self.embedding_dim == 0 || self.sample_rate == 0 {
            return Err(Error::invalid("song, image, dimension and rate counts must be positive"));
        }
        if !(self.min_duration_s > 0.0 && self.max_duration_s >= self.min_duration_s) {
            return Err(Error::invalid("durations must satisfy 0 < min <= max"));
        }
        if self.priors.iter().any(|p| !(p.is_finite() && *p >= 0.0)) || self.priors.iter().sum::<f64>() <= 0.0 {
            return Err(Error::invalid("priors must be non-negative with a positive sum"));
        }
        if !(self.spread >= 0.0 && self.center_scale >= 0.0) {
            return Err(Error::invalid("spread and center scale must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSong {
    pub id: String,
    pub class: EmotionClass,
    pub duration_s: f64,
    pub tags: Vec<String>,
    /// Seed of this song's audio.
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticImage {
    pub id: String,
    pub label: ImageLabel,
}

/// Everything about a synthetic corpus except the audio samples and embeddings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticPlan {
    pub songs: Vec<SyntheticSong>,
    pub images: Vec<SyntheticImage>,
}

fn class_tags(class: EmotionClass) -> &'static [&'static str] {
    match class {
        EmotionClass::Positive => POSITIVE_TAGS,
        EmotionClass::Neutral => NEUTRAL_TAGS,
        EmotionClass::Negative => NEGATIVE_TAGS,
    }
}

pub fn plan(spec: &SyntheticSpec) -> Result<SyntheticPlan> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let classes = WeightedIndex::new(spec.priors).map_err(|e| Error::invalid(format!("priors: {e}")))?;
    let songs = (0..spec.n_songs)
        .map(|i| {
            let class = EmotionClass::ALL[classes.sample(&mut rng)];
            let duration_s = (rng.random_range(spec.min_duration_s..=spec.max_duration_s) * 10.0).round() / 10.0;
            let pool = class_tags(class);
            let n_emotion = rng.random_range(1..=pool.len().min(3));
            let mut tags: Vec<String> = pool.choose_multiple(&mut rng, n_emotion).map(|t| t.to_string()).collect();
            let n_filler = rng.random_range(0..=2);
            tags.extend(FILLER_TAGS.choose_multiple(&mut rng, n_filler).map(|t| t.to_string()));
            tags.shuffle(&mut rng);
            SyntheticSong { id: format!("song{i:03}"), class, duration_s, tags, seed: rng.random() }
        })
        .collect();
    let images = (0..spec.n_images)
        .map(|i| {
            let class = EmotionClass::ALL[classes.sample(&mut rng)];
            let label = *ImageLabel::members(class).choose(&mut rng).expect("every class has members");
            SyntheticImage { id: format!("img{i:04}"), label }
        })
        .collect();
    Ok(SyntheticPlan { songs, images })
}

/// Chord (semitones above the root), root, tempo and envelope decay of a class.
struct Voice {
    root_hz: f64,
    chord: &'static [i32],
    bpm: f64,
    decay_per_s: f64,
    harmonics: usize,
    noise: f64,
}

fn voice(class: EmotionClass) -> Voice {
    match class {
        EmotionClass::Positive => Voice { root_hz: 523.25, chord: &[0, 4, 7], bpm: 150.0, decay_per_s: 6.0, harmonics: 3, noise: 0.02 },
        EmotionClass::Neutral => Voice { root_hz: 349.23, chord: &[0, 7, 12], bpm: 60.0, decay_per_s: 0.5, harmonics: 1, noise: 0.05 },
        EmotionClass::Negative => Voice { root_hz: 110.0, chord: &[0, 3, 7], bpm: 80.0, decay_per_s: 2.0, harmonics: 4, noise: 0.01 },
    }
}

/// Audio of one synthetic song: a repeated class chord with per-song
/// tempo, tuning and phase jitter, plus a little white noise.
pub fn song_audio(song: &SyntheticSong, sample_rate: u32) -> Result<AudioClip> {
    let mut rng = ChaCha8Rng::seed_from_u64(song.seed);
    let v = voice(song.class);
    let rate = sample_rate as f64;
    let n = (song.duration_s * rate).round() as usize;
    let beat = 60.0 / (v.bpm * rng.random_range(0.92..1.08));
    let detune = 2f64.powf(rng.random_range(-0.15..0.15) / 12.0);

    // Partials as rotating phasors: (cos, sin, step cos, step sin, amplitude).
    let mut partials = Vec::new();
    for &semi in v.chord {
        let f0 = v.root_hz * detune * 2f64.powf(semi as f64 / 12.0);
        for h in 1..=v.harmonics {
            let f = f0 * h as f64;
            if f >= rate / 2.0 {
                continue;
            }
            let phase = rng.random_range(0.0..std::f64::consts::TAU);
            let step = std::f64::consts::TAU * f / rate;
            partials.push([phase.cos(), phase.sin(), step.cos(), step.sin(), 1.0 / h as f64]);
        }
    }
    let norm: f64 = partials.iter().map(|p| p[4]).sum();
    let mut samples = Vec::with_capacity(n);
    for i in 0..n {
        let t = i as f64 / rate;
        let env = (-(t % beat) * v.decay_per_s).exp();
        let mut tone = 0.0;
        for p in partials.iter_mut() {
            tone += p[4] * p[1];
            let (c, s) = (p[0] * p[2] - p[1] * p[3], p[1] * p[2] + p[0] * p[3]);
            p[0] = c;
            p[1] = s;
        }
        let noise = v.noise * rng.random_range(-1.0..1.0);
        samples.push((0.5 * env * tone / norm + noise) as f32);
    }
    AudioClip::new(song.id.clone(), samples, sample_rate)
}

/// Image embeddings: one Gaussian center per class, images scattered around it.
pub fn image_embeddings(spec: &SyntheticSpec, plan: &SyntheticPlan) -> Result<FeatureStore> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed ^ 0x005e_ed0f_1a6e);
    let centers: Vec<Vec<f64>> =
        (0..3).map(|_| (0..spec.embedding_dim).map(|_| spec.center_scale * rng.sample::<f64, _>(StandardNormal)).collect()).collect();
    let mut store = FeatureStore::new(spec.embedding_dim);
    for img in &plan.images {
        let c = &centers[img.label.class().index()];
        let v: Vec<f32> = c.iter().map(|m| (m + spec.spread * rng.sample::<f64, _>(StandardNormal)) as f32).collect();
        store.push(img.id.clone(), &v)?;
    }
    Ok(store)
}

/// Writes a complete corpus into `dir`: `songs.json`, `images.json`,
/// `embeddings.afcf`, `truth.json` and `wav/<song>.wav`.
pub fn write_synthetic(spec: &SyntheticSpec, dir: &Path) -> Result<SyntheticPlan> {
    let plan = plan(spec)?;
    std::fs::create_dir_all(dir.join("wav"))?;
    plan.songs.par_iter().try_for_each(|song| -> Result<()> {
        write_wav(&dir.join("wav").join(format!("{}.wav", song.id)), &song_audio(song, spec.sample_rate)?)
    })?;
    let songs: Vec<SongEntry> = plan
        .songs
        .iter()
        .map(|s| SongEntry {
            id: s.id.clone(),
            tags: s.tags.clone(),
            duration_s: s.duration_s,
            wav_path: Some(PathBuf::from("wav").join(format!("{}.wav", s.id))),
        })
        .collect();
    write_songs(&dir.join(SONGS_FILE), &songs)?;
    let images: Vec<ImageEntry> = plan
        .images
        .iter()
        .enumerate()
        .map(|(i, img)| ImageEntry { id: img.id.clone(), original_label: img.label.as_str().to_string(), embedding_index: i })
        .collect();
    write_images(&dir.join(IMAGES_FILE), &images)?;
    image_embeddings(spec, &plan)?.write(&dir.join(EMBEDDINGS_FILE))?;
    write_json_file(&dir.join(TRUTH_FILE), &plan)?;
    Ok(plan)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{label_song, Blocklist};

    #[test]
    fn tags_resolve_to_the_planned_class() {
        let plan = plan(&SyntheticSpec { n_songs: 200, ..SyntheticSpec::default() }).unwrap();
        for s in &plan.songs {
            assert_eq!(label_song(&s.tags, &Blocklist::default()).unwrap(), s.class, "{:?}", s.tags);
        }
    }

    #[test]
    fn zero_spread_collapses_clusters() {
        let spec = SyntheticSpec { n_images: 30, spread: 0.0, embedding_dim: 8, ..SyntheticSpec::default() };
        let p = plan(&spec).unwrap();
        let store = image_embeddings(&spec, &p).unwrap();
        for (a, ia) in p.images.iter().enumerate() {
            for (b, ib) in p.images.iter().enumerate() {
                if ia.label.class() == ib.label.class() {
                    assert_eq!(store.row(a), store.row(b));
                }
            }
        }
    }

    #[test]
    fn audio_is_deterministic_and_bounded() {
        let p = plan(&SyntheticSpec { n_songs: 3, min_duration_s: 2.0, max_duration_s: 3.0, ..SyntheticSpec::default() }).unwrap();
        for s in &p.songs {
            let a = song_audio(s, 22050).unwrap();
            assert_eq!(a.len(), (s.duration_s * 22050.0).round() as usize);
            assert!(a.samples.iter().all(|v| v.abs() <= 1.0));
            assert_eq!(a, song_audio(s, 22050).unwrap());
        }
    }
}
