use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::chroma::{chroma_frames_with, chroma_mean, pitch_class_map, tonal_centroid_mean};
use super::contrast::{contrast_bands, contrast_with};
use super::mel::{log_mel_mean, mel_filterbank, mfcc_from_mel_power, DctBasis, MelFilterbank};
use super::stft::{Spectrogram, StftPlan};
use super::AudioClip;
use crate::error::{Error, Result};

pub const FEATURE_DIM: usize = 193;
pub const MFCC_RANGE: Range<usize> = 0..40;
pub const CHROMA_RANGE: Range<usize> = 40..52;
pub const CONTRAST_RANGE: Range<usize> = 52..59;
pub const TONNETZ_RANGE: Range<usize> = 59..65;
pub const MEL_RANGE: Range<usize> = 65..193;

/// Intra-window analysis parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FeatureConfig {
    pub sample_rate: u32,
    pub frame_len: usize,
    pub hop: usize,
    pub n_mels: usize,
    pub n_mfcc: usize,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self { sample_rate: 22050, frame_len: 2048, hop: 512, n_mels: 128, n_mfcc: 40 }
    }
}

/// Segmentation of a song into fixed-length segments, each summarized by
/// the mean over overlapping analysis windows.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SegmentSpec {
    pub segment_secs: f64,
    pub window_secs: f64,
    pub window_hop_secs: f64,
}

impl Default for SegmentSpec {
    fn default() -> Self {
        Self { segment_secs: 60.0, window_secs: 10.0, window_hop_secs: 5.0 }
    }
}

impl SegmentSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.window_hop_secs > 0.0) || !(self.window_secs > 0.0) {
            return Err(Error::invalid("window length and hop must be positive"));
        }
        if self.window_secs > self.segment_secs {
            return Err(Error::invalid("window longer than segment"));
        }
        Ok(())
    }

    pub fn segment_samples(&self, rate: u32) -> usize {
        (self.segment_secs * rate as f64).round() as usize
    }

    pub fn window_samples(&self, rate: u32) -> usize {
        (self.window_secs * rate as f64).round() as usize
    }

    pub fn hop_samples(&self, rate: u32) -> usize {
        (self.window_hop_secs * rate as f64).round() as usize
    }

    /// Number of analysis windows per segment.
    pub fn windows_per_segment(&self, rate: u32) -> usize {
        1 + (self.segment_samples(rate) - self.window_samples(rate)) / self.hop_samples(rate)
    }
}

/// The 193-value music descriptor: `mfcc[0..40) | chroma[40..52) |
/// contrast[52..59) | tonnetz[59..65) | log-mel[65..193)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MusicFeatureVector(Vec<f64>);

impl MusicFeatureVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() != FEATURE_DIM {
            return Err(Error::shape(format!("music features need {FEATURE_DIM} values, got {}", values.len())));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("music features must be finite"));
        }
        Ok(Self(values))
    }

    pub fn from_parts(mfcc: &[f64], chroma: &[f64], contrast: &[f64], tonnetz: &[f64], mel: &[f64]) -> Result<Self> {
        let mut v = Vec::with_capacity(FEATURE_DIM);
        for part in [mfcc, chroma, contrast, tonnetz, mel] {
            v.extend_from_slice(part);
        }
        Self::new(v)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn mfcc(&self) -> &[f64] {
        &self.0[MFCC_RANGE]
    }

    pub fn chroma(&self) -> &[f64] {
        &self.0[CHROMA_RANGE]
    }

    pub fn contrast(&self) -> &[f64] {
        &self.0[CONTRAST_RANGE]
    }

    pub fn tonnetz(&self) -> &[f64] {
        &self.0[TONNETZ_RANGE]
    }

    pub fn mel(&self) -> &[f64] {
        &self.0[MEL_RANGE]
    }

    pub fn to_f32(&self) -> Vec<f32> {
        self.0.iter().map(|&v| v as f32).collect()
    }

    /// Arithmetic mean of several vectors.
    pub fn mean(vectors: &[MusicFeatureVector]) -> Result<Self> {
        if vectors.is_empty() {
            return Err(Error::invalid("mean of zero feature vectors"));
        }
        let mut acc = vec![0.0; FEATURE_DIM];
        for v in vectors {
            for (a, x) in acc.iter_mut().zip(&v.0) {
                *a += x;
            }
        }
        let n = vectors.len() as f64;
        acc.iter_mut().for_each(|a| *a /= n);
        Self::new(acc)
    }
}

/// Feature extractor with all per-configuration tables precomputed.
#[derive(Debug, Clone)]
pub struct Analyzer {
    cfg: FeatureConfig,
    plan: StftPlan,
    filterbank: MelFilterbank,
    dct: DctBasis,
    pitch_classes: Vec<Option<usize>>,
    bands: Vec<(usize, usize)>,
}

impl Analyzer {
    pub fn new(cfg: FeatureConfig) -> Result<Self> {
        if cfg.n_mfcc != MFCC_RANGE.len() || cfg.n_mels != MEL_RANGE.len() {
            return Err(Error::invalid(format!("the feature layout needs {} MFCCs and {} mel bands", MFCC_RANGE.len(), MEL_RANGE.len())));
        }
        Ok(Self {
            plan: StftPlan::new(cfg.frame_len, cfg.hop)?,
            filterbank: mel_filterbank(cfg.n_mels, cfg.frame_len, cfg.sample_rate)?,
            dct: DctBasis::new(cfg.n_mels, cfg.n_mfcc),
            pitch_classes: pitch_class_map(cfg.frame_len, cfg.sample_rate),
            bands: contrast_bands(cfg.frame_len, cfg.sample_rate)?,
            cfg,
        })
    }

    pub fn config(&self) -> &FeatureConfig {
        &self.cfg
    }

    pub fn spectrogram(&self, clip: &AudioClip) -> Result<Spectrogram> {
        self.check_rate(clip)?;
        self.plan.run(clip)
    }

    /// Features of a spectrogram computed with this analyzer's settings.
    pub fn spectrogram_features(&self, spec: &Spectrogram) -> Result<MusicFeatureVector> {
        if spec.frame_len != self.cfg.frame_len || spec.sample_rate != self.cfg.sample_rate {
            return Err(Error::shape("spectrogram was not computed with this analyzer's configuration"));
        }
        let power = self.filterbank.mel_power(spec)?;
        let mfcc = mfcc_from_mel_power(&power, self.cfg.n_mels, &self.dct, self.cfg.n_mfcc);
        let mel = log_mel_mean(&power, self.cfg.n_mels);
        let frames = chroma_frames_with(spec, &self.pitch_classes);
        let chroma = chroma_mean(&frames);
        let tonnetz = tonal_centroid_mean(&frames);
        let contrast = contrast_with(spec, &self.bands);
        MusicFeatureVector::from_parts(&mfcc, &chroma, &contrast, &tonnetz, &mel)
    }

    /// Features over a clip of any length (at least one frame).
    pub fn clip_features(&self, clip: &AudioClip) -> Result<MusicFeatureVector> {
        self.spectrogram_features(&self.spectrogram(clip)?)
    }

    /// Features of one analysis window; the clip must be exactly one window long.
    pub fn window_features(&self, clip: &AudioClip, seg: &SegmentSpec) -> Result<MusicFeatureVector> {
        self.check_rate(clip)?;
        let expected = seg.window_samples(self.cfg.sample_rate);
        if clip.len() != expected {
            return Err(Error::invalid(format!("window must hold {expected} samples, got {}", clip.len())));
        }
        self.clip_features(clip)
    }

    /// Mean of the window features over one segment.
    pub fn segment_features(&self, clip: &AudioClip, seg: &SegmentSpec) -> Result<MusicFeatureVector> {
        seg.validate()?;
        self.check_rate(clip)?;
        let rate = self.cfg.sample_rate;
        let expected = seg.segment_samples(rate);
        if clip.len() != expected {
            return Err(Error::invalid(format!("segment must hold {expected} samples, got {}", clip.len())));
        }
        let (win, hop) = (seg.window_samples(rate), seg.hop_samples(rate));
        let windows = (0..seg.windows_per_segment(rate))
            .map(|w| {
                let window = AudioClip::new(clip.id.clone(), clip.samples[w * hop..w * hop + win].to_vec(), rate)?;
                self.clip_features(&window)
            })
            .collect::<Result<Vec<_>>>()?;
        MusicFeatureVector::mean(&windows)
    }

    /// Features for every complete segment of a song; trailing audio is dropped.
    pub fn song_features(&self, clip: &AudioClip, seg: &SegmentSpec) -> Result<Vec<MusicFeatureVector>> {
        let len = seg.segment_samples(self.cfg.sample_rate);
        (0..clip.len() / len).map(|k| self.segment_features(&clip.slice(clip.id.clone(), k * len, len)?, seg)).collect()
    }

    fn check_rate(&self, clip: &AudioClip) -> Result<()> {
        if clip.sample_rate != self.cfg.sample_rate {
            return Err(Error::invalid(format!("clip is at {} Hz, analyzer expects {} Hz", clip.sample_rate, self.cfg.sample_rate)));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_offsets() {
        let starts = [MFCC_RANGE.start, CHROMA_RANGE.start, CONTRAST_RANGE.start, TONNETZ_RANGE.start, MEL_RANGE.start];
        assert_eq!(starts, [0, 40, 52, 59, 65]);
        assert_eq!(MEL_RANGE.end, FEATURE_DIM);
    }

    #[test]
    fn default_segmentation_uses_eleven_windows() {
        let seg = SegmentSpec::default();
        assert_eq!(seg.windows_per_segment(22050), 11);
        assert_eq!(seg.segment_samples(22050), 60 * 22050);
    }

    #[test]
    fn wrong_lengths_rejected() {
        let an = Analyzer::new(FeatureConfig::default()).unwrap();
        let seg = SegmentSpec::default();
        let clip = AudioClip::new("x", vec![0.0; 22050 * 9], 22050).unwrap();
        assert!(matches!(an.window_features(&clip, &seg), Err(Error::InvalidInput(_))));
        assert!(matches!(an.segment_features(&clip, &seg), Err(Error::InvalidInput(_))));
        let other_rate = AudioClip::new("x", vec![0.0; 44100 * 10], 44100).unwrap();
        assert!(matches!(an.window_features(&other_rate, &seg), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn short_songs_yield_no_segments() {
        let an = Analyzer::new(FeatureConfig::default()).unwrap();
        let clip = AudioClip::new("x", vec![0.0; 22050 * 59], 22050).unwrap();
        assert!(an.song_features(&clip, &SegmentSpec::default()).unwrap().is_empty());
    }

    #[test]
    fn vector_rejects_bad_input() {
        assert!(matches!(MusicFeatureVector::new(vec![0.0; 192]), Err(Error::Shape(_))));
        let mut v = vec![0.0; 193];
        v[7] = f64::NAN;
        assert!(MusicFeatureVector::new(v).is_err());
    }
}
