//! Audio analysis: clip handling, STFT, and the 193-dimensional music
//! descriptor (MFCC, chroma, spectral contrast, tonal centroid, log-mel).
//!
//! All spectral computation runs in `f64`; only the stored feature vectors
//! are narrowed to `f32`.

mod chroma;
mod contrast;
mod features;
mod mel;
mod stft;
pub mod wav;

pub use chroma::{chroma, chroma_frames, pitch_class_map, tonal_centroid, tonnetz_projection, TONNETZ_RADII};
pub use contrast::{contrast_bands, spectral_contrast, CONTRAST_ALPHA, CONTRAST_BANDS};
pub use features::{
    Analyzer, FeatureConfig, MusicFeatureVector, SegmentSpec, CHROMA_RANGE, CONTRAST_RANGE, FEATURE_DIM, MEL_RANGE, MFCC_RANGE,
    TONNETZ_RANGE,
};
pub use mel::{dct2_ortho, hz_to_mel, mel_features, mel_filterbank, mel_to_hz, mfcc, MelFilterbank};
pub use stft::{hann_window, stft, Spectrogram, StftPlan};
pub use wav::{read_wav, write_wav};

use crate::error::{Error, Result};

/// Floor used by every logarithm in the feature pipeline.
pub const LOG_FLOOR: f64 = 1e-10;

/// A mono sample buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    pub id: String,
    pub samples: Vec<f32>,
    pub sample_rate: u32,
}

impl AudioClip {
    pub fn new(id: impl Into<String>, samples: Vec<f32>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::invalid("sample rate must be positive"));
        }
        Ok(Self { id: id.into(), samples, sample_rate })
    }

    /// Builds a mono clip by averaging the given channels sample by sample.
    pub fn from_channels(id: impl Into<String>, channels: &[Vec<f32>], sample_rate: u32) -> Result<Self> {
        let first = channels.first().ok_or_else(|| Error::invalid("no channels"))?;
        if channels.iter().any(|c| c.len() != first.len()) {
            return Err(Error::invalid("channels have different lengths"));
        }
        let n = channels.len() as f32;
        let samples = (0..first.len()).map(|i| channels.iter().map(|c| c[i]).sum::<f32>() / n).collect();
        Self::new(id, samples, sample_rate)
    }

    /// Builds a mono clip from interleaved multi-channel samples.
    pub fn from_interleaved(id: impl Into<String>, data: &[f32], channels: usize, sample_rate: u32) -> Result<Self> {
        if channels == 0 || !data.len().is_multiple_of(channels) {
            return Err(Error::invalid("interleaved length is not a multiple of the channel count"));
        }
        let n = channels as f32;
        let samples = data.chunks_exact(channels).map(|f| f.iter().sum::<f32>() / n).collect();
        Self::new(id, samples, sample_rate)
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    /// Copies `len` samples starting at `start` into a new clip with the given id.
    pub fn slice(&self, id: impl Into<String>, start: usize, len: usize) -> Result<Self> {
        let end = start.checked_add(len).filter(|&e| e <= self.samples.len());
        let end = end.ok_or_else(|| Error::invalid("slice out of range"))?;
        Self::new(id, self.samples[start..end].to_vec(), self.sample_rate)
    }
}

const SINC_ZERO_CROSSINGS: f64 = 32.0;

/// Band-limited resampling with a Hann-windowed sinc kernel.
///
/// The output holds `round(len * target / source)` samples. Equal rates
/// return the input unchanged.
pub fn resample_mono(clip: &AudioClip, target_rate: u32) -> Result<AudioClip> {
    if clip.is_empty() {
        return Err(Error::invalid("cannot resample an empty clip"));
    }
    if target_rate == 0 {
        return Err(Error::invalid("target rate must be positive"));
    }
    if target_rate == clip.sample_rate {
        return Ok(clip.clone());
    }
    let src = clip.sample_rate as f64;
    let dst = target_rate as f64;
    let step = src / dst;
    // Lowpass at the lower of the two Nyquist frequencies.
    let cutoff = (dst / src).min(1.0);
    let half_width = SINC_ZERO_CROSSINGS / cutoff;
    let out_len = ((clip.len() as f64) * dst / src).round() as usize;
    let input = &clip.samples;
    let last = input.len() as i64 - 1;

    let samples = (0..out_len)
        .map(|j| {
            let center = j as f64 * step;
            let lo = ((center - half_width).ceil() as i64).max(0);
            let hi = ((center + half_width).floor() as i64).min(last);
            let mut acc = 0.0f64;
            for n in lo..=hi {
                let d = center - n as f64;
                let x = cutoff * d;
                let sinc = if x.abs() < 1e-12 { 1.0 } else { (std::f64::consts::PI * x).sin() / (std::f64::consts::PI * x) };
                let w = 0.5 + 0.5 * (std::f64::consts::PI * d / half_width).cos();
                acc += input[n as usize] as f64 * cutoff * sinc * w;
            }
            acc as f32
        })
        .collect();
    AudioClip::new(clip.id.clone(), samples, target_rate)
}
