use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use super::AudioClip;
use crate::error::{Error, Result};

/// Magnitudes of a one-sided short-time Fourier transform, stored frame-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    pub magnitudes: Vec<f64>,
    pub frames: usize,
    pub bins: usize,
    pub frame_len: usize,
    pub hop: usize,
    pub sample_rate: u32,
}

impl Spectrogram {
    /// Wraps an existing magnitude matrix; used by tests and by callers that
    /// construct spectra directly.
    pub fn from_magnitudes(magnitudes: Vec<f64>, frames: usize, frame_len: usize, hop: usize, sample_rate: u32) -> Result<Self> {
        let bins = frame_len / 2 + 1;
        if magnitudes.len() != frames * bins {
            return Err(Error::shape(format!("expected {frames}x{bins} magnitudes, got {}", magnitudes.len())));
        }
        if magnitudes.iter().any(|m| !(*m >= 0.0) || !m.is_finite()) {
            return Err(Error::invalid("magnitudes must be finite and non-negative"));
        }
        if sample_rate == 0 || hop == 0 {
            return Err(Error::invalid("sample rate and hop must be positive"));
        }
        Ok(Self { magnitudes, frames, bins, frame_len, hop, sample_rate })
    }

    pub fn frame(&self, t: usize) -> &[f64] {
        &self.magnitudes[t * self.bins..(t + 1) * self.bins]
    }

    /// Center frequency of bin `k` in Hz.
    pub fn bin_frequency(&self, k: usize) -> f64 {
        k as f64 * self.sample_rate as f64 / self.frame_len as f64
    }
}

/// Periodic Hann window of length `n`.
pub fn hann_window(n: usize) -> Vec<f64> {
    (0..n).map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos()).collect()
}

/// A reusable FFT plan plus analysis window.
#[derive(Clone)]
pub struct StftPlan {
    frame_len: usize,
    hop: usize,
    window: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for StftPlan {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("StftPlan").field("frame_len", &self.frame_len).field("hop", &self.hop).finish()
    }
}

impl StftPlan {
    pub fn new(frame_len: usize, hop: usize) -> Result<Self> {
        if frame_len < 2 {
            return Err(Error::invalid("frame length must be at least 2"));
        }
        if hop == 0 {
            return Err(Error::invalid("hop must be positive"));
        }
        let fft = FftPlanner::new().plan_fft_forward(frame_len);
        Ok(Self { frame_len, hop, window: hann_window(frame_len), fft })
    }

    pub fn frame_len(&self) -> usize {
        self.frame_len
    }

    pub fn hop(&self) -> usize {
        self.hop
    }

    pub fn frame_count(&self, len: usize) -> usize {
        if len < self.frame_len {
            0
        } else {
            1 + (len - self.frame_len) / self.hop
        }
    }

    pub fn run(&self, clip: &AudioClip) -> Result<Spectrogram> {
        if clip.len() < self.frame_len {
            return Err(Error::invalid(format!("clip of {} samples is shorter than one frame ({})", clip.len(), self.frame_len)));
        }
        let frames = self.frame_count(clip.len());
        let bins = self.frame_len / 2 + 1;
        let mut magnitudes = Vec::with_capacity(frames * bins);
        let mut buf = vec![Complex::new(0.0, 0.0); self.frame_len];
        let mut scratch = vec![Complex::new(0.0, 0.0); self.fft.get_inplace_scratch_len()];
        for t in 0..frames {
            let start = t * self.hop;
            let frame = &clip.samples[start..start + self.frame_len];
            for ((b, &s), &w) in buf.iter_mut().zip(frame).zip(&self.window) {
                *b = Complex::new(s as f64 * w, 0.0);
            }
            self.fft.process_with_scratch(&mut buf, &mut scratch);
            magnitudes.extend(buf[..bins].iter().map(|c| c.norm()));
        }
        Ok(Spectrogram { magnitudes, frames, bins, frame_len: self.frame_len, hop: self.hop, sample_rate: clip.sample_rate })
    }
}

/// Hann-windowed STFT without padding: `1 + (len - frame_len) / hop` frames.
pub fn stft(clip: &AudioClip, frame_len: usize, hop: usize) -> Result<Spectrogram> {
    StftPlan::new(frame_len, hop)?.run(clip)
}
