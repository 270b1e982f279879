use super::{Spectrogram, LOG_FLOOR};
use crate::error::{Error, Result};

/// HTK mel scale.
pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Triangular mel filters over the one-sided STFT bins, kept sparse: each
/// row only stores the contiguous span of bins where it is positive.
#[derive(Debug, Clone, PartialEq)]
pub struct MelFilterbank {
    n_mels: usize,
    bins: usize,
    centers_hz: Vec<f64>,
    spans: Vec<(usize, Vec<f64>)>,
}

impl MelFilterbank {
    pub fn n_mels(&self) -> usize {
        self.n_mels
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    /// Peak frequency of each filter in Hz.
    pub fn centers_hz(&self) -> &[f64] {
        &self.centers_hz
    }

    /// Weight of filter `m` at bin `k`.
    pub fn weight(&self, m: usize, k: usize) -> f64 {
        let (start, w) = &self.spans[m];
        if k >= *start && k < start + w.len() {
            w[k - start]
        } else {
            0.0
        }
    }

    /// Dense `n_mels x bins` row-major copy.
    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.n_mels * self.bins];
        for (m, (start, w)) in self.spans.iter().enumerate() {
            out[m * self.bins + start..m * self.bins + start + w.len()].copy_from_slice(w);
        }
        out
    }

    /// Mel power per frame, `frames x n_mels`: filterbank applied to squared magnitudes.
    pub fn mel_power(&self, spec: &Spectrogram) -> Result<Vec<f64>> {
        if spec.bins != self.bins {
            return Err(Error::shape(format!("filterbank has {} bins, spectrogram {}", self.bins, spec.bins)));
        }
        let mut out = Vec::with_capacity(spec.frames * self.n_mels);
        for t in 0..spec.frames {
            let frame = spec.frame(t);
            for (start, w) in &self.spans {
                let p: f64 = w.iter().zip(&frame[*start..]).map(|(w, m)| w * m * m).sum();
                out.push(p);
            }
        }
        Ok(out)
    }
}

pub fn mel_filterbank(n_mels: usize, frame_len: usize, sample_rate: u32) -> Result<MelFilterbank> {
    let bins = frame_len / 2 + 1;
    if n_mels == 0 {
        return Err(Error::invalid("n_mels must be at least 1"));
    }
    if n_mels > bins {
        return Err(Error::invalid(format!("{n_mels} mel bands exceed {bins} frequency bins")));
    }
    let nyquist = sample_rate as f64 / 2.0;
    let top = hz_to_mel(nyquist);
    let edges: Vec<f64> = (0..n_mels + 2).map(|i| mel_to_hz(top * i as f64 / (n_mels + 1) as f64)).collect();
    let bin_hz = |k: usize| k as f64 * sample_rate as f64 / frame_len as f64;

    let mut spans = Vec::with_capacity(n_mels);
    for m in 0..n_mels {
        let (lo, mid, hi) = (edges[m], edges[m + 1], edges[m + 2]);
        let weights: Vec<(usize, f64)> = (0..bins)
            .filter_map(|k| {
                let f = bin_hz(k);
                let w = ((f - lo) / (mid - lo)).min((hi - f) / (hi - mid));
                (w > 0.0).then_some((k, w))
            })
            .collect();
        let Some(&(start, _)) = weights.first() else {
            return Err(Error::invalid(format!(
                "mel band {m} ({lo:.1}-{hi:.1} Hz) covers no frequency bin; use fewer bands or longer frames"
            )));
        };
        spans.push((start, weights.into_iter().map(|(_, w)| w).collect()));
    }
    Ok(MelFilterbank { n_mels, bins, centers_hz: edges[1..=n_mels].to_vec(), spans })
}

/// Orthonormal DCT-II, keeping the first `n_out` coefficients.
pub fn dct2_ortho(x: &[f64], n_out: usize) -> Vec<f64> {
    let n = x.len() as f64;
    (0..n_out)
        .map(|k| {
            let scale = if k == 0 { (1.0 / n).sqrt() } else { (2.0 / n).sqrt() };
            let s: f64 =
                x.iter().enumerate().map(|(i, v)| v * (std::f64::consts::PI * k as f64 * (2 * i + 1) as f64 / (2.0 * n)).cos()).sum();
            scale * s
        })
        .collect()
}

/// Precomputed DCT-II basis for repeated use.
#[derive(Debug, Clone)]
pub(crate) struct DctBasis {
    n_in: usize,
    rows: Vec<f64>,
}

impl DctBasis {
    pub(crate) fn new(n_in: usize, n_out: usize) -> Self {
        let n = n_in as f64;
        let mut rows = Vec::with_capacity(n_in * n_out);
        for k in 0..n_out {
            let scale = if k == 0 { (1.0 / n).sqrt() } else { (2.0 / n).sqrt() };
            rows.extend((0..n_in).map(|i| scale * (std::f64::consts::PI * k as f64 * (2 * i + 1) as f64 / (2.0 * n)).cos()));
        }
        Self { n_in, rows }
    }

    pub(crate) fn apply(&self, x: &[f64], out: &mut [f64]) {
        for (o, row) in out.iter_mut().zip(self.rows.chunks_exact(self.n_in)) {
            *o = row.iter().zip(x).map(|(a, b)| a * b).sum();
        }
    }
}

/// Frame-mean MFCCs from a mel-power matrix (`frames x n_mels`).
pub(crate) fn mfcc_from_mel_power(mel_power: &[f64], n_mels: usize, basis: &DctBasis, n_coeffs: usize) -> Vec<f64> {
    let frames = mel_power.len() / n_mels;
    let mut acc = vec![0.0; n_coeffs];
    let mut logs = vec![0.0; n_mels];
    let mut coeffs = vec![0.0; n_coeffs];
    for row in mel_power.chunks_exact(n_mels) {
        for (l, &p) in logs.iter_mut().zip(row) {
            *l = p.max(LOG_FLOOR).ln();
        }
        basis.apply(&logs, &mut coeffs);
        for (a, c) in acc.iter_mut().zip(&coeffs) {
            *a += c;
        }
    }
    acc.iter_mut().for_each(|a| *a /= frames as f64);
    acc
}

/// Per-band frame mean of `ln(mel power + floor)`.
pub(crate) fn log_mel_mean(mel_power: &[f64], n_mels: usize) -> Vec<f64> {
    let frames = mel_power.len() / n_mels;
    let mut acc = vec![0.0; n_mels];
    for row in mel_power.chunks_exact(n_mels) {
        for (a, &p) in acc.iter_mut().zip(row) {
            *a += (p + LOG_FLOOR).ln();
        }
    }
    acc.iter_mut().for_each(|a| *a /= frames as f64);
    acc
}

/// Frame-mean MFCCs: orthonormal DCT-II of log mel power, coefficient 0 kept.
pub fn mfcc(spec: &Spectrogram, n_mels: usize, n_coeffs: usize) -> Result<Vec<f64>> {
    if n_coeffs == 0 || n_coeffs > n_mels {
        return Err(Error::invalid(format!("cannot keep {n_coeffs} coefficients of {n_mels} mel bands")));
    }
    let fb = mel_filterbank(n_mels, spec.frame_len, spec.sample_rate)?;
    let power = fb.mel_power(spec)?;
    Ok(mfcc_from_mel_power(&power, n_mels, &DctBasis::new(n_mels, n_coeffs), n_coeffs))
}

/// Frame-mean log mel power over 128 bands.
pub fn mel_features(spec: &Spectrogram) -> Result<Vec<f64>> {
    let fb = mel_filterbank(128, spec.frame_len, spec.sample_rate)?;
    Ok(log_mel_mean(&fb.mel_power(spec)?, 128))
}
