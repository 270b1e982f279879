use super::{Spectrogram, LOG_FLOOR};
use crate::error::{Error, Result};

/// Lower edges of the seven sub-bands in Hz; the last band runs to Nyquist.
pub const CONTRAST_BANDS: [f64; 7] = [0.0, 200.0, 400.0, 800.0, 1600.0, 3200.0, 6400.0];
/// Fraction of each band's bins averaged for the peak and the valley.
pub const CONTRAST_ALPHA: f64 = 0.02;

/// Bin ranges `[start, end)` of the seven contrast sub-bands.
pub fn contrast_bands(frame_len: usize, sample_rate: u32) -> Result<Vec<(usize, usize)>> {
    let bins = frame_len / 2 + 1;
    let nyquist = sample_rate as f64 / 2.0;
    if nyquist <= CONTRAST_BANDS[6] {
        return Err(Error::invalid(format!("sample rate {sample_rate} Hz cannot populate a band above 6400 Hz")));
    }
    let band_of = |f: f64| CONTRAST_BANDS.iter().rposition(|&lo| f >= lo).unwrap_or(0);
    let mut ranges = vec![(usize::MAX, 0usize); 7];
    for k in 0..bins {
        let f = k as f64 * sample_rate as f64 / frame_len as f64;
        let b = band_of(f);
        ranges[b].0 = ranges[b].0.min(k);
        ranges[b].1 = ranges[b].1.max(k + 1);
    }
    if let Some(b) = ranges.iter().position(|r| r.0 >= r.1) {
        return Err(Error::invalid(format!("contrast band {b} holds no frequency bins at this resolution")));
    }
    Ok(ranges)
}

pub(crate) fn contrast_with(spec: &Spectrogram, bands: &[(usize, usize)]) -> [f64; 7] {
    let mut acc = [0.0; 7];
    let mut sorted = Vec::new();
    for t in 0..spec.frames {
        let frame = spec.frame(t);
        for (a, &(lo, hi)) in acc.iter_mut().zip(bands) {
            sorted.clear();
            sorted.extend_from_slice(&frame[lo..hi]);
            sorted.sort_by(f64::total_cmp);
            let n = sorted.len();
            let q = ((CONTRAST_ALPHA * n as f64).round() as usize).max(1);
            let valley = sorted[..q].iter().sum::<f64>() / q as f64;
            let peak = sorted[n - q..].iter().sum::<f64>() / q as f64;
            *a += (peak + LOG_FLOOR).ln() - (valley + LOG_FLOOR).ln();
        }
    }
    if spec.frames > 0 {
        acc.iter_mut().for_each(|a| *a /= spec.frames as f64);
    }
    acc
}

/// Octave-band spectral contrast (log peak minus log valley), averaged over frames.
pub fn spectral_contrast(spec: &Spectrogram) -> Result<[f64; 7]> {
    Ok(contrast_with(spec, &contrast_bands(spec.frame_len, spec.sample_rate)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bands_tile_the_spectrum() {
        let bands = contrast_bands(2048, 22050).unwrap();
        assert_eq!(bands[0].0, 0);
        assert_eq!(bands[6].1, 1025);
        assert!(bands.windows(2).all(|w| w[0].1 == w[1].0));
    }

    #[test]
    fn low_rate_rejected() {
        assert!(matches!(contrast_bands(2048, 8000), Err(Error::InvalidInput(_))));
        assert!(matches!(contrast_bands(16, 22050), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn flat_spectrum_has_no_contrast() {
        let spec = Spectrogram::from_magnitudes(vec![0.7; 3 * 1025], 3, 2048, 512, 22050).unwrap();
        assert!(spectral_contrast(&spec).unwrap().iter().all(|&c| c.abs() < 1e-12));
    }
}
