use super::Spectrogram;

/// Reference frequency of pitch class 0 (C4).
const C4_HZ: f64 = 261.6256;
/// Bins at or below this frequency are ignored.
const MIN_CHROMA_HZ: f64 = 20.0;
const EPS: f64 = 1e-10;

/// Radii of the fifths, minor-thirds and major-thirds circles, one per
/// tonal-centroid component.
pub const TONNETZ_RADII: [f64; 6] = [1.0, 1.0, 1.0, 1.0, 0.5, 0.5];

/// Pitch class of every STFT bin, `None` for bins at or below 20 Hz.
pub fn pitch_class_map(frame_len: usize, sample_rate: u32) -> Vec<Option<usize>> {
    (0..frame_len / 2 + 1)
        .map(|k| {
            let f = k as f64 * sample_rate as f64 / frame_len as f64;
            (f > MIN_CHROMA_HZ).then(|| ((12.0 * (f / C4_HZ).log2()).round() as i64).rem_euclid(12) as usize)
        })
        .collect()
}

/// Raw per-frame pitch-class magnitude sums, before any normalization.
pub fn chroma_frames(spec: &Spectrogram) -> Vec<[f64; 12]> {
    chroma_frames_with(spec, &pitch_class_map(spec.frame_len, spec.sample_rate))
}

pub(crate) fn chroma_frames_with(spec: &Spectrogram, classes: &[Option<usize>]) -> Vec<[f64; 12]> {
    (0..spec.frames)
        .map(|t| {
            let mut c = [0.0; 12];
            for (m, class) in spec.frame(t).iter().zip(classes) {
                if let Some(p) = class {
                    c[*p] += m;
                }
            }
            c
        })
        .collect()
}

pub(crate) fn chroma_mean(frames: &[[f64; 12]]) -> [f64; 12] {
    let mut acc = [0.0; 12];
    for c in frames {
        let max = c.iter().cloned().fold(0.0, f64::max);
        if max > 0.0 {
            for (a, v) in acc.iter_mut().zip(c) {
                *a += v / max;
            }
        }
    }
    if !frames.is_empty() {
        acc.iter_mut().for_each(|a| *a /= frames.len() as f64);
    }
    acc
}

/// 12-bin chroma, each frame max-normalized, averaged over frames.
pub fn chroma(spec: &Spectrogram) -> [f64; 12] {
    chroma_mean(&chroma_frames(spec))
}

/// The 6x12 tonal-centroid projection; column `l` is pitch class `l`.
pub fn tonnetz_projection() -> [[f64; 12]; 6] {
    use std::f64::consts::PI;
    let mut phi = [[0.0; 12]; 6];
    for l in 0..12 {
        let l_f = l as f64;
        let angles = [7.0 * PI * l_f / 6.0, 3.0 * PI * l_f / 2.0, 2.0 * PI * l_f / 3.0];
        for (circle, angle) in angles.iter().enumerate() {
            let r = TONNETZ_RADII[2 * circle];
            phi[2 * circle][l] = r * angle.sin();
            phi[2 * circle + 1][l] = r * angle.cos();
        }
    }
    phi
}

pub(crate) fn tonal_centroid_mean(frames: &[[f64; 12]]) -> [f64; 6] {
    let phi = tonnetz_projection();
    let mut acc = [0.0; 6];
    for c in frames {
        let norm = c.iter().map(|v| v.abs()).sum::<f64>().max(EPS);
        for (a, row) in acc.iter_mut().zip(&phi) {
            *a += row.iter().zip(c).map(|(p, v)| p * v).sum::<f64>() / norm;
        }
    }
    if !frames.is_empty() {
        acc.iter_mut().for_each(|a| *a /= frames.len() as f64);
    }
    acc
}

/// 6-D tonal centroid of the L1-normalized raw chroma, averaged over frames.
pub fn tonal_centroid(spec: &Spectrogram) -> [f64; 6] {
    tonal_centroid_mean(&chroma_frames(spec))
}
