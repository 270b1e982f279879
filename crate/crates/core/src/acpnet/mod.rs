//! The correspondence network: an image branch and a music branch project
//! into a shared 1024-d space, and a fusion classifier scores the
//! concatenation (image first, then music).

mod checkpoint;
mod target;

pub use checkpoint::{
    checkpoint_bytes, checkpoint_from_bytes, load_checkpoint, load_checkpoint_expecting, save_checkpoint, CheckpointMeta, CKPT_MAGIC,
    CKPT_VERSION,
};
pub use target::AcpTarget;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::audio::FEATURE_DIM;
use crate::error::{Error, Result};
use crate::neural::{softmax, Activation, DropoutSpec, Matrix, Mlp, Scalar, StackGrads};

/// Layer widths of the three stacks. Hidden widths are configurable; the
/// endpoints are fixed by the task.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ArchConfig {
    pub image_dim: usize,
    pub embed_dim: usize,
    pub image_hidden: Vec<usize>,
    pub music_hidden: Vec<usize>,
    pub fusion_hidden: Vec<usize>,
}

impl Default for ArchConfig {
    fn default() -> Self {
        Self {
            image_dim: 2048,
            embed_dim: 1024,
            image_hidden: vec![1024],
            music_hidden: vec![256, 512, 1024],
            fusion_hidden: vec![512, 128, 32],
        }
    }
}

impl ArchConfig {
    pub fn architecture(&self) -> Result<Architecture> {
        let image = [vec![self.image_dim], self.image_hidden.clone(), vec![self.embed_dim]].concat();
        let music = [vec![FEATURE_DIM], self.music_hidden.clone(), vec![self.embed_dim]].concat();
        let fusion = [vec![2 * self.embed_dim], self.fusion_hidden.clone(), vec![2]].concat();
        Architecture::new(image, music, fusion)
    }
}

/// Full layer-dimension lists of the three stacks, input width first.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    pub image: Vec<usize>,
    pub music: Vec<usize>,
    pub fusion: Vec<usize>,
}

impl Architecture {
    pub fn new(image: Vec<usize>, music: Vec<usize>, fusion: Vec<usize>) -> Result<Self> {
        for (name, dims) in [("image", &image), ("music", &music), ("fusion", &fusion)] {
            if dims.len() < 2 || dims.contains(&0) {
                return Err(Error::shape(format!("{name} stack needs at least one layer of positive width: {dims:?}")));
            }
        }
        if music[0] != FEATURE_DIM {
            return Err(Error::shape(format!("music stack input must be {FEATURE_DIM}, got {}", music[0])));
        }
        let (ei, em) = (*image.last().unwrap(), *music.last().unwrap());
        if ei != em {
            return Err(Error::shape(format!("image embedding ({ei}) and music embedding ({em}) differ")));
        }
        if fusion[0] != ei + em {
            return Err(Error::shape(format!("fusion input must be {}, got {}", ei + em, fusion[0])));
        }
        if *fusion.last().unwrap() != 2 {
            return Err(Error::shape("fusion stack must end in 2 logits"));
        }
        Ok(Self { image, music, fusion })
    }

    pub fn image_dim(&self) -> usize {
        self.image[0]
    }

    pub fn embed_dim(&self) -> usize {
        *self.image.last().unwrap()
    }
}

impl std::fmt::Display for Architecture {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let join = |d: &[usize]| d.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("-");
        write!(f, "image {} | music {} | fusion {}", join(&self.image), join(&self.music), join(&self.fusion))
    }
}

/// Fixed per-feature affine map `(x - mean) * inv_std` applied before a branch.
#[derive(Debug, Clone, PartialEq)]
pub struct InputNorm<T> {
    pub mean: Vec<T>,
    pub inv_std: Vec<T>,
}

impl<T: Scalar> InputNorm<T> {
    pub fn identity(dim: usize) -> Self {
        Self { mean: vec![T::zero(); dim], inv_std: vec![T::one(); dim] }
    }

    /// Per-column mean and inverse standard deviation of `rows`; constant
    /// columns keep unit scale.
    pub fn fit<R: AsRef<[T]>>(rows: &[R], dim: usize) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::invalid("cannot fit normalization on zero rows"));
        }
        let n = rows.len() as f64;
        let mut mean = vec![0.0f64; dim];
        for r in rows {
            let r = r.as_ref();
            if r.len() != dim {
                return Err(Error::shape(format!("row of length {} where {dim} expected", r.len())));
            }
            for (m, v) in mean.iter_mut().zip(r) {
                *m += v.widen();
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0f64; dim];
        for r in rows {
            for ((s, v), m) in var.iter_mut().zip(r.as_ref()).zip(&mean) {
                let d = v.widen() - m;
                *s += d * d;
            }
        }
        let inv_std = var
            .iter()
            .map(|s| {
                let sd = (s / n).sqrt();
                T::lit(if sd > 1e-8 { 1.0 / sd } else { 1.0 })
            })
            .collect();
        Ok(Self { mean: mean.into_iter().map(T::lit).collect(), inv_std })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn apply(&self, x: &[T]) -> Vec<T> {
        x.iter().zip(&self.mean).zip(&self.inv_std).map(|((&v, &m), &s)| (v - m) * s).collect()
    }

    pub fn apply_batch(&self, x: &Matrix<T>) -> Matrix<T> {
        let mut out = x.clone();
        for r in 0..out.rows() {
            let row = out.row_mut(r);
            for ((v, &m), &s) in row.iter_mut().zip(&self.mean).zip(&self.inv_std) {
                *v = (*v - m) * s;
            }
        }
        out
    }

    pub fn cast<U: Scalar>(&self) -> InputNorm<U> {
        InputNorm {
            mean: self.mean.iter().map(|v| U::lit(v.widen())).collect(),
            inv_std: self.inv_std.iter().map(|v| U::lit(v.widen())).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modality {
    Image,
    Music,
}

impl std::str::FromStr for Modality {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "image" => Ok(Modality::Image),
            "music" => Ok(Modality::Music),
            _ => Err(Error::invalid(format!("modality must be image or music, got {s:?}"))),
        }
    }
}

/// Fusion output for one pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction<T> {
    /// Probability of true correspondence, `softmax(logits)[1]`.
    pub p_true: T,
    pub logits: [T; 2],
}

impl<T: Scalar> Prediction<T> {
    fn from_logits(l: &[T]) -> Self {
        let p = softmax(l);
        Self { p_true: p[1], logits: [l[0], l[1]] }
    }

    /// Decision at the fixed 0.5 threshold.
    pub fn is_match(&self) -> bool {
        self.p_true > T::lit(0.5)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AcpGrads<T> {
    pub image: StackGrads<T>,
    pub music: StackGrads<T>,
    pub fusion: StackGrads<T>,
}

impl<T: Scalar> AcpGrads<T> {
    /// Gradient tensors in [`AcpModel::params_mut`] order.
    pub fn tensors(&self) -> Vec<&[T]> {
        let mut out = self.image.tensors();
        out.extend(self.music.tensors());
        out.extend(self.fusion.tensors());
        out
    }
}

/// Parameters of the image branch, music branch and fusion classifier.
#[derive(Debug, Clone)]
pub struct AcpModel<T> {
    arch: Architecture,
    pub image_norm: InputNorm<T>,
    pub music_norm: InputNorm<T>,
    image: Mlp<T>,
    music: Mlp<T>,
    fusion: Mlp<T>,
}

impl<T: Scalar> PartialEq for AcpModel<T> {
    fn eq(&self, other: &Self) -> bool {
        self.arch == other.arch
            && self.image_norm == other.image_norm
            && self.music_norm == other.music_norm
            && self.image == other.image
            && self.music == other.music
            && self.fusion == other.fusion
    }
}

pub(super) fn branch_layout(n_layers: usize) -> (Vec<Activation>, Vec<bool>) {
    // ReLU everywhere; dropout on every layer except the embedding layer.
    let mut dropout = vec![true; n_layers];
    dropout[n_layers - 1] = false;
    (vec![Activation::Relu; n_layers], dropout)
}

pub(super) fn fusion_layout(n_layers: usize) -> (Vec<Activation>, Vec<bool>) {
    let mut acts = vec![Activation::Relu; n_layers];
    acts[n_layers - 1] = Activation::Identity;
    let mut dropout = vec![true; n_layers];
    dropout[n_layers - 1] = false;
    (acts, dropout)
}

impl<T: Scalar> AcpModel<T> {
    /// He-uniform initialization, identity input normalization.
    pub fn new<R: Rng + ?Sized>(arch: &Architecture, rng: &mut R) -> Result<Self> {
        let (ia, id) = branch_layout(arch.image.len() - 1);
        let (ma, md) = branch_layout(arch.music.len() - 1);
        let (fa, fd) = fusion_layout(arch.fusion.len() - 1);
        Ok(Self {
            image_norm: InputNorm::identity(arch.image[0]),
            music_norm: InputNorm::identity(arch.music[0]),
            image: Mlp::he_uniform(&arch.image, ia, id, rng)?,
            music: Mlp::he_uniform(&arch.music, ma, md, rng)?,
            fusion: Mlp::he_uniform(&arch.fusion, fa, fd, rng)?,
            arch: arch.clone(),
        })
    }

    /// All-zero parameters.
    pub fn zeros(arch: &Architecture) -> Result<Self> {
        let (ia, id) = branch_layout(arch.image.len() - 1);
        let (ma, md) = branch_layout(arch.music.len() - 1);
        let (fa, fd) = fusion_layout(arch.fusion.len() - 1);
        Ok(Self {
            image_norm: InputNorm::identity(arch.image[0]),
            music_norm: InputNorm::identity(arch.music[0]),
            image: Mlp::zeros(&arch.image, ia, id)?,
            music: Mlp::zeros(&arch.music, ma, md)?,
            fusion: Mlp::zeros(&arch.fusion, fa, fd)?,
            arch: arch.clone(),
        })
    }

    pub(crate) fn from_parts(
        arch: Architecture,
        image_norm: InputNorm<T>,
        music_norm: InputNorm<T>,
        image: Mlp<T>,
        music: Mlp<T>,
        fusion: Mlp<T>,
    ) -> Result<Self> {
        if image.dims() != arch.image || music.dims() != arch.music || fusion.dims() != arch.fusion {
            return Err(Error::shape("stacks do not match the architecture"));
        }
        if image_norm.dim() != arch.image[0] || music_norm.dim() != arch.music[0] {
            return Err(Error::shape("input normalization width does not match the architecture"));
        }
        Ok(Self { arch, image_norm, music_norm, image, music, fusion })
    }

    pub fn architecture(&self) -> &Architecture {
        &self.arch
    }

    pub fn image_stack(&self) -> &Mlp<T> {
        &self.image
    }

    pub fn music_stack(&self) -> &Mlp<T> {
        &self.music
    }

    pub fn fusion_stack(&self) -> &Mlp<T> {
        &self.fusion
    }

    pub fn param_count(&self) -> usize {
        self.image.param_count() + self.music.param_count() + self.fusion.param_count()
    }

    /// Trainable tensors: image, music, then fusion stack.
    pub fn params_mut(&mut self) -> Vec<&mut [T]> {
        let mut out = self.image.params_mut();
        out.extend(self.music.params_mut());
        out.extend(self.fusion.params_mut());
        out
    }

    pub fn params(&self) -> Vec<&[T]> {
        let mut out = self.image.params();
        out.extend(self.music.params());
        out.extend(self.fusion.params());
        out
    }

    pub fn tensor_lens(&self) -> Vec<usize> {
        self.params().iter().map(|p| p.len()).collect()
    }

    pub fn cast<U: Scalar>(&self) -> AcpModel<U> {
        AcpModel {
            arch: self.arch.clone(),
            image_norm: self.image_norm.cast(),
            music_norm: self.music_norm.cast(),
            image: self.image.cast(),
            music: self.music.cast(),
            fusion: self.fusion.cast(),
        }
    }

    /// Image embedding in the common space.
    pub fn image_forward(&self, emb: &[T]) -> Result<Vec<T>> {
        if emb.len() != self.arch.image_dim() {
            return Err(Error::shape(format!("image embedding must have {} values, got {}", self.arch.image_dim(), emb.len())));
        }
        self.image.forward(&self.image_norm.apply(emb))
    }

    /// Music embedding in the common space.
    pub fn music_forward(&self, feat: &[T]) -> Result<Vec<T>> {
        if feat.len() != FEATURE_DIM {
            return Err(Error::shape(format!("music features must have {FEATURE_DIM} values, got {}", feat.len())));
        }
        self.music.forward(&self.music_norm.apply(feat))
    }

    /// Fusion classifier on `v_img ++ v_mus`.
    pub fn fuse_predict(&self, v_img: &[T], v_mus: &[T]) -> Result<Prediction<T>> {
        let e = self.arch.embed_dim();
        if v_img.len() != e || v_mus.len() != e {
            return Err(Error::shape(format!("embeddings must have {e} values, got {} and {}", v_img.len(), v_mus.len())));
        }
        let joint = [v_img, v_mus].concat();
        Ok(Prediction::from_logits(&self.fusion.forward(&joint)?))
    }

    /// Full pair prediction: fusion of the two branch embeddings.
    pub fn acp_forward(&self, emb: &[T], feat: &[T]) -> Result<Prediction<T>> {
        self.fuse_predict(&self.image_forward(emb)?, &self.music_forward(feat)?)
    }

    /// Pre-fusion embedding for either modality; a wrong input width is an
    /// invalid input rather than a shape error.
    pub fn extract_embedding(&self, modality: Modality, input: &[T]) -> Result<Vec<T>> {
        let expected = match modality {
            Modality::Image => self.arch.image_dim(),
            Modality::Music => FEATURE_DIM,
        };
        if input.len() != expected {
            return Err(Error::invalid(format!("{modality:?} input must have {expected} values, got {}", input.len())));
        }
        match modality {
            Modality::Image => self.image_forward(input),
            Modality::Music => self.music_forward(input),
        }
    }

    pub fn embed_images(&self, x: &Matrix<T>) -> Result<Matrix<T>> {
        if x.cols() != self.arch.image_dim() {
            return Err(Error::shape(format!("image batch must have {} columns", self.arch.image_dim())));
        }
        self.image.forward_batch(&self.image_norm.apply_batch(x))
    }

    pub fn embed_music(&self, x: &Matrix<T>) -> Result<Matrix<T>> {
        if x.cols() != FEATURE_DIM {
            return Err(Error::shape(format!("music batch must have {FEATURE_DIM} columns")));
        }
        self.music.forward_batch(&self.music_norm.apply_batch(x))
    }

    /// Fusion logits for row-aligned embedding batches.
    pub fn fuse_batch(&self, v_img: &Matrix<T>, v_mus: &Matrix<T>) -> Result<Matrix<T>> {
        self.fusion.forward_batch(&Matrix::hconcat(v_img, v_mus)?)
    }

    /// Predictions for row-aligned batches of image embeddings and music features.
    pub fn predict_batch(&self, img: &Matrix<T>, mus: &Matrix<T>) -> Result<Vec<Prediction<T>>> {
        let logits = self.fuse_batch(&self.embed_images(img)?, &self.embed_music(mus)?)?;
        Ok((0..logits.rows()).map(|r| Prediction::from_logits(logits.row(r))).collect())
    }

    /// Training forward pass; returns fusion logits and caches activations.
    pub fn forward_train<R: Rng + ?Sized>(
        &mut self,
        img: &Matrix<T>,
        mus: &Matrix<T>,
        dropout: &DropoutSpec,
        rng: &mut R,
    ) -> Result<Matrix<T>> {
        if img.rows() != mus.rows() {
            return Err(Error::shape("image and music batches differ in size"));
        }
        if img.cols() != self.arch.image_dim() || mus.cols() != FEATURE_DIM {
            return Err(Error::shape("batch widths do not match the architecture"));
        }
        let vi = self.image.forward_train(&self.image_norm.apply_batch(img), dropout, rng)?;
        let vm = self.music.forward_train(&self.music_norm.apply_batch(mus), dropout, rng)?;
        self.fusion.forward_train(&Matrix::hconcat(&vi, &vm)?, dropout, rng)
    }

    /// Gradients for the last `forward_train`, given `dLoss/dlogits`.
    /// With `input_grad`, also returns gradients with respect to the raw
    /// (pre-normalization) image and music inputs.
    #[allow(clippy::type_complexity)]
    pub fn backward(&mut self, grad_logits: &Matrix<T>, input_grad: bool) -> Result<(AcpGrads<T>, Option<(Matrix<T>, Matrix<T>)>)> {
        let (fusion, g_joint) = self.fusion.backward(grad_logits, true)?;
        let (g_img, g_mus) = g_joint.expect("fusion input gradient").hsplit(self.arch.embed_dim());
        let (image, gi) = self.image.backward(&g_img, input_grad)?;
        let (music, gm) = self.music.backward(&g_mus, input_grad)?;
        let inputs = match (gi, gm) {
            (Some(mut gi), Some(mut gm)) => {
                for (norm, g) in [(&self.image_norm, &mut gi), (&self.music_norm, &mut gm)] {
                    for r in 0..g.rows() {
                        g.row_mut(r).iter_mut().zip(&norm.inv_std).for_each(|(v, s)| *v = *v * *s);
                    }
                }
                Some((gi, gm))
            }
            _ => None,
        };
        Ok((AcpGrads { image, music, fusion }, inputs))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn small_arch() -> Architecture {
        ArchConfig { image_dim: 24, embed_dim: 16, image_hidden: vec![20], music_hidden: vec![32, 24, 16], fusion_hidden: vec![12, 8, 4] }
            .architecture()
            .unwrap()
    }

    fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f32> {
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    #[test]
    fn default_shape_chain() {
        let arch = ArchConfig::default().architecture().unwrap();
        assert_eq!(arch.image, vec![2048, 1024, 1024]);
        assert_eq!(arch.music, vec![193, 256, 512, 1024, 1024]);
        assert_eq!(arch.fusion, vec![2048, 512, 128, 32, 2]);
    }

    #[test]
    fn inconsistent_architectures_rejected() {
        assert!(Architecture::new(vec![10, 8], vec![193, 8], vec![15, 2]).is_err());
        assert!(Architecture::new(vec![10, 8], vec![192, 8], vec![16, 2]).is_err());
        assert!(Architecture::new(vec![10, 8], vec![193, 4], vec![12, 2]).is_err());
        assert!(Architecture::new(vec![10, 8], vec![193, 8], vec![16, 3]).is_err());
    }

    #[test]
    fn zero_model_gives_zero_embedding() {
        let m = AcpModel::<f32>::zeros(&small_arch()).unwrap();
        assert!(m.image_forward(&[0.0; 24]).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn wrong_widths() {
        let m = AcpModel::<f32>::zeros(&small_arch()).unwrap();
        assert!(matches!(m.music_forward(&[0.0; 192]), Err(Error::Shape(_))));
        assert!(matches!(m.image_forward(&[0.0; 23]), Err(Error::Shape(_))));
        assert!(matches!(m.extract_embedding(Modality::Image, &[0.0; 193]), Err(Error::InvalidInput(_))));
        assert!(matches!(m.fuse_predict(&[0.0; 16], &[0.0; 15]), Err(Error::Shape(_))));
    }

    #[test]
    fn composition_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = AcpModel::<f32>::new(&small_arch(), &mut rng).unwrap();
        let img = random_vec(&mut rng, 24);
        let mus = random_vec(&mut rng, 193);
        let direct = m.acp_forward(&img, &mus).unwrap();
        let composed = m.fuse_predict(&m.image_forward(&img).unwrap(), &m.music_forward(&mus).unwrap()).unwrap();
        assert_eq!(direct, composed);
        assert!((direct.p_true + softmax(&direct.logits)[0] - 1.0).abs() < 1e-6);
        assert_eq!(m.extract_embedding(Modality::Music, &mus).unwrap(), m.music_forward(&mus).unwrap());
    }

    #[test]
    fn batch_predictions_match_single() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let m = AcpModel::<f32>::new(&small_arch(), &mut rng).unwrap();
        let imgs: Vec<Vec<f32>> = (0..5).map(|_| random_vec(&mut rng, 24)).collect();
        let muss: Vec<Vec<f32>> = (0..5).map(|_| random_vec(&mut rng, 193)).collect();
        let batch = m.predict_batch(&Matrix::from_rows(&imgs, 24).unwrap(), &Matrix::from_rows(&muss, 193).unwrap()).unwrap();
        for i in 0..5 {
            let single = m.acp_forward(&imgs[i], &muss[i]).unwrap();
            assert_eq!(single.p_true.to_bits(), batch[i].p_true.to_bits());
        }
    }

    #[test]
    fn norm_fit_standardizes() {
        let rows = vec![vec![1.0f64, 5.0], vec![3.0, 5.0]];
        let norm = InputNorm::fit(&rows, 2).unwrap();
        assert_eq!(norm.apply(&[1.0, 5.0]), vec![-1.0, 0.0]);
        assert_eq!(norm.apply(&[3.0, 7.0]), vec![1.0, 2.0]);
    }
}
