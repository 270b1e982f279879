use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{AcpModel, Architecture};
use crate::audio::FEATURE_DIM;
use crate::error::{Error, Result};
use crate::neural::{softmax_cross_entropy, DropoutSpec, GradTarget, Matrix};

/// Mean cross-entropy of the whole network over a fixed set of labeled
/// pairs, exposed to the finite-difference checker.
#[derive(Debug, Clone)]
pub struct AcpTarget {
    pub model: AcpModel<f64>,
    pub images: Vec<Vec<f64>>,
    pub music: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
}

impl AcpTarget {
    /// Randomly initialized model and `n_pairs` random inputs with random labels.
    pub fn random(arch: &Architecture, n_pairs: usize, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let model = AcpModel::<f64>::new(arch, &mut rng)?;
        let images = (0..n_pairs).map(|_| (0..arch.image_dim()).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let music = (0..n_pairs).map(|_| (0..FEATURE_DIM).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let labels = (0..n_pairs).map(|_| rng.random_range(0..2)).collect();
        Self::new(model, images, music, labels)
    }

    pub fn new(model: AcpModel<f64>, images: Vec<Vec<f64>>, music: Vec<Vec<f64>>, labels: Vec<usize>) -> Result<Self> {
        if images.is_empty() || images.len() != music.len() || images.len() != labels.len() {
            return Err(Error::invalid("need the same non-zero number of images, music vectors and labels"));
        }
        Ok(Self { model, images, music, labels })
    }
}

impl GradTarget for AcpTarget {
    fn tensors(&self) -> Vec<(String, usize)> {
        let mut out = Vec::new();
        for (name, stack) in
            [("image", self.model.image_stack()), ("music", self.model.music_stack()), ("fusion", self.model.fusion_stack())]
        {
            for (i, p) in stack.params().iter().enumerate() {
                out.push((format!("{name}.layer{}.{}", i / 2, if i % 2 == 0 { "weight" } else { "bias" }), p.len()));
            }
        }
        out
    }

    fn get(&self, tensor: usize, index: usize) -> f64 {
        self.model.params()[tensor][index]
    }

    fn set(&mut self, tensor: usize, index: usize, value: f64) {
        self.model.params_mut()[tensor][index] = value;
    }

    fn loss(&self, pattern: &mut Vec<bool>) -> Result<f64> {
        let m = &self.model;
        let mut total = 0.0;
        for ((img, mus), &label) in self.images.iter().zip(&self.music).zip(&self.labels) {
            let vi = m.image_stack().forward_with_pattern(&m.image_norm.apply(img), pattern)?;
            let vm = m.music_stack().forward_with_pattern(&m.music_norm.apply(mus), pattern)?;
            let logits = m.fusion_stack().forward_with_pattern(&[vi, vm].concat(), pattern)?;
            total += softmax_cross_entropy(&logits, label)?.0;
        }
        Ok(total / self.labels.len() as f64)
    }

    fn gradients(&mut self) -> Result<Vec<Vec<f64>>> {
        let n = self.labels.len();
        let img = Matrix::from_rows(&self.images, self.model.architecture().image_dim())?;
        let mus = Matrix::from_rows(&self.music, FEATURE_DIM)?;
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let logits = self.model.forward_train(&img, &mus, &DropoutSpec::infer(), &mut rng)?;
        let mut grad = Matrix::zeros(n, 2);
        for (r, &label) in self.labels.iter().enumerate() {
            let (_, g) = softmax_cross_entropy(logits.row(r), label)?;
            for (dst, v) in grad.row_mut(r).iter_mut().zip(g) {
                *dst = v / n as f64;
            }
        }
        let (grads, _) = self.model.backward(&grad, false)?;
        Ok(grads.tensors().into_iter().map(|t| t.to_vec()).collect())
    }
}
