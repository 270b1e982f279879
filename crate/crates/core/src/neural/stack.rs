use rand::Rng;
use serde::{Deserialize, Serialize};

use super::dropout::DropoutSpec;
use super::{DenseLayer, LayerGrads, Matrix, Scalar};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Identity,
}

impl Activation {
    #[inline]
    fn apply<T: Scalar>(self, z: T) -> T {
        match self {
            Activation::Relu => z.max(T::zero()),
            Activation::Identity => z,
        }
    }
}

/// Activations cached by a training forward pass.
#[derive(Debug, Clone)]
struct ForwardCache<T> {
    /// Input to each layer.
    inputs: Vec<Matrix<T>>,
    /// Pre-activation output of each layer.
    pre: Vec<Matrix<T>>,
    /// Dropout multipliers applied after each layer, if any.
    scales: Vec<Option<Vec<T>>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StackGrads<T> {
    pub layers: Vec<LayerGrads<T>>,
}

impl<T: Scalar> StackGrads<T> {
    /// Weight and bias gradients in parameter declaration order.
    pub fn tensors(&self) -> Vec<&[T]> {
        self.layers.iter().flat_map(|l| [&l.weights[..], &l.bias[..]]).collect()
    }
}

/// A stack of dense layers, each followed by an activation and optionally
/// by dropout.
#[derive(Debug, Clone)]
pub struct Mlp<T> {
    layers: Vec<DenseLayer<T>>,
    activations: Vec<Activation>,
    dropout_after: Vec<bool>,
    cache: Option<ForwardCache<T>>,
}

impl<T: Scalar> PartialEq for Mlp<T> {
    fn eq(&self, other: &Self) -> bool {
        self.layers == other.layers && self.activations == other.activations && self.dropout_after == other.dropout_after
    }
}

impl<T: Scalar> Mlp<T> {
    pub fn new(layers: Vec<DenseLayer<T>>, activations: Vec<Activation>, dropout_after: Vec<bool>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::shape("a stack needs at least one layer"));
        }
        if activations.len() != layers.len() || dropout_after.len() != layers.len() {
            return Err(Error::shape("one activation and one dropout flag per layer"));
        }
        for (i, w) in layers.windows(2).enumerate() {
            if w[0].out_dim() != w[1].in_dim() {
                return Err(Error::shape(format!(
                    "layer {i} outputs {} values but layer {} expects {}",
                    w[0].out_dim(),
                    i + 1,
                    w[1].in_dim()
                )));
            }
        }
        Ok(Self { layers, activations, dropout_after, cache: None })
    }

    /// He-initialized stack over `dims` (`dims.len() - 1` layers).
    pub fn he_uniform<R: Rng + ?Sized>(
        dims: &[usize],
        activations: Vec<Activation>,
        dropout_after: Vec<bool>,
        rng: &mut R,
    ) -> Result<Self> {
        if dims.len() < 2 {
            return Err(Error::shape("a stack needs at least two dims"));
        }
        let layers = dims.windows(2).map(|w| DenseLayer::he_uniform(w[0], w[1], rng)).collect();
        Self::new(layers, activations, dropout_after)
    }

    /// All-zero stack over `dims`.
    pub fn zeros(dims: &[usize], activations: Vec<Activation>, dropout_after: Vec<bool>) -> Result<Self> {
        if dims.len() < 2 {
            return Err(Error::shape("a stack needs at least two dims"));
        }
        let layers = dims.windows(2).map(|w| DenseLayer::zeros(w[0], w[1])).collect();
        Self::new(layers, activations, dropout_after)
    }

    pub fn layers(&self) -> &[DenseLayer<T>] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [DenseLayer<T>] {
        self.cache = None;
        &mut self.layers
    }

    pub fn activations(&self) -> &[Activation] {
        &self.activations
    }

    pub fn dropout_after(&self) -> &[bool] {
        &self.dropout_after
    }

    /// Layer widths, input first.
    pub fn dims(&self) -> Vec<usize> {
        std::iter::once(self.layers[0].in_dim()).chain(self.layers.iter().map(|l| l.out_dim())).collect()
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn out_dim(&self) -> usize {
        self.layers.last().unwrap().out_dim()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    /// Parameter tensors (weights then bias, per layer).
    pub fn params(&self) -> Vec<&[T]> {
        self.layers.iter().flat_map(|l| [&l.weights[..], &l.bias[..]]).collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut [T]> {
        self.cache = None;
        self.layers.iter_mut().flat_map(|l| [&mut l.weights[..], &mut l.bias[..]]).collect()
    }

    pub fn tensor_lens(&self) -> Vec<usize> {
        self.params().iter().map(|p| p.len()).collect()
    }

    pub fn zero_grads(&self) -> StackGrads<T> {
        StackGrads { layers: self.layers.iter().map(|l| l.zero_grads()).collect() }
    }

    pub fn cast<U: Scalar>(&self) -> Mlp<U> {
        Mlp {
            layers: self.layers.iter().map(|l| l.cast()).collect(),
            activations: self.activations.clone(),
            dropout_after: self.dropout_after.clone(),
            cache: None,
        }
    }

    /// Inference on one vector (no dropout).
    pub fn forward(&self, x: &[T]) -> Result<Vec<T>> {
        let mut h = x.to_vec();
        for (layer, act) in self.layers.iter().zip(&self.activations) {
            h = layer.forward(&h)?;
            h.iter_mut().for_each(|v| *v = act.apply(*v));
        }
        Ok(h)
    }

    /// Inference that also records, for every ReLU unit, whether it was active.
    pub fn forward_with_pattern(&self, x: &[T], pattern: &mut Vec<bool>) -> Result<Vec<T>> {
        let mut h = x.to_vec();
        for (layer, act) in self.layers.iter().zip(&self.activations) {
            h = layer.forward(&h)?;
            if *act == Activation::Relu {
                pattern.extend(h.iter().map(|&z| z > T::zero()));
            }
            h.iter_mut().for_each(|v| *v = act.apply(*v));
        }
        Ok(h)
    }

    /// Inference on a batch (no dropout).
    pub fn forward_batch(&self, x: &Matrix<T>) -> Result<Matrix<T>> {
        let mut h = self.layers[0].forward_batch(x)?;
        h.as_mut_slice().iter_mut().for_each(|v| *v = self.activations[0].apply(*v));
        for (layer, act) in self.layers.iter().zip(&self.activations).skip(1) {
            h = layer.forward_batch(&h)?;
            h.as_mut_slice().iter_mut().for_each(|v| *v = act.apply(*v));
        }
        Ok(h)
    }

    /// Training forward pass; caches what `backward` needs.
    pub fn forward_train<R: Rng + ?Sized>(&mut self, x: &Matrix<T>, dropout: &DropoutSpec, rng: &mut R) -> Result<Matrix<T>> {
        self.cache = None;
        let n = self.layers.len();
        let mut cache = ForwardCache { inputs: Vec::with_capacity(n), pre: Vec::with_capacity(n), scales: Vec::with_capacity(n) };
        let mut h = x.clone();
        for i in 0..n {
            let z = self.layers[i].forward_batch(&h)?;
            cache.inputs.push(h);
            let act = self.activations[i];
            let mut out = z.clone();
            out.as_mut_slice().iter_mut().for_each(|v| *v = act.apply(*v));
            let scales = if self.dropout_after[i] && dropout.active() {
                let s: Vec<T> = dropout.sample_scales(out.as_slice().len(), rng);
                out.as_mut_slice().iter_mut().zip(&s).for_each(|(v, s)| *v = *v * *s);
                Some(s)
            } else {
                None
            };
            cache.pre.push(z);
            cache.scales.push(scales);
            h = out;
        }
        self.cache = Some(cache);
        Ok(h)
    }

    /// Reverse pass for the most recent `forward_train`. Consumes the cache.
    pub fn backward(&mut self, grad_out: &Matrix<T>, input_grad: bool) -> Result<(StackGrads<T>, Option<Matrix<T>>)> {
        let cache = self.cache.take().ok_or_else(|| Error::State("backward called without a cached forward pass".into()))?;
        let last = cache.pre.last().unwrap();
        if grad_out.rows() != last.rows() || grad_out.cols() != last.cols() {
            return Err(Error::shape(format!(
                "output gradient is {}x{}, forward produced {}x{}",
                grad_out.rows(),
                grad_out.cols(),
                last.rows(),
                last.cols()
            )));
        }
        let mut grads = self.zero_grads();
        let mut g = grad_out.clone();
        for i in (0..self.layers.len()).rev() {
            if let Some(s) = &cache.scales[i] {
                g.as_mut_slice().iter_mut().zip(s).for_each(|(v, s)| *v = *v * *s);
            }
            if self.activations[i] == Activation::Relu {
                for (v, &z) in g.as_mut_slice().iter_mut().zip(cache.pre[i].as_slice()) {
                    if z <= T::zero() {
                        *v = T::zero();
                    }
                }
            }
            let need = i > 0 || input_grad;
            match self.layers[i].backward_batch(&cache.inputs[i], &g, &mut grads.layers[i], need) {
                Some(gx) => g = gx,
                None => return Ok((grads, None)),
            }
        }
        Ok((grads, Some(g)))
    }
}
