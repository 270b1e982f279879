use rand::Rng;

use super::{Matrix, Scalar};
use crate::error::{Error, Result};

const LANES: usize = 8;

/// Dot product with a fixed eight-lane accumulation order. Every forward
/// path (single vector or batch) goes through this function, so batched
/// and per-item results are bit-identical.
#[inline]
pub(crate) fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [T::zero(); LANES];
    let ca = a.chunks_exact(LANES);
    let cb = b.chunks_exact(LANES);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for j in 0..LANES {
            acc[j] = acc[j] + x[j] * y[j];
        }
    }
    let mut s = ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7]));
    for (x, y) in ra.iter().zip(rb) {
        s = s + *x * *y;
    }
    s
}

/// `y += alpha * x`
#[inline]
pub(crate) fn axpy<T: Scalar>(alpha: T, x: &[T], y: &mut [T]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi = *yi + alpha * xi;
    }
}

/// Fully connected layer `y = W x + b`, weights stored row-major `out x in`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer<T> {
    in_dim: usize,
    out_dim: usize,
    pub(crate) weights: Vec<T>,
    pub(crate) bias: Vec<T>,
}

/// Gradients with the same shapes as a [`DenseLayer`]'s parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrads<T> {
    pub weights: Vec<T>,
    pub bias: Vec<T>,
}

impl<T: Scalar> DenseLayer<T> {
    pub fn new(in_dim: usize, out_dim: usize, weights: Vec<T>, bias: Vec<T>) -> Result<Self> {
        if in_dim == 0 || out_dim == 0 {
            return Err(Error::shape("layer dimensions must be positive"));
        }
        if weights.len() != in_dim * out_dim || bias.len() != out_dim {
            return Err(Error::shape(format!("{out_dim}x{in_dim} layer given {} weights and {} biases", weights.len(), bias.len())));
        }
        Ok(Self { in_dim, out_dim, weights, bias })
    }

    pub fn zeros(in_dim: usize, out_dim: usize) -> Self {
        Self { in_dim, out_dim, weights: vec![T::zero(); in_dim * out_dim], bias: vec![T::zero(); out_dim] }
    }

    /// He-uniform weights (`U(-sqrt(6/in), sqrt(6/in))`), zero bias.
    pub fn he_uniform<R: Rng + ?Sized>(in_dim: usize, out_dim: usize, rng: &mut R) -> Self {
        let limit = (6.0 / in_dim as f64).sqrt();
        let weights = (0..in_dim * out_dim).map(|_| T::lit(rng.random_range(-limit..limit))).collect();
        Self { in_dim, out_dim, weights, bias: vec![T::zero(); out_dim] }
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn bias(&self) -> &[T] {
        &self.bias
    }

    pub fn weight_row(&self, o: usize) -> &[T] {
        &self.weights[o * self.in_dim..(o + 1) * self.in_dim]
    }

    pub fn zero_grads(&self) -> LayerGrads<T> {
        LayerGrads { weights: vec![T::zero(); self.weights.len()], bias: vec![T::zero(); self.out_dim] }
    }

    pub fn cast<U: Scalar>(&self) -> DenseLayer<U> {
        DenseLayer {
            in_dim: self.in_dim,
            out_dim: self.out_dim,
            weights: self.weights.iter().map(|v| U::lit(v.widen())).collect(),
            bias: self.bias.iter().map(|v| U::lit(v.widen())).collect(),
        }
    }

    pub fn forward(&self, x: &[T]) -> Result<Vec<T>> {
        if x.len() != self.in_dim {
            return Err(Error::shape(format!("layer expects {} inputs, got {}", self.in_dim, x.len())));
        }
        Ok((0..self.out_dim).map(|o| dot(self.weight_row(o), x) + self.bias[o]).collect())
    }

    pub fn forward_batch(&self, x: &Matrix<T>) -> Result<Matrix<T>> {
        if x.cols() != self.in_dim {
            return Err(Error::shape(format!("layer expects {} inputs, got {}", self.in_dim, x.cols())));
        }
        let mut out = Matrix::zeros(x.rows(), self.out_dim);
        let cols = self.out_dim;
        let data = out.as_mut_slice();
        // Weight row outer so each row is read from memory once per batch.
        for o in 0..self.out_dim {
            let w = self.weight_row(o);
            let b = self.bias[o];
            for r in 0..x.rows() {
                data[r * cols + o] = dot(w, x.row(r)) + b;
            }
        }
        Ok(out)
    }

    /// Accumulates parameter gradients for a batch into `grads` and returns
    /// the input gradient when requested.
    pub fn backward_batch(&self, x: &Matrix<T>, grad_out: &Matrix<T>, grads: &mut LayerGrads<T>, input_grad: bool) -> Option<Matrix<T>> {
        let batch = x.rows();
        for o in 0..self.out_dim {
            let gw = &mut grads.weights[o * self.in_dim..(o + 1) * self.in_dim];
            let mut gb = T::zero();
            for r in 0..batch {
                let g = grad_out.row(r)[o];
                if g != T::zero() {
                    axpy(g, x.row(r), gw);
                    gb = gb + g;
                }
            }
            grads.bias[o] = grads.bias[o] + gb;
        }
        if !input_grad {
            return None;
        }
        let mut gx = Matrix::zeros(batch, self.in_dim);
        // Blocks of rows keep the touched part of `gx` cache-resident while
        // the weights stream past.
        const BLOCK: usize = 8;
        for start in (0..batch).step_by(BLOCK) {
            let end = (start + BLOCK).min(batch);
            for o in 0..self.out_dim {
                let w = self.weight_row(o);
                for r in start..end {
                    let g = grad_out.row(r)[o];
                    if g != T::zero() {
                        axpy(g, w, gx.row_mut(r));
                    }
                }
            }
        }
        Some(gx)
    }
}

/// `W x + b` for a single input vector.
pub fn dense_forward<T: Scalar>(layer: &DenseLayer<T>, input: &[T]) -> Result<Vec<T>> {
    layer.forward(input)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_layer() {
        let l = DenseLayer::new(3, 3, vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0], vec![0.0; 3]).unwrap();
        assert_eq!(l.forward(&[1.5, -2.0, 3.0]).unwrap(), vec![1.5, -2.0, 3.0]);
    }

    #[test]
    fn hand_arithmetic() {
        let l = DenseLayer::new(2, 2, vec![1.0, 2.0, 3.0, 4.0], vec![1.0, 1.0]).unwrap();
        assert_eq!(dense_forward(&l, &[1.0, 1.0]).unwrap(), vec![4.0, 8.0]);
    }

    #[test]
    fn matches_naive_double_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let l = DenseLayer::<f64>::he_uniform(37, 19, &mut rng);
        let x: Vec<f64> = (0..37).map(|_| rng.random_range(-1.0..1.0)).collect();
        let y = l.forward(&x).unwrap();
        for o in 0..19 {
            let mut s = l.bias[o];
            for i in 0..37 {
                s += l.weights[o * 37 + i] * x[i];
            }
            assert!((y[o] - s).abs() < 1e-12);
        }
    }

    #[test]
    fn batch_equals_single_bitwise() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let l = DenseLayer::<f32>::he_uniform(29, 11, &mut rng);
        let rows: Vec<Vec<f32>> = (0..5).map(|_| (0..29).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let out = l.forward_batch(&Matrix::from_rows(&rows, 29).unwrap()).unwrap();
        for (r, row) in rows.iter().enumerate() {
            let single = l.forward(row).unwrap();
            assert!(single.iter().zip(out.row(r)).all(|(a, b)| a.to_bits() == b.to_bits()));
        }
    }

    #[test]
    fn shape_errors() {
        assert!(matches!(DenseLayer::<f32>::new(2, 2, vec![0.0; 3], vec![0.0; 2]), Err(Error::Shape(_))));
        let l = DenseLayer::<f32>::zeros(3, 2);
        assert!(matches!(l.forward(&[1.0, 2.0]), Err(Error::Shape(_))));
    }

    #[test]
    fn backward_matches_outer_products() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let l = DenseLayer::<f64>::he_uniform(6, 4, &mut rng);
        let x = Matrix::from_vec(3, 6, (0..18).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
        let g = Matrix::from_vec(3, 4, (0..12).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
        let mut grads = l.zero_grads();
        let gx = l.backward_batch(&x, &g, &mut grads, true).unwrap();
        for o in 0..4 {
            for i in 0..6 {
                let expect: f64 = (0..3).map(|r| g.row(r)[o] * x.row(r)[i]).sum();
                assert!((grads.weights[o * 6 + i] - expect).abs() < 1e-12);
            }
            let expect: f64 = (0..3).map(|r| g.row(r)[o]).sum();
            assert!((grads.bias[o] - expect).abs() < 1e-12);
        }
        for r in 0..3 {
            for i in 0..6 {
                let expect: f64 = (0..4).map(|o| g.row(r)[o] * l.weights[o * 6 + i]).sum();
                assert!((gx.row(r)[i] - expect).abs() < 1e-12);
            }
        }
    }
}
