use rand::Rng;
use serde::{Deserialize, Serialize};

use super::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DropoutMode {
    Train,
    Infer,
}

/// Inverted dropout: kept units are scaled by `1 / (1 - p)` at train time,
/// inference is the identity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DropoutSpec {
    pub p_drop: f64,
    pub mode: DropoutMode,
}

impl DropoutSpec {
    pub fn train(p_drop: f64) -> Self {
        assert!((0.0..1.0).contains(&p_drop), "dropout probability must be in [0, 1)");
        Self { p_drop, mode: DropoutMode::Train }
    }

    pub fn infer() -> Self {
        Self { p_drop: 0.0, mode: DropoutMode::Infer }
    }

    pub fn active(&self) -> bool {
        self.mode == DropoutMode::Train && self.p_drop > 0.0
    }

    /// Per-unit multipliers (`0` or `1/(1-p)`) for `n` units.
    pub(crate) fn sample_scales<T: Scalar, R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<T> {
        let keep = 1.0 - self.p_drop;
        let scale = T::lit(1.0 / keep);
        (0..n).map(|_| if rng.random_bool(keep) { scale } else { T::zero() }).collect()
    }
}

/// Applies dropout to `x`, returning the output and the keep mask.
pub fn dropout_apply<T: Scalar, R: Rng + ?Sized>(x: &[T], spec: &DropoutSpec, rng: &mut R) -> (Vec<T>, Vec<bool>) {
    if !spec.active() {
        return (x.to_vec(), vec![true; x.len()]);
    }
    let scales: Vec<T> = spec.sample_scales(x.len(), rng);
    let y = x.iter().zip(&scales).map(|(&v, &s)| v * s).collect();
    (y, scales.iter().map(|s| *s != T::zero()).collect())
}
