//! Central finite-difference verification of analytic gradients.

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{softmax_cross_entropy, DropoutSpec, Matrix, Mlp};
use crate::error::Result;

/// A differentiable scalar loss over a set of named tensors, in `f64`.
pub trait GradTarget {
    /// Name and length of every checked tensor (parameters and inputs).
    fn tensors(&self) -> Vec<(String, usize)>;
    fn get(&self, tensor: usize, index: usize) -> f64;
    fn set(&mut self, tensor: usize, index: usize, value: f64);
    /// Loss at the current point. Appends the on/off state of every ReLU
    /// unit to `pattern`.
    fn loss(&self, pattern: &mut Vec<bool>) -> Result<f64>;
    /// Analytic gradients, one vector per tensor in `tensors()` order.
    fn gradients(&mut self) -> Result<Vec<Vec<f64>>>;
}

#[derive(Debug, Clone, Copy)]
pub struct GradCheckOptions {
    pub h: f64,
    /// Check at most this many coordinates per tensor (seeded sample that
    /// always includes the largest analytic entry). `None` checks all.
    pub max_per_tensor: Option<usize>,
    pub seed: u64,
    /// Lower bound on the denominator of the relative error.
    pub denom_floor: f64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        Self { h: 1e-5, max_per_tensor: None, seed: 0, denom_floor: 1e-8 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GradEntry {
    pub tensor: usize,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_error: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub worst: Option<(String, usize)>,
    pub checked: usize,
    /// Coordinates skipped because a perturbation flipped a ReLU unit.
    pub skipped_kinks: usize,
    pub tensor_names: Vec<String>,
    pub entries: Vec<GradEntry>,
}

pub fn relative_error(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}

/// Compares analytic gradients with `(L(x+h) - L(x-h)) / 2h` and returns the
/// worst relative error. Coordinates whose perturbation crosses a ReLU kink
/// are counted but not scored.
pub fn grad_check(target: &mut dyn GradTarget, opts: &GradCheckOptions) -> Result<GradCheckReport> {
    let analytic = target.gradients()?;
    let tensors = target.tensors();
    let mut base_pattern = Vec::new();
    target.loss(&mut base_pattern)?;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);

    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst: None,
        checked: 0,
        skipped_kinks: 0,
        tensor_names: tensors.iter().map(|(n, _)| n.clone()).collect(),
        entries: Vec::new(),
    };
    let mut pattern = Vec::with_capacity(base_pattern.len());
    for (t, (name, len)) in tensors.iter().enumerate() {
        let coords: Vec<usize> = match opts.max_per_tensor {
            Some(max) if max < *len => {
                let largest = (0..*len).max_by(|&a, &b| analytic[t][a].abs().total_cmp(&analytic[t][b].abs())).unwrap_or(0);
                let mut c: Vec<usize> = index::sample(&mut rng, *len, max.saturating_sub(1)).into_iter().collect();
                if !c.contains(&largest) {
                    c.push(largest);
                }
                c.sort_unstable();
                c
            }
            _ => (0..*len).collect(),
        };
        for i in coords {
            let orig = target.get(t, i);
            target.set(t, i, orig + opts.h);
            pattern.clear();
            let up = target.loss(&mut pattern)?;
            let kink_up = pattern != base_pattern;
            target.set(t, i, orig - opts.h);
            pattern.clear();
            let down = target.loss(&mut pattern)?;
            let kink_down = pattern != base_pattern;
            target.set(t, i, orig);
            if kink_up || kink_down {
                report.skipped_kinks += 1;
                continue;
            }
            let numeric = (up - down) / (2.0 * opts.h);
            let a = analytic[t][i];
            let rel = relative_error(a, numeric, opts.denom_floor);
            report.checked += 1;
            if report.worst.is_none() || rel > report.max_rel_error {
                report.max_rel_error = rel;
                report.worst = Some((name.clone(), i));
            }
            report.entries.push(GradEntry { tensor: t, index: i, analytic: a, numeric, rel_error: rel });
        }
    }
    Ok(report)
}

/// Cross-entropy of a plain stack on one labeled input.
#[derive(Debug, Clone)]
pub struct MlpTarget {
    pub net: Mlp<f64>,
    pub input: Vec<f64>,
    pub class: usize,
}

impl GradTarget for MlpTarget {
    fn tensors(&self) -> Vec<(String, usize)> {
        let mut out: Vec<(String, usize)> = self
            .net
            .params()
            .iter()
            .enumerate()
            .map(|(i, p)| (format!("layer{}.{}", i / 2, if i % 2 == 0 { "weight" } else { "bias" }), p.len()))
            .collect();
        out.push(("input".into(), self.input.len()));
        out
    }

    fn get(&self, tensor: usize, index: usize) -> f64 {
        let params = self.net.params();
        if tensor < params.len() {
            params[tensor][index]
        } else {
            self.input[index]
        }
    }

    fn set(&mut self, tensor: usize, index: usize, value: f64) {
        let n = self.net.params().len();
        if tensor < n {
            self.net.params_mut()[tensor][index] = value;
        } else {
            self.input[index] = value;
        }
    }

    fn loss(&self, pattern: &mut Vec<bool>) -> Result<f64> {
        let logits = self.net.forward_with_pattern(&self.input, pattern)?;
        Ok(softmax_cross_entropy(&logits, self.class)?.0)
    }

    fn gradients(&mut self) -> Result<Vec<Vec<f64>>> {
        let x = Matrix::from_vec(1, self.input.len(), self.input.clone())?;
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let logits = self.net.forward_train(&x, &DropoutSpec::infer(), &mut rng)?;
        let (_, g) = softmax_cross_entropy(logits.row(0), self.class)?;
        let (grads, gx) = self.net.backward(&Matrix::from_vec(1, g.len(), g)?, true)?;
        let mut out: Vec<Vec<f64>> = grads.tensors().into_iter().map(|t| t.to_vec()).collect();
        out.push(gx.expect("input gradient requested").into_vec());
        Ok(out)
    }
}
