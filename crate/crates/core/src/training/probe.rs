use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::acpnet::InputNorm;
use crate::error::{Error, Result};
use crate::neural::{argmax, softmax_cross_entropy, Activation, Adam, AdamConfig, DropoutSpec, Matrix, Mlp};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProbeConfig {
    pub hidden: Vec<usize>,
    pub lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub dropout: f64,
    /// Fraction of groups held out for evaluation.
    pub heldout: f64,
    pub seed: u64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self { hidden: vec![512, 32], lr: 1e-4, epochs: 200, batch_size: 64, dropout: 0.4, heldout: 0.2, seed: 0 }
    }
}

/// One frozen embedding with its class. Samples sharing a `group` (for
/// example segments of one song) always land on the same side of the
/// held-out split.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeSample {
    pub embedding: Vec<f32>,
    pub class: usize,
    pub group: String,
}

#[derive(Debug, Clone)]
pub struct ProbeOutcome {
    pub net: Mlp<f32>,
    pub norm: InputNorm<f32>,
    pub n_classes: usize,
    pub train_samples: usize,
    pub heldout_samples: usize,
    pub train_accuracy: f64,
    pub heldout_accuracy: f64,
    /// Held-out accuracy of always predicting the training majority class.
    pub majority_baseline: f64,
}

impl ProbeOutcome {
    pub fn dims(&self) -> Vec<usize> {
        self.net.dims()
    }

    pub fn predict(&self, embedding: &[f32]) -> Result<usize> {
        Ok(argmax(&self.net.forward(&self.norm.apply(embedding))?))
    }
}

/// Held-out groups: within each class (of a group's first sample), a
/// seeded shuffle picks `round(heldout * n)` groups, keeping at least one
/// group per side whenever the class has two or more.
fn heldout_groups(samples: &[ProbeSample], frac: f64, seed: u64) -> Vec<String> {
    let mut by_class: BTreeMap<usize, Vec<&str>> = BTreeMap::new();
    let mut seen = std::collections::BTreeSet::new();
    for s in samples {
        if seen.insert(s.group.as_str()) {
            by_class.entry(s.class).or_default().push(&s.group);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for groups in by_class.values_mut() {
        groups.sort_unstable();
        groups.shuffle(&mut rng);
        let n = groups.len();
        let k = if n < 2 { 0 } else { ((frac * n as f64).round() as usize).clamp(1, n - 1) };
        out.extend(groups[..k].iter().map(|g| g.to_string()));
    }
    out
}

fn accuracy(net: &Mlp<f32>, norm: &InputNorm<f32>, samples: &[&ProbeSample]) -> Result<f64> {
    if samples.is_empty() {
        return Ok(0.0);
    }
    let mut correct = 0;
    for s in samples {
        correct += (argmax(&net.forward(&norm.apply(&s.embedding))?) == s.class) as usize;
    }
    Ok(correct as f64 / samples.len() as f64)
}

/// Trains an MLP classifier `dim -> hidden... -> n_classes` on frozen
/// embeddings and reports its accuracy on held-out groups.
pub fn train_probe(samples: &[ProbeSample], n_classes: usize, cfg: &ProbeConfig) -> Result<ProbeOutcome> {
    let dim = samples.first().map(|s| s.embedding.len()).ok_or_else(|| Error::invalid("no probe samples"))?;
    if samples.iter().any(|s| s.embedding.len() != dim) {
        return Err(Error::shape("probe embeddings differ in length"));
    }
    if let Some(s) = samples.iter().find(|s| s.class >= n_classes) {
        return Err(Error::invalid(format!("class {} out of range for {n_classes} classes", s.class)));
    }
    let classes: std::collections::BTreeSet<usize> = samples.iter().map(|s| s.class).collect();
    if classes.len() < 2 {
        return Err(Error::invalid("probe needs at least two classes"));
    }
    if cfg.epochs == 0 || cfg.batch_size == 0 || !(0.0..1.0).contains(&cfg.dropout) || !(0.0..1.0).contains(&cfg.heldout) {
        return Err(Error::invalid("invalid probe configuration"));
    }

    let held = heldout_groups(samples, cfg.heldout, cfg.seed);
    let (test, train): (Vec<&ProbeSample>, Vec<&ProbeSample>) = samples.iter().partition(|s| held.contains(&s.group));
    if train.is_empty() {
        return Err(Error::invalid("no training samples left after the held-out split"));
    }
    let norm = InputNorm::fit(&train.iter().map(|s| s.embedding.as_slice()).collect::<Vec<_>>(), dim)?;

    let dims = [vec![dim], cfg.hidden.clone(), vec![n_classes]].concat();
    let layers = dims.len() - 1;
    let mut acts = vec![Activation::Relu; layers];
    acts[layers - 1] = Activation::Identity;
    let mut drop = vec![true; layers];
    drop[layers - 1] = false;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut net = Mlp::he_uniform(&dims, acts, drop, &mut rng)?;
    let mut adam = Adam::new(AdamConfig::with_lr(cfg.lr), &net.tensor_lens());
    let dropout = DropoutSpec::train(cfg.dropout);
    let inputs: Vec<Vec<f32>> = train.iter().map(|s| norm.apply(&s.embedding)).collect();
    let mut order: Vec<usize> = (0..train.len()).collect();

    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(cfg.batch_size) {
            let m = batch.len();
            let x = Matrix::from_rows(&batch.iter().map(|&i| &inputs[i]).collect::<Vec<_>>(), dim)?;
            let logits = net.forward_train(&x, &dropout, &mut rng)?;
            let mut grad = Matrix::zeros(m, n_classes);
            for (r, &i) in batch.iter().enumerate() {
                let (_, g) = softmax_cross_entropy(logits.row(r), train[i].class)?;
                for (dst, v) in grad.row_mut(r).iter_mut().zip(g) {
                    *dst = v / m as f32;
                }
            }
            let (grads, _) = net.backward(&grad, false)?;
            adam.step(&mut net.params_mut(), &grads.tensors())?;
        }
    }

    let mut counts = vec![0usize; n_classes];
    train.iter().for_each(|s| counts[s.class] += 1);
    let majority = argmax(&counts.iter().map(|&c| c as f64).collect::<Vec<_>>());
    let majority_baseline =
        if test.is_empty() { 0.0 } else { test.iter().filter(|s| s.class == majority).count() as f64 / test.len() as f64 };
    Ok(ProbeOutcome {
        train_accuracy: accuracy(&net, &norm, &train)?,
        heldout_accuracy: accuracy(&net, &norm, &test)?,
        train_samples: train.len(),
        heldout_samples: test.len(),
        majority_baseline,
        n_classes,
        net,
        norm,
    })
}
