use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{evaluate_correspondence, gather, locate, EvalReport, Stores};
use crate::acpnet::{AcpModel, Architecture, InputNorm};
use crate::audio::FEATURE_DIM;
use crate::dataset::{CorrespondencePair, DatasetSplit};
use crate::error::{Error, Result};
use crate::io::FeatureStore;
use crate::neural::{softmax_cross_entropy, Adam, AdamConfig, DropoutSpec, Matrix};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub lr: f64,
    pub max_epochs: usize,
    /// Epochs without a validation-accuracy improvement before stopping.
    pub patience: usize,
    pub batch_size: usize,
    /// Probability of dropping a hidden unit.
    pub dropout: f64,
    pub seed: u64,
    /// Standardize both inputs with statistics of the training partition.
    pub standardize_inputs: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { lr: 1e-4, max_epochs: 50, patience: 5, batch_size: 64, dropout: 0.4, seed: 0, standardize_inputs: true }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr.is_finite() && self.lr >= 0.0) {
            return Err(Error::invalid(format!("learning rate must be finite and non-negative, got {}", self.lr)));
        }
        if self.max_epochs == 0 || self.batch_size == 0 || self.patience == 0 {
            return Err(Error::invalid("max_epochs, batch_size and patience must be positive"));
        }
        if self.patience > self.max_epochs {
            return Err(Error::invalid("patience cannot exceed max_epochs"));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::invalid(format!("dropout must be in [0, 1), got {}", self.dropout)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    /// Mean cross-entropy over the epoch's minibatches (dropout active).
    pub train_loss: f64,
    /// Accuracy of the dropout forward passes seen during the epoch.
    pub train_accuracy: f64,
    pub val_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub config: TrainConfig,
    pub architecture: Architecture,
    pub train_pairs: usize,
    pub val_pairs: usize,
    pub epochs: Vec<EpochStats>,
    pub best_epoch: usize,
    pub best_val_accuracy: f64,
    pub stopped_early: bool,
    /// Evaluated once, on the best model.
    pub test: EvalReport,
    pub wall_secs: f64,
}

impl TrainReport {
    pub fn to_table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{:>5}  {:>10}  {:>9}  {:>9}", "epoch", "train_loss", "train_acc", "val_acc");
        for e in &self.epochs {
            let mark = if e.epoch == self.best_epoch { " *" } else { "" };
            let _ = writeln!(s, "{:>5}  {:>10.6}  {:>9.4}  {:>9.4}{mark}", e.epoch, e.train_loss, e.train_accuracy, e.val_accuracy);
        }
        let _ = writeln!(
            s,
            "best epoch {} (val {:.4}){}",
            self.best_epoch,
            self.best_val_accuracy,
            if self.stopped_early { ", stopped early" } else { "" }
        );
        let c = &self.test.confusion;
        let _ = writeln!(
            s,
            "test accuracy {:.4} on {} pairs (tp {} tn {} fp {} fn {})",
            self.test.accuracy, self.test.pairs, c.true_pos, c.true_neg, c.false_pos, c.false_neg
        );
        let _ = writeln!(s, "wall time {:.1} s", self.wall_secs);
        s
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: AcpModel<f32>,
    pub report: TrainReport,
}

/// Freshly initialized model for `seed`.
pub fn init_model(arch: &Architecture, seed: u64) -> Result<AcpModel<f32>> {
    AcpModel::new(arch, &mut ChaCha8Rng::seed_from_u64(seed))
}

struct Resolved {
    img: Vec<usize>,
    mus: Vec<usize>,
    labels: Vec<usize>,
}

fn resolve(pairs: &[CorrespondencePair], stores: &Stores) -> Result<Resolved> {
    // Canonical order so that file ordering cannot leak into the shuffle.
    let mut sorted: Vec<&CorrespondencePair> = pairs.iter().collect();
    sorted.sort_by(|a, b| (&a.segment_id, &a.image_id, a.label).cmp(&(&b.segment_id, &b.image_id, b.label)));
    let mut r = Resolved { img: Vec::new(), mus: Vec::new(), labels: Vec::new() };
    for p in sorted {
        r.img.push(locate(stores.images, &p.image_id, "image")?);
        r.mus.push(locate(stores.music, &p.segment_id, "segment")?);
        r.labels.push(p.label as usize);
    }
    Ok(r)
}

fn fit_norm(store: &FeatureStore, rows: &[usize]) -> Result<InputNorm<f32>> {
    let distinct: BTreeSet<usize> = rows.iter().copied().collect();
    let data: Vec<&[f32]> = distinct.into_iter().map(|r| store.row(r)).collect();
    InputNorm::fit(&data, store.dim())
}

/// Minibatch Adam on the training pairs with early stopping on validation
/// accuracy. Returns the best model seen and a report whose test accuracy
/// is measured once, on that model.
pub fn train(mut model: AcpModel<f32>, split: &DatasetSplit, stores: &Stores, cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    if split.train.is_empty() || split.val.is_empty() || split.test.is_empty() {
        return Err(Error::invalid("train, validation and test partitions must all be non-empty"));
    }
    let arch = model.architecture().clone();
    if stores.images.dim() != arch.image_dim() {
        return Err(Error::shape(format!("image store dim {} does not match model input {}", stores.images.dim(), arch.image_dim())));
    }
    if stores.music.dim() != FEATURE_DIM {
        return Err(Error::shape(format!("music store dim {} is not {FEATURE_DIM}", stores.music.dim())));
    }
    let started = Instant::now();
    let data = resolve(&split.train, stores)?;
    // Fail on missing ids before spending time on training.
    resolve(&split.val, stores)?;
    resolve(&split.test, stores)?;
    if cfg.standardize_inputs {
        model.image_norm = fit_norm(stores.images, &data.img)?;
        model.music_norm = fit_norm(stores.music, &data.mus)?;
    }

    let n = data.labels.len();
    let mut adam = Adam::new(AdamConfig::with_lr(cfg.lr), &model.tensor_lens());
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let dropout = DropoutSpec::train(cfg.dropout);
    let mut order: Vec<usize> = (0..n).collect();
    let mut epochs = Vec::new();
    let mut best: Option<(usize, f64, AcpModel<f32>)> = None;
    let mut since_best = 0;

    for epoch in 1..=cfg.max_epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0f64;
        let mut correct = 0usize;
        for (b, batch) in order.chunks(cfg.batch_size).enumerate() {
            let m = batch.len();
            let img = Matrix::from_vec(m, arch.image_dim(), gather(stores.images, batch.iter().map(|&i| data.img[i])))?;
            let mus = Matrix::from_vec(m, FEATURE_DIM, gather(stores.music, batch.iter().map(|&i| data.mus[i])))?;
            let logits = model.forward_train(&img, &mus, &dropout, &mut rng)?;
            let mut grad = Matrix::zeros(m, 2);
            let mut batch_loss = 0.0f64;
            for (r, &i) in batch.iter().enumerate() {
                let label = data.labels[i];
                let (loss, g) = softmax_cross_entropy(logits.row(r), label)?;
                batch_loss += loss as f64;
                correct += ((logits.row(r)[1] > logits.row(r)[0]) as usize == label) as usize;
                for (dst, v) in grad.row_mut(r).iter_mut().zip(g) {
                    *dst = v / m as f32;
                }
            }
            if !batch_loss.is_finite() {
                return Err(Error::Divergence { epoch, batch: b, loss: batch_loss / m as f64 });
            }
            loss_sum += batch_loss;
            let (grads, _) = model.backward(&grad, false)?;
            let g = grads.tensors();
            adam.step(&mut model.params_mut(), &g)?;
        }
        let val = evaluate_correspondence(&model, &split.val, stores)?;
        let stats =
            EpochStats { epoch, train_loss: loss_sum / n as f64, train_accuracy: correct as f64 / n as f64, val_accuracy: val.accuracy };
        log::info!("epoch {epoch}: loss {:.6} train acc {:.4} val acc {:.4}", stats.train_loss, stats.train_accuracy, stats.val_accuracy);
        epochs.push(stats);
        if best.as_ref().map_or(true, |(_, acc, _)| val.accuracy > *acc) {
            best = Some((epoch, val.accuracy, model.clone()));
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= cfg.patience {
                break;
            }
        }
    }

    let stopped_early = epochs.len() < cfg.max_epochs;
    let (best_epoch, best_val_accuracy, best_model) = best.expect("at least one epoch runs");
    let test = evaluate_correspondence(&best_model, &split.test, stores)?;
    let report = TrainReport {
        config: cfg.clone(),
        architecture: arch,
        train_pairs: n,
        val_pairs: split.val.len(),
        epochs,
        best_epoch,
        best_val_accuracy,
        stopped_early,
        test,
        wall_secs: started.elapsed().as_secs_f64(),
    };
    Ok(TrainOutcome { model: best_model, report })
}
