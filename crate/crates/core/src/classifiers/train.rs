//! Plain SGD with cosine learning-rate decay.

use super::{grad_batch, BatchLoss, Mlp};
use crate::numerics::Rng;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// Initial learning rate, decayed per epoch as lr·½(1 + cos(π e/E)).
    pub lr: f64,
    pub epochs: usize,
    pub batch: usize,
    pub seed: u64,
    /// Per-step multiplicative shrink factor applied before the gradient
    /// step, so decay acts even at lr = 0.
    pub weight_decay: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr: 0.05,
            epochs: 100,
            batch: 64,
            seed: 0,
            weight_decay: 5e-4,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.lr < 0.0 || self.batch == 0 || self.epochs == 0 {
            return Err(Error::Argument(
                "TrainConfig: lr must be >= 0, batch and epochs >= 1".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.weight_decay) {
            return Err(Error::Argument("TrainConfig: weight_decay in [0,1)".into()));
        }
        Ok(())
    }

    pub fn lr_at_epoch(&self, epoch: usize) -> f64 {
        self.lr * 0.5 * (1.0 + (std::f64::consts::PI * epoch as f64 / self.epochs as f64).cos())
    }
}

/// Mean training loss per epoch.
pub type LossTrace = Vec<f64>;

/// Trains `model` with cross-entropy on the given points. Deterministic for
/// a fixed seed; epochs iterate the data in freshly shuffled minibatches.
pub fn sgd_train(
    model: Mlp,
    points: &[Vec<f64>],
    labels: &[usize],
    cfg: &TrainConfig,
) -> Result<(Mlp, LossTrace)> {
    cfg.validate()?;
    assert_eq!(points.len(), labels.len());
    assert!(!points.is_empty(), "sgd_train: empty dataset");
    let mut model = model;
    let mut rng = Rng::new(cfg.seed);
    let mut trace = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let lr = cfg.lr_at_epoch(epoch);
        let order = rng.permutation(points.len());
        let mut epoch_loss = 0.0;
        let mut batches = 0usize;
        for chunk in order.chunks(cfg.batch) {
            let batch_points: Vec<Vec<f64>> = chunk.iter().map(|&i| points[i].clone()).collect();
            let batch_labels: Vec<usize> = chunk.iter().map(|&i| labels[i]).collect();
            let grads = grad_batch(&model, &batch_points, &batch_labels, &BatchLoss::CrossEntropy);
            if !grads.loss.is_finite() {
                return Err(Error::TrainingDiverged { epoch });
            }
            model.apply_update(&grads, lr, cfg.weight_decay);
            epoch_loss += grads.loss;
            batches += 1;
        }
        trace.push(epoch_loss / batches as f64);
    }
    if !model.params_finite() {
        return Err(Error::TrainingDiverged { epoch: cfg.epochs });
    }
    Ok((model, trace))
}
