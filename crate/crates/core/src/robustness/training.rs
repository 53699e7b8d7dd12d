//! Mixed real/proxy robust training: the aggregated adversarial loss
//! γ·L(real) + (1−γ)·L(proxy) with 1:1 batch composition, in both its PGD
//! and stability (Gaussian-noise KL) forms.

use super::{pgd_attack, AttackConfig, SmoothingConfig};
use crate::classifiers::{
    grad_batch, grad_stability_batch, BatchLoss, GradBundle, Mlp, TrainConfig,
};
use crate::distributions::Dataset;
use crate::numerics::Rng;
use crate::{Error, Result};
use rayon::prelude::*;

/// Which side of the γ-mixture a half-batch came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BatchSource {
    Real,
    Proxy,
}

/// Endlessly cycling shuffled index stream over one data source.
struct IndexStream {
    n: usize,
    order: Vec<usize>,
    cursor: usize,
    rng: Rng,
}

impl IndexStream {
    fn new(n: usize, mut rng: Rng) -> Self {
        let order = rng.permutation(n);
        IndexStream {
            n,
            order,
            cursor: 0,
            rng,
        }
    }

    fn take(&mut self, count: usize) -> Vec<usize> {
        let mut out = Vec::with_capacity(count);
        for _ in 0..count {
            if self.cursor == self.n {
                self.order = self.rng.permutation(self.n);
                self.cursor = 0;
            }
            out.push(self.order[self.cursor]);
            self.cursor += 1;
        }
        out
    }
}

fn validate_mixture(real: &Dataset, proxy: &Dataset, gamma: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&gamma) {
        return Err(Error::Argument("gamma must be in [0,1]".into()));
    }
    if real.is_empty() && gamma > 0.0 {
        return Err(Error::Argument(
            "real data may be empty only when gamma = 0".into(),
        ));
    }
    if proxy.is_empty() && gamma < 1.0 {
        return Err(Error::Argument(
            "proxy data may be empty only when gamma = 1".into(),
        ));
    }
    Ok(())
}

/// PGD-perturbs every point of a half-batch against the current model,
/// in parallel with per-point child generators.
fn attack_batch(
    model: &Mlp,
    points: &[Vec<f64>],
    labels: &[usize],
    attack: &AttackConfig,
    step_rng: &Rng,
) -> Vec<Vec<f64>> {
    points
        .par_iter()
        .enumerate()
        .map(|(i, x)| {
            let mut rng = step_rng.child(i as u64);
            pgd_attack(super::ce_objective(model, labels[i]), x, attack, &mut rng)
        })
        .collect()
}

fn gather(data: &Dataset, idx: &[usize]) -> (Vec<Vec<f64>>, Vec<usize>) {
    (
        idx.iter().map(|&i| data.points[i].clone()).collect(),
        idx.iter().map(|&i| data.labels[i]).collect(),
    )
}

/// Adversarial training on the γ-weighted aggregate loss. Each step draws a
/// half-batch from each active source, PGD-perturbs both, and descends
/// γ·CE(real adv) + (1−γ)·CE(proxy adv). With γ = 1 the proxy source is
/// never touched (its index and attack streams stay unconsumed), so the run
/// is bit-identical to single-source adversarial training on the real data.
pub fn adv_train(
    model: Mlp,
    real: &Dataset,
    proxy: &Dataset,
    gamma: f64,
    attack: &AttackConfig,
    train: &TrainConfig,
) -> Result<(Mlp, Vec<f64>)> {
    adv_train_observed(model, real, proxy, gamma, attack, train, |_, _| {})
}

/// [`adv_train`] with a hook called once per consumed half-batch, used to
/// verify data-routing contracts (e.g. γ = 0 never touches real data).
pub fn adv_train_observed(
    model: Mlp,
    real: &Dataset,
    proxy: &Dataset,
    gamma: f64,
    attack: &AttackConfig,
    train: &TrainConfig,
    mut hook: impl FnMut(BatchSource, &[usize]),
) -> Result<(Mlp, Vec<f64>)> {
    validate_mixture(real, proxy, gamma)?;
    attack.validate()?;
    train.validate()?;
    let mut model = model;
    let root = Rng::new(train.seed);
    let half = (train.batch / 2).max(1);

    let use_real = gamma > 0.0;
    let use_proxy = gamma < 1.0;
    // The source with nonzero weight that defines epoch length; real wins
    // when both are active.
    let primary_len = if use_real { real.len() } else { proxy.len() };
    let steps_per_epoch = primary_len.div_ceil(half);

    let mut real_stream = IndexStream::new(real.len().max(1), root.child(0));
    let mut proxy_stream = IndexStream::new(proxy.len().max(1), root.child(1));
    let real_attack_root = root.child(2);
    let proxy_attack_root = root.child(3);

    let mut trace = Vec::with_capacity(train.epochs);
    let mut step_counter = 0u64;
    for epoch in 0..train.epochs {
        let lr = train.lr_at_epoch(epoch);
        let mut epoch_loss = 0.0;
        for _ in 0..steps_per_epoch {
            let mut combined: Option<GradBundle> = None;
            if use_real {
                let idx = real_stream.take(half.min(real.len()));
                hook(BatchSource::Real, &idx);
                let (points, labels) = gather(real, &idx);
                let adv = attack_batch(
                    &model,
                    &points,
                    &labels,
                    attack,
                    &real_attack_root.child(step_counter),
                );
                let grads = grad_batch(&model, &adv, &labels, &BatchLoss::CrossEntropy);
                let mut acc = GradBundle::zeros_like(&model);
                acc.add_scaled(&grads, gamma);
                combined = Some(acc);
            }
            if use_proxy {
                let idx = proxy_stream.take(half.min(proxy.len()));
                hook(BatchSource::Proxy, &idx);
                let (points, labels) = gather(proxy, &idx);
                let adv = attack_batch(
                    &model,
                    &points,
                    &labels,
                    attack,
                    &proxy_attack_root.child(step_counter),
                );
                let grads = grad_batch(&model, &adv, &labels, &BatchLoss::CrossEntropy);
                match combined.as_mut() {
                    Some(acc) => acc.add_scaled(&grads, 1.0 - gamma),
                    None => {
                        let mut acc = GradBundle::zeros_like(&model);
                        acc.add_scaled(&grads, 1.0 - gamma);
                        combined = Some(acc);
                    }
                }
            }
            let grads = combined.expect("at least one source is active");
            if !grads.loss.is_finite() {
                return Err(Error::TrainingDiverged { epoch });
            }
            model.apply_update(&grads, lr, train.weight_decay);
            epoch_loss += grads.loss;
            step_counter += 1;
        }
        trace.push(epoch_loss / steps_per_epoch as f64);
    }
    if !model.params_finite() {
        return Err(Error::TrainingDiverged {
            epoch: train.epochs,
        });
    }
    Ok((model, trace))
}

/// Per-epoch mean total loss and mean raw KL term of stability training.
#[derive(Debug, Clone)]
pub struct SmoothTrace {
    pub total: Vec<f64>,
    pub kl: Vec<f64>,
}

/// Stability training for randomized smoothing: per sample
/// CE(f(x), y) + β·KL(f(x) ‖ f(x+δ)) with one fresh δ ∼ N(0, σ²I) per
/// sample per step, mixed across real and proxy exactly like [`adv_train`].
/// With β = 0 the noise streams are never consumed, making the run
/// bit-identical to natural training (adv_train at ε = 0).
pub fn smooth_train(
    model: Mlp,
    real: &Dataset,
    proxy: &Dataset,
    gamma: f64,
    scfg: &SmoothingConfig,
    train: &TrainConfig,
) -> Result<(Mlp, SmoothTrace)> {
    validate_mixture(real, proxy, gamma)?;
    scfg.validate()?;
    train.validate()?;
    let mut model = model;
    let root = Rng::new(train.seed);
    let half = (train.batch / 2).max(1);

    let use_real = gamma > 0.0;
    let use_proxy = gamma < 1.0;
    let primary_len = if use_real { real.len() } else { proxy.len() };
    let steps_per_epoch = primary_len.div_ceil(half);

    let mut real_stream = IndexStream::new(real.len().max(1), root.child(0));
    let mut proxy_stream = IndexStream::new(proxy.len().max(1), root.child(1));
    let mut real_noise = root.child(4);
    let mut proxy_noise = root.child(5);

    let mut trace = SmoothTrace {
        total: Vec::with_capacity(train.epochs),
        kl: Vec::with_capacity(train.epochs),
    };
    for epoch in 0..train.epochs {
        let lr = train.lr_at_epoch(epoch);
        let mut epoch_loss = 0.0;
        let mut epoch_kl = 0.0;
        for _ in 0..steps_per_epoch {
            let mut combined: Option<GradBundle> = None;
            let mut kl_acc = 0.0;
            let mut halves: Vec<(BatchSource, Vec<usize>)> = Vec::new();
            if use_real {
                halves.push((BatchSource::Real, real_stream.take(half.min(real.len()))));
            }
            if use_proxy {
                halves.push((BatchSource::Proxy, proxy_stream.take(half.min(proxy.len()))));
            }
            for (source, idx) in halves {
                let (data, noise_rng, weight) = match source {
                    BatchSource::Real => (real, &mut real_noise, gamma),
                    BatchSource::Proxy => (proxy, &mut proxy_noise, 1.0 - gamma),
                };
                let (points, labels) = gather(data, &idx);
                let (grads, kl) = if scfg.beta == 0.0 {
                    (
                        grad_batch(&model, &points, &labels, &BatchLoss::CrossEntropy),
                        0.0,
                    )
                } else {
                    let noisy: Vec<Vec<f64>> = points
                        .iter()
                        .map(|p| p.iter().map(|v| v + scfg.sigma * noise_rng.normal()).collect())
                        .collect();
                    grad_stability_batch(&model, &points, &noisy, &labels, scfg.beta)
                };
                kl_acc += weight * kl;
                match combined.as_mut() {
                    Some(acc) => acc.add_scaled(&grads, weight),
                    None => {
                        let mut acc = GradBundle::zeros_like(&model);
                        acc.add_scaled(&grads, weight);
                        combined = Some(acc);
                    }
                }
            }
            let grads = combined.expect("at least one source is active");
            if !grads.loss.is_finite() {
                return Err(Error::TrainingDiverged { epoch });
            }
            model.apply_update(&grads, lr, train.weight_decay);
            epoch_loss += grads.loss;
            epoch_kl += kl_acc;
        }
        trace.total.push(epoch_loss / steps_per_epoch as f64);
        trace.kl.push(epoch_kl / steps_per_epoch as f64);
    }
    if !model.params_finite() {
        return Err(Error::TrainingDiverged {
            epoch: train.epochs,
        });
    }
    Ok((model, trace))
}
