//! PGD attacks, average-robustness estimation and its decomposition,
//! mixed real/proxy adversarial training, stability (smoothing) training,
//! and randomized-smoothing certification.

mod smoothing;
mod training;

pub use smoothing::{certify, Certification, SmoothingConfig};
pub use training::{adv_train, adv_train_observed, smooth_train, BatchSource, SmoothTrace};

use crate::classifiers::Classifier;
use crate::distributions::Dataset;
use crate::numerics::{Norm, Rng};
use crate::{Error, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Norm-bounded attack budget and PGD schedule.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AttackConfig {
    pub norm: Norm,
    pub epsilon: f64,
    pub steps: usize,
    /// Defaults to ε·2.5/steps when unset.
    pub step_size: Option<f64>,
    pub restarts: usize,
    pub seed: u64,
}

impl Default for AttackConfig {
    fn default() -> Self {
        AttackConfig {
            norm: Norm::L2,
            epsilon: 0.5,
            steps: 10,
            step_size: None,
            restarts: 2,
            seed: 0,
        }
    }
}

impl AttackConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epsilon < 0.0 || self.steps == 0 || self.restarts == 0 {
            return Err(Error::Argument(
                "AttackConfig: epsilon >= 0, steps >= 1, restarts >= 1".into(),
            ));
        }
        Ok(())
    }

    pub fn with_epsilon(&self, epsilon: f64) -> AttackConfig {
        AttackConfig {
            epsilon,
            step_size: None,
            ..self.clone()
        }
    }

    fn effective_step(&self) -> f64 {
        self.step_size
            .unwrap_or(self.epsilon * 2.5 / self.steps as f64)
    }
}

/// Maximizing cross-entropy at the true label: the standard untargeted
/// attack objective.
pub fn ce_objective<C: Classifier>(
    model: &C,
    label: usize,
) -> impl Fn(&[f64]) -> (f64, Vec<f64>) + Sync + '_ {
    move |x| {
        let value = crate::classifiers::loss_ce(&model.forward(x), label);
        (value, model.input_grad_ce(x, label))
    }
}

fn project(norm: Norm, origin: &[f64], point: &mut [f64], epsilon: f64) {
    match norm {
        Norm::Linf => {
            for (p, o) in point.iter_mut().zip(origin) {
                *p = p.clamp(o - epsilon, o + epsilon);
            }
        }
        Norm::L2 => {
            let mut sq = 0.0;
            for (p, o) in point.iter().zip(origin) {
                sq += (p - o) * (p - o);
            }
            let dist = sq.sqrt();
            if dist > epsilon {
                let scale = epsilon / dist;
                for (p, o) in point.iter_mut().zip(origin) {
                    *p = o + (*p - o) * scale;
                }
            }
        }
    }
}

fn random_point_in_ball(norm: Norm, origin: &[f64], epsilon: f64, rng: &mut Rng) -> Vec<f64> {
    match norm {
        Norm::Linf => origin
            .iter()
            .map(|o| o + epsilon * (2.0 * rng.uniform() - 1.0))
            .collect(),
        Norm::L2 => {
            let z: Vec<f64> = (0..origin.len()).map(|_| rng.normal()).collect();
            let n = Norm::L2.len(&z).max(1e-300);
            let radius = epsilon * rng.uniform().powf(1.0 / origin.len() as f64);
            origin
                .iter()
                .zip(&z)
                .map(|(o, zi)| o + radius * zi / n)
                .collect()
        }
    }
}

/// Projected gradient ascent of `objective` over the ε-ball around `x`.
///
/// The first restart starts from `x` (or from `warm_start`, projected into
/// the ball); later restarts start from random interior points. Among all
/// evaluated iterates of all restarts, the one maximizing the objective is
/// returned, so warm-started nested-budget sweeps are monotone.
pub fn pgd_attack_from<F>(
    objective: F,
    x: &[f64],
    warm_start: Option<&[f64]>,
    cfg: &AttackConfig,
    rng: &mut Rng,
) -> Vec<f64>
where
    F: Fn(&[f64]) -> (f64, Vec<f64>),
{
    if cfg.epsilon == 0.0 {
        return x.to_vec();
    }
    let step = cfg.effective_step();
    let mut best = x.to_vec();
    let mut best_value = objective(x).0;

    for restart in 0..cfg.restarts {
        let mut current = if restart == 0 {
            match warm_start {
                Some(w) => {
                    let mut w = w.to_vec();
                    project(cfg.norm, x, &mut w, cfg.epsilon);
                    w
                }
                None => x.to_vec(),
            }
        } else {
            random_point_in_ball(cfg.norm, x, cfg.epsilon, rng)
        };
        let value = objective(&current).0;
        if value > best_value {
            best_value = value;
            best = current.clone();
        }
        for _ in 0..cfg.steps {
            let (_, grad) = objective(&current);
            match cfg.norm {
                Norm::Linf => {
                    for (c, g) in current.iter_mut().zip(&grad) {
                        *c += step * g.signum();
                    }
                }
                Norm::L2 => {
                    let n = Norm::L2.len(&grad);
                    if n > 0.0 {
                        for (c, g) in current.iter_mut().zip(&grad) {
                            *c += step * g / n;
                        }
                    }
                }
            }
            project(cfg.norm, x, &mut current, cfg.epsilon);
            let value = objective(&current).0;
            if value > best_value {
                best_value = value;
                best = current.clone();
            }
        }
    }
    best
}

/// PGD from the clean point. See [`pgd_attack_from`].
pub fn pgd_attack<F>(objective: F, x: &[f64], cfg: &AttackConfig, rng: &mut Rng) -> Vec<f64>
where
    F: Fn(&[f64]) -> (f64, Vec<f64>),
{
    pgd_attack_from(objective, x, None, cfg, rng)
}

/// Warm-started sweep over ascending budgets; each budget starts from the
/// previous best iterate, so the best objective value is non-decreasing.
pub fn pgd_attack_sweep<F>(
    objective: F,
    x: &[f64],
    epsilons: &[f64],
    cfg: &AttackConfig,
    rng: &mut Rng,
) -> Vec<(Vec<f64>, f64)>
where
    F: Fn(&[f64]) -> (f64, Vec<f64>),
{
    let mut results = Vec::with_capacity(epsilons.len());
    let mut warm: Option<Vec<f64>> = None;
    for &eps in epsilons {
        let local = cfg.with_epsilon(eps);
        let best = pgd_attack_from(&objective, x, warm.as_deref(), &local, rng);
        let value = objective(&best).0;
        results.push((best.clone(), value));
        warm = Some(best);
    }
    results
}

/// Models that can report an exact distance to their decision boundary.
pub trait Attackable: Classifier {
    /// Closed-form boundary distance when one exists (linear models).
    fn exact_boundary_distance(&self, _x: &[f64], _norm: Norm) -> Option<f64> {
        None
    }
}

impl Attackable for crate::classifiers::Mlp {}

impl Attackable for crate::classifiers::LinearClassifier {
    fn exact_boundary_distance(&self, x: &[f64], norm: Norm) -> Option<f64> {
        Some(self.margin(x, norm))
    }
}

/// Distance from one point to the model's decision boundary.
#[derive(Debug, Clone, Copy)]
pub struct BoundaryDistance {
    pub distance: f64,
    /// True when no flip was found up to eps_max, in which case `distance`
    /// is the cap itself.
    pub censored: bool,
}

/// The bisection flip predicate: does PGD at budget ε move the point across
/// the decision boundary? Its generator is derived from the budget's bit
/// pattern, making the predicate a pure function of ε for a fixed point
/// generator — bisection and dense sweeps then probe the identical function.
pub fn attack_flips<M: Attackable>(
    model: &M,
    x: &[f64],
    y: usize,
    eps: f64,
    cfg: &AttackConfig,
    point_rng: &Rng,
) -> bool {
    let local = cfg.with_epsilon(eps);
    let mut rng = point_rng.child(eps.to_bits());
    let adv = pgd_attack(ce_objective(model, y), x, &local, &mut rng);
    model.predict(&adv) != y
}

/// Estimates the distance to the nearest adversarial example.
///
/// Misclassified points are at distance 0. Linear models use their exact
/// margin. Everything else is bisection over [0, eps_max] on the predicate
/// "PGD at budget ε flips the label", 12 iterations; points that never flip
/// are censored at eps_max.
pub fn boundary_distance<M: Attackable>(
    model: &M,
    x: &[f64],
    y: usize,
    eps_max: f64,
    cfg: &AttackConfig,
    point_rng: &Rng,
) -> BoundaryDistance {
    assert!(eps_max > 0.0, "boundary_distance: eps_max must be > 0");
    if model.predict(x) != y {
        return BoundaryDistance {
            distance: 0.0,
            censored: false,
        };
    }
    if let Some(margin) = model.exact_boundary_distance(x, cfg.norm) {
        return if margin >= eps_max {
            BoundaryDistance {
                distance: eps_max,
                censored: true,
            }
        } else {
            BoundaryDistance {
                distance: margin,
                censored: false,
            }
        };
    }
    if !attack_flips(model, x, y, eps_max, cfg, point_rng) {
        return BoundaryDistance {
            distance: eps_max,
            censored: true,
        };
    }
    let (mut lo, mut hi) = (0.0, eps_max);
    for _ in 0..12 {
        let mid = 0.5 * (lo + hi);
        if attack_flips(model, x, y, mid, cfg, point_rng) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    BoundaryDistance {
        distance: hi,
        censored: false,
    }
}

/// Monte Carlo estimate of average robustness over a dataset.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RobustnessEstimate {
    pub mean_distance: f64,
    pub censored_fraction: f64,
    pub eps_max: f64,
    pub per_point: Vec<f64>,
}

impl RobustnessEstimate {
    /// Standard error of the mean distance.
    pub fn standard_error(&self) -> f64 {
        let n = self.per_point.len() as f64;
        if n < 2.0 {
            return 0.0;
        }
        let mean = self.mean_distance;
        let var = self
            .per_point
            .iter()
            .map(|d| (d - mean) * (d - mean))
            .sum::<f64>()
            / (n - 1.0);
        (var / n).sqrt()
    }
}

/// Mean boundary distance over the dataset, with eps_max censoring:
/// censored points contribute eps_max, keeping the estimate a lower bound.
/// Per-point attacks run in parallel with index-derived child generators,
/// so the result is independent of scheduling.
pub fn avg_robustness<M: Attackable>(
    model: &M,
    data: &Dataset,
    eps_max: f64,
    cfg: &AttackConfig,
) -> RobustnessEstimate {
    assert!(!data.is_empty(), "avg_robustness: empty dataset");
    let root = Rng::new(cfg.seed);
    let results: Vec<BoundaryDistance> = (0..data.len())
        .into_par_iter()
        .map(|i| {
            let rng = root.child(i as u64);
            boundary_distance(model, &data.points[i], data.labels[i], eps_max, cfg, &rng)
        })
        .collect();
    let per_point: Vec<f64> = results.iter().map(|r| r.distance).collect();
    let censored = results.iter().filter(|r| r.censored).count();
    RobustnessEstimate {
        mean_distance: per_point.iter().sum::<f64>() / per_point.len() as f64,
        censored_fraction: censored as f64 / per_point.len() as f64,
        eps_max,
        per_point,
    }
}

/// The three-term split of transferred robustness: empirical robustness on
/// the training set, the generalization penalty, and the distribution-shift
/// penalty.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Decomposition {
    pub empirical: f64,
    pub generalization_penalty: f64,
    pub shift_penalty: f64,
    pub rob_train: RobustnessEstimate,
    pub rob_proxy: RobustnessEstimate,
    pub rob_real: RobustnessEstimate,
}

/// Evaluates the decomposition on the training set Ŝ and fresh evaluation
/// samples from the proxy and real distributions.
pub fn decomposition<M: Attackable>(
    model: &M,
    train_set: &Dataset,
    proxy_eval: &Dataset,
    real_eval: &Dataset,
    eps_max: f64,
    cfg: &AttackConfig,
) -> Decomposition {
    let rob_train = avg_robustness(model, train_set, eps_max, cfg);
    let rob_proxy = avg_robustness(model, proxy_eval, eps_max, cfg);
    let rob_real = avg_robustness(model, real_eval, eps_max, cfg);
    Decomposition {
        empirical: rob_train.mean_distance,
        generalization_penalty: (rob_proxy.mean_distance - rob_train.mean_distance).abs(),
        shift_penalty: (rob_real.mean_distance - rob_proxy.mean_distance).abs(),
        rob_train,
        rob_proxy,
        rob_real,
    }
}

/// Fraction of points still classified correctly after a PGD attack at the
/// config's budget (clean misclassifications count as non-robust).
pub fn robust_accuracy<M: Attackable>(model: &M, data: &Dataset, cfg: &AttackConfig) -> f64 {
    let root = Rng::new(cfg.seed);
    let hits: Vec<bool> = (0..data.len())
        .into_par_iter()
        .map(|i| {
            let x = &data.points[i];
            let y = data.labels[i];
            if model.predict(x) != y {
                return false;
            }
            let mut rng = root.child(i as u64);
            let adv = pgd_attack(ce_objective(model, y), x, cfg, &mut rng);
            model.predict(&adv) == y
        })
        .collect();
    hits.iter().filter(|&&h| h).count() as f64 / data.len() as f64
}

/// Plain (non-adversarial) accuracy.
pub fn clean_accuracy<M: Classifier>(model: &M, data: &Dataset) -> f64 {
    let hits = data
        .points
        .iter()
        .zip(&data.labels)
        .filter(|(x, &y)| model.predict(x) == y)
        .count();
    hits as f64 / data.len() as f64
}

#[cfg(test)]
mod tests;
