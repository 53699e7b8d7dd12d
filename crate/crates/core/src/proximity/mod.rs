//! Robust discrimination between real and proxy samples: the Racc curve
//! and its area (ARC), synthetic scoring with score-ordered selection, and
//! the baseline proximity metrics (1-NN distance, Gaussian-fit Fréchet)
//! with ranking comparison.

use crate::classifiers::{softmax, Classifier, Mlp, TrainConfig};
use crate::distributions::Dataset;
use crate::numerics::{trapezoid, Mat, Norm, Rng};
use crate::robustness::{adv_train, pgd_attack, pgd_attack_from, AttackConfig};
use crate::transport::gaussian_w2;
use crate::{Error, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Binary label convention for discriminators, matching the robust
/// discrimination objective: real samples are class 1, proxy samples 0.
pub const REAL_CLASS: usize = 1;
pub const PROXY_CLASS: usize = 0;

/// Settings shared by discriminator training, Racc evaluation, and ARC.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProximityConfig {
    /// Hidden widths of the discriminator MLP.
    pub hidden: Vec<usize>,
    pub train: TrainConfig,
    /// Attack template; epsilon is overridden per curve point.
    pub attack: AttackConfig,
    /// Fraction of each side held out for Racc evaluation.
    pub val_fraction: f64,
    /// The curve stops extending once two consecutive racc values fall to
    /// this chance plateau.
    pub truncate_below: f64,
    /// Number of grid points when the ε grid is auto-scaled.
    pub auto_grid_points: usize,
}

impl Default for ProximityConfig {
    fn default() -> Self {
        ProximityConfig {
            hidden: vec![64, 64],
            train: TrainConfig {
                epochs: 40,
                ..TrainConfig::default()
            },
            attack: AttackConfig::default(),
            val_fraction: 0.25,
            truncate_below: 0.52,
            auto_grid_points: 12,
        }
    }
}

/// A trained robust discriminator plus the held-out points reserved for
/// evaluating it.
#[derive(Debug, Clone)]
pub struct RobustDiscriminator {
    pub model: Mlp,
    pub epsilon: f64,
    pub holdout_real: Vec<Vec<f64>>,
    pub holdout_proxy: Vec<Vec<f64>>,
}

impl RobustDiscriminator {
    /// Probability the discriminator assigns to the synthetic (proxy) class.
    pub fn synthetic_probability(&self, x: &[f64]) -> f64 {
        softmax(&self.model.forward(x))[PROXY_CLASS]
    }
}

fn relabeled(points: Vec<Vec<f64>>, class: usize, tag: &str) -> Dataset {
    let n = points.len();
    Dataset {
        labels: vec![class; n],
        points,
        provenance: tag.to_string(),
    }
}

/// Adversarially trains a binary discriminator (real = 1, proxy = 0) with
/// PGD at the given ε on both classes; ε = 0 degenerates to natural
/// training. A shuffled holdout split from each side is reserved for
/// evaluation and never trained on.
pub fn train_robust_discriminator(
    real: &Dataset,
    proxy: &Dataset,
    epsilon: f64,
    cfg: &ProximityConfig,
    rng: &Rng,
) -> Result<RobustDiscriminator> {
    if real.len() != proxy.len() || real.is_empty() {
        return Err(Error::Argument(format!(
            "discriminator needs balanced nonempty sides, got {} and {}",
            real.len(),
            proxy.len()
        )));
    }
    if !(0.0..1.0).contains(&cfg.val_fraction) {
        return Err(Error::Argument("val_fraction must be in [0,1)".into()));
    }
    let n_holdout = (real.len() as f64 * cfg.val_fraction).round() as usize;
    let split = |data: &Dataset, stream: u64| -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let order = rng.child(stream).permutation(data.len());
        let holdout: Vec<Vec<f64>> = order[..n_holdout]
            .iter()
            .map(|&i| data.points[i].clone())
            .collect();
        let train: Vec<Vec<f64>> = order[n_holdout..]
            .iter()
            .map(|&i| data.points[i].clone())
            .collect();
        (train, holdout)
    };
    let (real_train, holdout_real) = split(real, 0);
    let (proxy_train, holdout_proxy) = split(proxy, 1);

    let dims: Vec<usize> = std::iter::once(real.dim())
        .chain(cfg.hidden.iter().copied())
        .chain(std::iter::once(2))
        .collect();
    let model = Mlp::new(
        &dims,
        crate::classifiers::Activation::Relu,
        rng.child(2).seed(),
    )?;
    let attack = cfg.attack.with_epsilon(epsilon);
    let train_cfg = TrainConfig {
        seed: rng.child(3).seed(),
        ..cfg.train.clone()
    };
    // γ = ½ with real/proxy half-batches is exactly balanced binary
    // adversarial training.
    let (model, _) = adv_train(
        model,
        &relabeled(real_train, REAL_CLASS, "disc-real-train"),
        &relabeled(proxy_train, PROXY_CLASS, "disc-proxy-train"),
        0.5,
        &attack,
        &train_cfg,
    )?;
    Ok(RobustDiscriminator {
        model,
        epsilon,
        holdout_real,
        holdout_proxy,
    })
}

/// Empirical robust discrimination accuracy at budget ε: the mean of the
/// per-side fractions of points still classified correctly after a PGD
/// attack. The attack approximates the for-all-ball quantifier, so this is
/// an upper bound on the true robust accuracy.
pub fn racc(
    discriminator: &Mlp,
    real_eval: &[Vec<f64>],
    proxy_eval: &[Vec<f64>],
    epsilon: f64,
    cfg: &AttackConfig,
) -> f64 {
    let attack = cfg.with_epsilon(epsilon);
    let side = |points: &[Vec<f64>], label: usize, stream: u64| -> f64 {
        let root = Rng::new(attack.seed).child(stream);
        let hits: Vec<bool> = points
            .par_iter()
            .enumerate()
            .map(|(i, x)| {
                if discriminator.predict(x) != label {
                    return false;
                }
                let mut rng = root.child(i as u64);
                let adv = pgd_attack(
                    crate::robustness::ce_objective(discriminator, label),
                    x,
                    &attack,
                    &mut rng,
                );
                discriminator.predict(&adv) == label
            })
            .collect();
        hits.iter().filter(|&&h| h).count() as f64 / points.len() as f64
    };
    0.5 * side(real_eval, REAL_CLASS, 0) + 0.5 * side(proxy_eval, PROXY_CLASS, 1)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RaccPoint {
    pub epsilon: f64,
    pub racc: f64,
    /// Binomial standard error of the racc estimate.
    pub se: f64,
    /// Seed the per-ε discriminator was derived from.
    pub discriminator_seed: u64,
}

/// Robust discrimination accuracy as a function of the attack budget.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RaccCurve {
    pub points: Vec<RaccPoint>,
    pub n_train_per_side: usize,
    pub n_eval_per_side: usize,
}

impl RaccCurve {
    pub fn epsilons(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.epsilon).collect()
    }

    pub fn racc_values(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.racc).collect()
    }

    /// Median ε at which the curve crosses the given level downward
    /// (linearly interpolated); falls back to the last grid ε when the
    /// curve never drops that far.
    pub fn crossing_epsilon(&self, level: f64) -> f64 {
        let mut crossings = Vec::new();
        for w in self.points.windows(2) {
            let (a, b) = (&w[0], &w[1]);
            if a.racc >= level && b.racc < level {
                let t = (a.racc - level) / (a.racc - b.racc);
                crossings.push(a.epsilon + t * (b.epsilon - a.epsilon));
            }
        }
        if crossings.is_empty() {
            return self.points.last().map_or(0.0, |p| p.epsilon);
        }
        crossings.sort_by(|x, y| x.partial_cmp(y).unwrap());
        crossings[crossings.len() / 2]
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProximityBaselines {
    pub one_nn: f64,
    pub gaussian_frechet: f64,
}

/// ARC with its curve, statistical error, and baseline metrics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProximityReport {
    pub arc: f64,
    /// Propagated binomial standard error of the ARC integral.
    pub arc_se: f64,
    pub curve: RaccCurve,
    pub baselines: ProximityBaselines,
    pub config: ProximityConfig,
}

impl ProximityReport {
    /// Recomputes the ARC integral from the stored curve; the report is
    /// self-consistent within 1e-12.
    pub fn recomputed_arc(&self) -> f64 {
        let xs = self.curve.epsilons();
        let ys: Vec<f64> = self
            .curve
            .points
            .iter()
            .map(|p| (p.racc - 0.5).max(0.0))
            .collect();
        if xs.len() < 2 {
            return 0.0;
        }
        trapezoid(&xs, &ys).unwrap_or(0.0)
    }
}

/// Largest pairwise distance within each class of the dataset, averaged
/// over classes; computed on a deterministic subsample of at most 256
/// points per class.
pub fn mean_class_diameter(data: &Dataset, metric: Norm) -> f64 {
    let labels = data.class_labels();
    let mut acc = 0.0;
    for label in &labels {
        let idx = data.class_indices(*label);
        let take = idx.len().min(256);
        let mut diameter = 0.0f64;
        for i in 0..take {
            for j in (i + 1)..take {
                diameter = diameter.max(metric.dist(&data.points[idx[i]], &data.points[idx[j]]));
            }
        }
        acc += diameter;
    }
    acc / labels.len().max(1) as f64
}

/// Default ε grid: 0 followed by geometric steps ending at half the mean
/// per-class diameter of the real data.
pub fn auto_epsilon_grid(real: &Dataset, metric: Norm, points: usize) -> Vec<f64> {
    let eps_max = (mean_class_diameter(real, metric) / 2.0).max(1e-6);
    let mut grid = vec![0.0];
    let lo = eps_max / 64.0;
    let steps = points.saturating_sub(1).max(1);
    for k in 0..steps {
        let t = k as f64 / (steps - 1).max(1) as f64;
        grid.push(lo * (eps_max / lo).powf(t));
    }
    grid
}

fn trapezoid_weights(xs: &[f64]) -> Vec<f64> {
    let m = xs.len();
    (0..m)
        .map(|i| {
            let left = if i == 0 { xs[0] } else { xs[i - 1] };
            let right = if i + 1 == m { xs[m - 1] } else { xs[i + 1] };
            (right - left) / 2.0
        })
        .collect()
}

/// Area under the robust-discrimination curve: one discriminator per grid
/// ε, trained and evaluated at that ε; the integrand (racc − ½) is clamped
/// at 0 since an empirical discriminator can dip below chance; the grid
/// truncates early once two consecutive racc values sit at the chance
/// plateau.
pub fn arc(
    real: &Dataset,
    proxy: &Dataset,
    grid: Option<&[f64]>,
    cfg: &ProximityConfig,
    rng: &Rng,
) -> Result<ProximityReport> {
    let auto;
    let grid: &[f64] = match grid {
        Some(g) => g,
        None => {
            auto = auto_epsilon_grid(real, cfg.attack.norm, cfg.auto_grid_points);
            &auto
        }
    };
    if grid.is_empty() || grid[0] != 0.0 || grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Argument(
            "ARC grid must start at 0 and be strictly ascending".into(),
        ));
    }

    let mut points = Vec::with_capacity(grid.len());
    let mut n_train = 0;
    let mut n_eval = 0;
    for (k, &eps) in grid.iter().enumerate() {
        let disc_rng = rng.child(k as u64);
        let disc = train_robust_discriminator(real, proxy, eps, cfg, &disc_rng)?;
        n_eval = disc.holdout_real.len();
        n_train = real.len() - n_eval;
        let value = racc(
            &disc.model,
            &disc.holdout_real,
            &disc.holdout_proxy,
            eps,
            &AttackConfig {
                seed: disc_rng.child(10).seed(),
                ..cfg.attack.clone()
            },
        );
        // Balanced-accuracy binomial error over both sides.
        let n_side = n_eval.max(1) as f64;
        let p = value.clamp(0.01, 0.99);
        let se = 0.5 * (2.0 * p * (1.0 - p) / n_side).sqrt();
        points.push(RaccPoint {
            epsilon: eps,
            racc: value,
            se,
            discriminator_seed: disc_rng.seed(),
        });
        let m = points.len();
        if m >= 2
            && points[m - 1].racc <= cfg.truncate_below
            && points[m - 2].racc <= cfg.truncate_below
        {
            break;
        }
    }

    let xs: Vec<f64> = points.iter().map(|p| p.epsilon).collect();
    let ys: Vec<f64> = points.iter().map(|p| (p.racc - 0.5).max(0.0)).collect();
    let area = if xs.len() >= 2 { trapezoid(&xs, &ys)? } else { 0.0 };
    let weights = trapezoid_weights(&xs);
    let arc_se = points
        .iter()
        .zip(&weights)
        .map(|(p, w)| (w * p.se) * (w * p.se))
        .sum::<f64>()
        .sqrt();

    Ok(ProximityReport {
        arc: area,
        arc_se,
        curve: RaccCurve {
            points,
            n_train_per_side: n_train,
            n_eval_per_side: n_eval,
        },
        baselines: ProximityBaselines {
            one_nn: one_nn_distance(proxy, real),
            gaussian_frechet: gaussian_frechet(real, proxy)?,
        },
        config: cfg.clone(),
    })
}

/// Gradient objective for the real-vs-proxy logit gap l₁ − l₀. Since
/// CE(x, y) = lse(l) − l_y, the pure gap gradient is ∇CE₀ − ∇CE₁.
fn real_margin_objective(model: &Mlp) -> impl Fn(&[f64]) -> (f64, Vec<f64>) + Sync + '_ {
    move |x| {
        let logits = model.forward(x);
        let value = logits[REAL_CLASS] - logits[PROXY_CLASS];
        let g1 = model.input_grad_ce(x, REAL_CLASS);
        let g0 = model.input_grad_ce(x, PROXY_CLASS);
        let grad = g0.iter().zip(&g1).map(|(a, b)| a - b).collect();
        (value, grad)
    }
}

/// Synthetic score: the minimum over the ε-ball of the discriminator's
/// synthetic-class probability, searched by PGD toward the most
/// real-looking point. Low score means robustly close to the real data;
/// ε = 0 returns the raw probability at x.
pub fn synthetic_score(
    discriminator: &Mlp,
    x: &[f64],
    epsilon: f64,
    cfg: &AttackConfig,
    rng: &mut Rng,
) -> f64 {
    let attack = cfg.with_epsilon(epsilon);
    let objective = real_margin_objective(discriminator);
    let best = pgd_attack(&objective, x, &attack, rng);
    softmax(&discriminator.forward(&best))[PROXY_CLASS]
}

/// Warm-started score sweep over ascending budgets; scores are monotone
/// non-increasing because the attacked logit gap only improves.
pub fn synthetic_score_sweep(
    discriminator: &Mlp,
    x: &[f64],
    epsilons: &[f64],
    cfg: &AttackConfig,
    rng: &mut Rng,
) -> Vec<f64> {
    let objective = real_margin_objective(discriminator);
    let mut out = Vec::with_capacity(epsilons.len());
    let mut warm: Option<Vec<f64>> = None;
    let mut best_value = f64::NEG_INFINITY;
    for &eps in epsilons {
        let local = cfg.with_epsilon(eps);
        let best = pgd_attack_from(&objective, x, warm.as_deref(), &local, rng);
        best_value = best_value.max(objective(&best).0);
        // P(synthetic) at the best gap found so far is sigmoid(−gap).
        out.push(1.0 / (1.0 + best_value.exp()));
        warm = Some(best);
    }
    out
}

/// Points with per-sample synthetic scores at a fixed scoring ε.
#[derive(Debug, Clone)]
pub struct ScoredSamples {
    pub points: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    pub scores: Vec<f64>,
    pub epsilon: f64,
}

/// Scores every sample in parallel with index-derived child generators.
pub fn score_samples(
    discriminator: &Mlp,
    samples: &Dataset,
    epsilon: f64,
    cfg: &AttackConfig,
) -> ScoredSamples {
    let root = Rng::new(cfg.seed);
    let scores: Vec<f64> = samples
        .points
        .par_iter()
        .enumerate()
        .map(|(i, x)| {
            let mut rng = root.child(i as u64);
            synthetic_score(discriminator, x, epsilon, cfg, &mut rng)
        })
        .collect();
    ScoredSamples {
        points: samples.points.clone(),
        labels: samples.labels.clone(),
        scores,
        epsilon,
    }
}

/// Indices sorted by (score, original index): deterministic tie-break.
fn score_order(scored: &ScoredSamples) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scored.points.len()).collect();
    idx.sort_by(|&a, &b| {
        scored.scores[a]
            .partial_cmp(&scored.scores[b])
            .unwrap()
            .then(a.cmp(&b))
    });
    idx
}

/// The k lowest-score samples.
pub fn select_by_score(scored: &ScoredSamples, k: usize) -> Result<Dataset> {
    if k == 0 || k > scored.points.len() {
        return Err(Error::Argument(format!(
            "select_by_score: k = {k} out of range 1..={}",
            scored.points.len()
        )));
    }
    let order = score_order(scored);
    let pick = &order[..k];
    Ok(Dataset {
        points: pick.iter().map(|&i| scored.points[i].clone()).collect(),
        labels: pick.iter().map(|&i| scored.labels[i]).collect(),
        provenance: format!("lowest {k} of {} by score", scored.points.len()),
    })
}

/// Contiguous equal-size score-sorted groups, lowest scores first. When
/// n_groups does not divide the pool, the remainder of highest-score
/// samples is dropped so group sizes stay equal by construction.
pub fn score_groups(scored: &ScoredSamples, n_groups: usize) -> Result<Vec<Dataset>> {
    let n = scored.points.len();
    if n_groups == 0 || n_groups > n {
        return Err(Error::Argument(format!(
            "score_groups: n_groups = {n_groups} out of range 1..={n}"
        )));
    }
    let group_size = n / n_groups;
    let order = score_order(scored);
    Ok((0..n_groups)
        .map(|g| {
            let slice = &order[g * group_size..(g + 1) * group_size];
            Dataset {
                points: slice.iter().map(|&i| scored.points[i].clone()).collect(),
                labels: slice.iter().map(|&i| scored.labels[i]).collect(),
                provenance: format!("score group {}/{n_groups}", g + 1),
            }
        })
        .collect())
}

/// Mean L2 distance from each proxy point to its nearest real point.
pub fn one_nn_distance(proxy: &Dataset, real: &Dataset) -> f64 {
    assert!(!proxy.is_empty() && !real.is_empty());
    let mins: Vec<f64> = proxy
        .points
        .par_iter()
        .map(|p| {
            real.points
                .iter()
                .map(|r| Norm::L2.dist(p, r))
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    mins.iter().sum::<f64>() / proxy.len() as f64
}

/// Fréchet distance between Gaussians fitted to the pooled points of each
/// set (labels ignored): the same W2 closed form as the transport module,
/// applied to sample moments with a 1e-8 ridge.
pub fn gaussian_frechet(a: &Dataset, b: &Dataset) -> Result<f64> {
    let fit = |data: &Dataset| -> Result<(Vec<f64>, Mat)> {
        let (n, d) = (data.len(), data.dim());
        if n <= d + 1 {
            return Err(Error::Argument(format!(
                "gaussian_frechet: need more than dim+1 = {} samples, got {n}",
                d + 1
            )));
        }
        let mut mean = vec![0.0; d];
        for p in &data.points {
            for (m, v) in mean.iter_mut().zip(p) {
                *m += v;
            }
        }
        for m in mean.iter_mut() {
            *m /= n as f64;
        }
        let mut cov = Mat::zeros(d, d);
        for p in &data.points {
            for i in 0..d {
                let ci = p[i] - mean[i];
                for j in 0..d {
                    cov[(i, j)] += ci * (p[j] - mean[j]);
                }
            }
        }
        let mut cov = cov.scale(1.0 / (n - 1) as f64);
        for i in 0..d {
            cov[(i, i)] += 1e-8;
        }
        Ok((mean, cov))
    };
    let (ma, ca) = fit(a)?;
    let (mb, cb) = fit(b)?;
    gaussian_w2(&ma, &ca, &mb, &cb)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricDirection {
    LowerBetter,
    HigherBetter,
}

/// Competition rank of each value: 1 + the number of strictly better items.
fn competition_ranks(values: &[f64], direction: MetricDirection) -> Vec<usize> {
    values
        .iter()
        .map(|&v| {
            1 + values
                .iter()
                .filter(|&&u| match direction {
                    MetricDirection::LowerBetter => u < v,
                    MetricDirection::HigherBetter => u > v,
                })
                .count()
        })
        .collect()
}

/// Mean absolute difference between the metric's ranking and the ground
/// truth's (truth is higher-better: transferred robust accuracy).
pub fn ranking_difference(
    metric_values: &[f64],
    truth_values: &[f64],
    direction: MetricDirection,
) -> Result<f64> {
    if metric_values.len() != truth_values.len() || metric_values.len() < 2 {
        return Err(Error::Argument(
            "ranking_difference: need equal-length lists of at least 2".into(),
        ));
    }
    let metric_ranks = competition_ranks(metric_values, direction);
    let truth_ranks = competition_ranks(truth_values, MetricDirection::HigherBetter);
    Ok(metric_ranks
        .iter()
        .zip(&truth_ranks)
        .map(|(&m, &t)| (m as f64 - t as f64).abs())
        .sum::<f64>()
        / metric_values.len() as f64)
}

#[cfg(test)]
mod tests;
