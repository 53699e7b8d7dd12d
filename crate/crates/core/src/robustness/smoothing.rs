//! Randomized-smoothing certification: majority vote under Gaussian input
//! noise with an exact binomial lower confidence bound on the top class.

use crate::classifiers::Classifier;
use crate::numerics::special::{clopper_pearson_lower, norm_quantile};
use crate::numerics::Rng;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SmoothingConfig {
    /// Noise standard deviation.
    pub sigma: f64,
    /// Votes in the candidate-selection pass.
    pub n_selection: usize,
    /// Votes in the estimation pass.
    pub n_estimation: usize,
    /// One-sided confidence level for the Clopper-Pearson bound.
    pub alpha: f64,
    /// Stability-loss weight used at training time.
    pub beta: f64,
}

impl Default for SmoothingConfig {
    fn default() -> Self {
        SmoothingConfig {
            sigma: 0.25,
            n_selection: 100,
            n_estimation: 10_000,
            alpha: 0.001,
            beta: 6.0,
        }
    }
}

impl SmoothingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.sigma <= 0.0 {
            return Err(Error::Argument("SmoothingConfig: sigma must be > 0".into()));
        }
        if self.n_estimation < self.n_selection || self.n_selection == 0 {
            return Err(Error::Argument(
                "SmoothingConfig: need n_estimation >= n_selection >= 1".into(),
            ));
        }
        if !(0.0 < self.alpha && self.alpha < 1.0) {
            return Err(Error::Argument("SmoothingConfig: alpha in (0,1)".into()));
        }
        if self.beta < 0.0 {
            return Err(Error::Argument("SmoothingConfig: beta >= 0".into()));
        }
        Ok(())
    }
}

/// Outcome of certifying one point. Abstention is a value, not an error.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum Certification {
    Certified {
        class: usize,
        radius: f64,
        p_lower: f64,
        votes: u64,
    },
    Abstain {
        class: usize,
        p_lower: f64,
        votes: u64,
    },
}

impl Certification {
    pub fn radius(&self) -> Option<f64> {
        match self {
            Certification::Certified { radius, .. } => Some(*radius),
            Certification::Abstain { .. } => None,
        }
    }

    pub fn is_abstain(&self) -> bool {
        matches!(self, Certification::Abstain { .. })
    }
}

fn vote(model: &impl Classifier, x: &[f64], sigma: f64, rng: &mut Rng) -> usize {
    let noisy: Vec<f64> = x.iter().map(|v| v + sigma * rng.normal()).collect();
    model.predict(&noisy)
}

/// Certifies one point following the two-pass smoothing procedure: a
/// selection pass picks the candidate class, a fresh estimation pass gives
/// a one-sided Clopper-Pearson lower bound p̲ on its vote probability, and
/// the certified L2 radius is σ·Φ⁻¹(p̲); abstain when p̲ ≤ ½.
pub fn certify(
    model: &impl Classifier,
    x: &[f64],
    scfg: &SmoothingConfig,
    rng: &mut Rng,
) -> Certification {
    let classes = model.num_classes();
    let mut counts = vec![0u64; classes];
    for _ in 0..scfg.n_selection {
        counts[vote(model, x, scfg.sigma, rng)] += 1;
    }
    let candidate = counts
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)))
        .map(|(i, _)| i)
        .unwrap();

    let mut hits = 0u64;
    for _ in 0..scfg.n_estimation {
        if vote(model, x, scfg.sigma, rng) == candidate {
            hits += 1;
        }
    }
    let p_lower = clopper_pearson_lower(hits, scfg.n_estimation as u64, scfg.alpha);
    if p_lower > 0.5 {
        Certification::Certified {
            class: candidate,
            radius: scfg.sigma * norm_quantile(p_lower),
            p_lower,
            votes: hits,
        }
    } else {
        Certification::Abstain {
            class: candidate,
            p_lower,
            votes: hits,
        }
    }
}
