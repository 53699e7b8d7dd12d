//! Experiment configuration: one TOML file per run, schema-validated with
//! unknown keys rejected, and echoed fully resolved into the run manifest
//! so no default stays implicit.

use portlab::classifiers::TrainConfig;
use portlab::proximity::ProximityConfig;
use portlab::robustness::{AttackConfig, SmoothingConfig};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SuiteName {
    Theorem1,
    Theorem2,
    Theorem6,
    Theorem7,
    ArcRank,
    Adaptive,
    Certify,
    Gradcheck,
}

impl SuiteName {
    pub fn as_str(&self) -> &'static str {
        match self {
            SuiteName::Theorem1 => "theorem1",
            SuiteName::Theorem2 => "theorem2",
            SuiteName::Theorem6 => "theorem6",
            SuiteName::Theorem7 => "theorem7",
            SuiteName::ArcRank => "arc-rank",
            SuiteName::Adaptive => "adaptive",
            SuiteName::Certify => "certify",
            SuiteName::Gradcheck => "gradcheck",
        }
    }
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

fn default_out_dir() -> String {
    "runs".into()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSpec {
    /// Hidden layer widths of the classifier MLP.
    pub hidden: Vec<usize>,
}

impl Default for ModelSpec {
    fn default() -> Self {
        ModelSpec { hidden: vec![64, 64] }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Optional; must match the CLI subcommand when present.
    #[serde(default)]
    pub suite: Option<SuiteName>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_out_dir")]
    pub out_dir: String,
    #[serde(default)]
    pub model: ModelSpec,
    #[serde(default)]
    pub attack: AttackConfig,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub smoothing: SmoothingConfig,
    #[serde(default)]
    pub proximity: ProximityConfig,
    #[serde(default)]
    pub theorem1: Theorem1Params,
    #[serde(default)]
    pub theorem2: Theorem2Params,
    #[serde(default)]
    pub theorem6: Theorem6Params,
    #[serde(default)]
    pub theorem7: Theorem7Params,
    #[serde(default)]
    pub arc_rank: ArcRankParams,
    #[serde(default)]
    pub adaptive: AdaptiveParams,
    #[serde(default)]
    pub certify: CertifyParams,
    #[serde(default)]
    pub gradcheck: GradcheckParams,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        toml::from_str("").expect("empty config is valid")
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, String> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| e.to_string())?;
        if cfg.seeds.is_empty() {
            return Err("seeds must not be empty".into());
        }
        cfg.attack.validate().map_err(|e| e.to_string())?;
        cfg.train.validate().map_err(|e| e.to_string())?;
        cfg.smoothing.validate().map_err(|e| e.to_string())?;
        Ok(cfg)
    }
}

/// Gaussian bound-validation sweep: perturbed proxies against the W2
/// closed form.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Theorem1Params {
    pub classes: usize,
    pub dim: usize,
    /// Class means are drawn from N(0, mean_scale²·I).
    pub mean_scale: f64,
    /// Isotropic class covariance σ·I (square-root factor).
    pub sigma: f64,
    pub n_train_per_class: usize,
    pub n_eval_per_class: usize,
    pub n_proxies: usize,
    pub max_mean_shift: f64,
    pub max_cov_shift: f64,
    pub eps_max: f64,
}

impl Default for Theorem1Params {
    fn default() -> Self {
        Theorem1Params {
            classes: 4,
            dim: 16,
            mean_scale: 1.2,
            sigma: 1.0,
            n_train_per_class: 250,
            n_eval_per_class: 500,
            n_proxies: 20,
            max_mean_shift: 1.0,
            max_cov_shift: 0.2,
            eps_max: 4.0,
        }
    }
}

/// Concentric-sphere equality case.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Theorem2Params {
    pub dim: usize,
    pub radius: f64,
    pub radius_proxy: f64,
    pub n_per_side: usize,
    pub grid: Vec<f64>,
    /// Budget at which racc must still be high, and its floor.
    pub racc_high_eps: f64,
    pub racc_high_min: f64,
    /// Budget past the threshold where racc must have collapsed.
    pub racc_low_eps: f64,
    pub racc_low_max: f64,
    pub arc_min: f64,
    pub arc_max: f64,
    /// Number of random Gaussian proxy pairs for the inequality check.
    pub inequality_pairs: usize,
}

impl Default for Theorem2Params {
    fn default() -> Self {
        Theorem2Params {
            dim: 8,
            radius: 1.0,
            radius_proxy: 2.0,
            n_per_side: 1200,
            grid: vec![0.0, 0.125, 0.25, 0.375, 0.5, 0.625, 0.75, 0.875, 1.0],
            racc_high_eps: 0.25,
            racc_high_min: 0.95,
            racc_low_eps: 0.75,
            racc_low_max: 0.60,
            arc_min: 0.20,
            arc_max: 0.30,
            inequality_pairs: 5,
        }
    }
}

/// Mixture bound check.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Theorem6Params {
    pub dim: usize,
    pub classes: usize,
    /// Pure mean shift applied to every class (the exact cwd).
    pub shift: f64,
    pub sigma: f64,
    pub n_per_class: usize,
    pub p_grid: Vec<f64>,
}

impl Default for Theorem6Params {
    fn default() -> Self {
        Theorem6Params {
            dim: 2,
            classes: 2,
            shift: 2.0,
            sigma: 0.25,
            n_per_class: 200,
            p_grid: vec![0.1, 0.5, 0.9],
        }
    }
}

/// Tightness construction on two-blob data with a linear classifier.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Theorem7Params {
    pub blob_distance: f64,
    pub sigma: f64,
    pub n_per_class: usize,
    pub alphas: Vec<f64>,
    pub tolerance: f64,
}

impl Default for Theorem7Params {
    fn default() -> Self {
        Theorem7Params {
            blob_distance: 4.0,
            sigma: 0.5,
            n_per_class: 200,
            alphas: vec![0.0, 0.25, 0.5, 1.0],
            tolerance: 1e-6,
        }
    }
}

/// Proxy ranking against transferred robust accuracy.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArcRankParams {
    pub classes: usize,
    pub dim: usize,
    /// Distance of each class mean from the origin along its own axis.
    pub class_scale: f64,
    pub sigma: f64,
    /// Mean-shift magnitude of each proxy; equals its exact cwd.
    pub proxy_shifts: Vec<f64>,
    pub n_train_per_class: usize,
    pub n_eval_per_class: usize,
    pub n_arc_per_class: usize,
    pub grid: Vec<f64>,
}

impl Default for ArcRankParams {
    fn default() -> Self {
        ArcRankParams {
            classes: 3,
            dim: 6,
            class_scale: 4.0,
            sigma: 1.0,
            proxy_shifts: vec![0.5, 1.5, 3.0],
            n_train_per_class: 300,
            n_eval_per_class: 200,
            n_arc_per_class: 200,
            grid: vec![0.0, 0.1, 0.2, 0.4, 0.8, 1.2, 1.8, 2.5],
        }
    }
}

/// Score-group sweep on a planted near/far proxy pool.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdaptiveParams {
    pub dim: usize,
    pub blob_distance: f64,
    pub sigma: f64,
    pub near_shift: f64,
    pub far_shift: f64,
    /// Near/far composition of the pool, per class.
    pub near_per_class: usize,
    pub far_per_class: usize,
    pub n_groups: usize,
    pub n_real_train_per_class: usize,
    pub n_real_eval_per_class: usize,
    pub gamma: f64,
    /// Scoring budget; when unset, the median ε at which a coarse racc
    /// curve crosses 0.75.
    pub scoring_epsilon: Option<f64>,
}

impl Default for AdaptiveParams {
    fn default() -> Self {
        AdaptiveParams {
            dim: 4,
            blob_distance: 4.0,
            sigma: 1.0,
            near_shift: 0.3,
            far_shift: 4.0,
            near_per_class: 700,
            far_per_class: 300,
            n_groups: 10,
            n_real_train_per_class: 100,
            n_real_eval_per_class: 300,
            gamma: 0.4,
            scoring_epsilon: None,
        }
    }
}

/// Certification soundness on the linear oracle plus the mixed-training
/// comparison (recorded without a verdict).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CertifyParams {
    pub dim: usize,
    pub n_points: usize,
    /// Exact margin every oracle point is placed at.
    pub margin: f64,
    pub mean_radius_floor_factor: f64,
    /// Radius grid for the certified-accuracy curve CSV.
    pub radius_grid_max: f64,
    pub radius_grid_points: usize,
    /// Mixed smoothing-training comparison (desk analog, no verdict).
    pub run_model_comparison: bool,
    pub comparison_n_train_per_class: usize,
    pub comparison_n_eval: usize,
    pub comparison_n_estimation: usize,
    pub comparison_proxy_shift: f64,
    pub comparison_gamma: f64,
}

impl Default for CertifyParams {
    fn default() -> Self {
        CertifyParams {
            dim: 4,
            n_points: 500,
            margin: 0.5,
            mean_radius_floor_factor: 0.8,
            radius_grid_max: 1.0,
            radius_grid_points: 21,
            run_model_comparison: true,
            comparison_n_train_per_class: 150,
            comparison_n_eval: 100,
            comparison_n_estimation: 2000,
            comparison_proxy_shift: 0.3,
            comparison_gamma: 0.4,
        }
    }
}

/// Analytic-vs-finite-difference gradient gate.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GradcheckParams {
    pub n_checks: usize,
    pub step: f64,
    pub tolerance: f64,
}

impl Default for GradcheckParams {
    fn default() -> Self {
        GradcheckParams {
            n_checks: 50,
            step: 1e-5,
            tolerance: 1e-5,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_resolves_defaults() {
        let cfg = ExperimentConfig::from_toml("").unwrap();
        assert_eq!(cfg.seeds, vec![0]);
        assert_eq!(cfg.theorem1.n_proxies, 20);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(ExperimentConfig::from_toml("nonsense = 1").is_err());
        assert!(ExperimentConfig::from_toml("[theorem1]\nbogus_knob = 2").is_err());
        assert!(ExperimentConfig::from_toml("[attack]\ntypo_epsilon = 0.1").is_err());
    }

    #[test]
    fn invalid_values_rejected() {
        assert!(ExperimentConfig::from_toml("seeds = []").is_err());
        assert!(ExperimentConfig::from_toml("[attack]\nsteps = 0").is_err());
        assert!(ExperimentConfig::from_toml("[smoothing]\nsigma = -1.0").is_err());
    }

    #[test]
    fn roundtrips_through_toml() {
        let cfg = ExperimentConfig::from_toml("suite = \"theorem6\"\nseeds = [7]").unwrap();
        let text = toml::to_string(&cfg).unwrap();
        let back = ExperimentConfig::from_toml(&text).unwrap();
        assert_eq!(back.suite, Some(SuiteName::Theorem6));
        assert_eq!(back.seeds, vec![7]);
    }
}
