//! One module per experiment suite; each materializes a theorem or
//! methodology check over its sweep and emits auditable records.

mod adaptive;
mod arc_rank;
mod certify;
mod gradcheck;
mod theorem1;
mod theorem2;
mod theorem6;
mod theorem7;

pub use gradcheck::{run_gradcheck_with_corruption, Corruption};

use crate::config::{ExperimentConfig, SuiteName};
use crate::record::{ResultRecord, SeedOutput};
use portlab::distributions::{isotropic_gaussians, Dataset, LabeledDistribution};
use portlab::numerics::{Norm, Rng};
use portlab::Result;
use rayon::prelude::*;

/// All outputs of one suite execution across its seed list.
pub struct SuiteRun {
    pub per_seed: Vec<(u64, SeedOutput)>,
    /// Cross-seed aggregate records (median verdicts and the like).
    pub summary: Vec<ResultRecord>,
}

impl SuiteRun {
    pub fn all_pass(&self) -> bool {
        self.per_seed
            .iter()
            .flat_map(|(_, out)| &out.records)
            .chain(&self.summary)
            .all(|r| r.all_pass())
    }
}

/// Runs the suite over every seed in the config (in parallel; outputs are
/// assembled in seed order so scheduling cannot affect the files).
pub fn execute(suite: SuiteName, cfg: &ExperimentConfig) -> Result<SuiteRun> {
    let per_seed: Vec<(u64, SeedOutput)> = cfg
        .seeds
        .par_iter()
        .map(|&seed| {
            let out = match suite {
                SuiteName::Theorem1 => theorem1::run(cfg, seed),
                SuiteName::Theorem2 => theorem2::run(cfg, seed),
                SuiteName::Theorem6 => theorem6::run(cfg, seed),
                SuiteName::Theorem7 => theorem7::run(cfg, seed),
                SuiteName::ArcRank => arc_rank::run(cfg, seed),
                SuiteName::Adaptive => adaptive::run(cfg, seed),
                SuiteName::Certify => certify::run(cfg, seed),
                SuiteName::Gradcheck => gradcheck::run(cfg, seed),
            };
            out.map(|o| (seed, o))
        })
        .collect::<Result<_>>()?;

    let summary = match suite {
        SuiteName::Adaptive => adaptive::summarize(cfg, &per_seed),
        SuiteName::Certify => certify::summarize(cfg, &per_seed),
        _ => Vec::new(),
    };
    Ok(SuiteRun { per_seed, summary })
}

pub(crate) fn empty_dataset() -> Dataset {
    Dataset::new(vec![], vec![], "empty".into()).unwrap()
}

/// Gaussian classes with means drawn from N(0, mean_scale²·I), covariance
/// sigma·I per class.
pub(crate) fn random_gaussian_classes(
    classes: usize,
    dim: usize,
    mean_scale: f64,
    sigma: f64,
    rng: &mut Rng,
) -> LabeledDistribution {
    let means: Vec<Vec<f64>> = (0..classes)
        .map(|_| (0..dim).map(|_| mean_scale * rng.normal()).collect())
        .collect();
    isotropic_gaussians(means, sigma, Norm::L2).expect("valid construction")
}

/// The same classes translated by a fixed vector: a pure mean shift whose
/// conditional W2 distance is exactly the vector's norm.
pub(crate) fn translated(dist: &LabeledDistribution, offset: &[f64]) -> LabeledDistribution {
    use portlab::distributions::{ClassConditional, ClassSpec};
    let classes = dist
        .classes()
        .iter()
        .map(|c| {
            let ClassConditional::Gaussian { mean, cov_sqrt } = &c.conditional else {
                panic!("translated: Gaussian classes only");
            };
            ClassSpec {
                label: c.label,
                weight: c.weight,
                conditional: ClassConditional::Gaussian {
                    mean: mean.iter().zip(offset).map(|(m, o)| m + o).collect(),
                    cov_sqrt: cov_sqrt.clone(),
                },
            }
        })
        .collect();
    LabeledDistribution::new(classes, dist.metric()).expect("valid construction")
}

pub(crate) fn median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    values[values.len() / 2]
}
