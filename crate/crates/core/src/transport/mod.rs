//! Conditional Wasserstein distance between labeled distributions, via
//! three estimators: the Gaussian W2 closed form, the concentric-sphere
//! analytic form, and exact-assignment empirical W1.
//!
//! The W2 closed form is a valid (loose) upper bound wherever the W1-based
//! distance appears in a bound, since W1 ≤ W2. The empirical estimator is
//! the laboratory's ground truth: an exact minimum-cost matching, never an
//! approximation.

mod assignment;

pub use assignment::min_cost_assignment;

use crate::distributions::{ClassConditional, Dataset, LabeledDistribution};
use crate::numerics::{psd_sqrt, Mat, Norm};
use crate::{Error, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Largest per-class sample size the exact assignment accepts. Beyond this
/// the O(n³) solve stops being a sensible ground-truth tool, and silently
/// approximating would defeat its purpose.
pub const MAX_ASSIGNMENT_SIZE: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    GaussianW2,
    SphereExact,
    EmpiricalW1,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClassDistance {
    pub label: usize,
    pub weight: f64,
    pub distance: f64,
}

/// Per-class transport distances and their weight-averaged total.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CwdReport {
    pub per_class: Vec<ClassDistance>,
    pub total: f64,
    pub estimator: Estimator,
}

impl CwdReport {
    fn from_classes(per_class: Vec<ClassDistance>, estimator: Estimator) -> Self {
        let total = per_class.iter().map(|c| c.weight * c.distance).sum();
        CwdReport {
            per_class,
            total,
            estimator,
        }
    }
}

/// Pairs up classes of two distributions by label, checking weights match.
fn paired_classes<'a>(
    d: &'a LabeledDistribution,
    d_tilde: &'a LabeledDistribution,
) -> Result<Vec<(&'a crate::distributions::ClassSpec, &'a crate::distributions::ClassSpec)>> {
    if d.classes().len() != d_tilde.classes().len() {
        return Err(Error::Incompatible("class counts differ".into()));
    }
    let mut pairs = Vec::new();
    for a in d.classes() {
        let Some(b) = d_tilde.classes().iter().find(|c| c.label == a.label) else {
            return Err(Error::Incompatible(format!("label {} missing", a.label)));
        };
        if (a.weight - b.weight).abs() > 1e-12 {
            return Err(Error::Incompatible(format!(
                "weights differ for label {}",
                a.label
            )));
        }
        pairs.push((a, b));
    }
    Ok(pairs)
}

/// W2 between two Gaussians from their moments:
/// `W2² = ‖m₁−m₂‖² + Tr(C₁ + C₂ − 2(C₁^½ C₂ C₁^½)^½)`.
pub fn gaussian_w2(m1: &[f64], c1: &Mat, m2: &[f64], c2: &Mat) -> Result<f64> {
    if m1.len() != m2.len() || c1.rows() != m1.len() || c2.rows() != m2.len() {
        return Err(Error::Dimension("gaussian_w2: moment shapes disagree".into()));
    }
    let s1 = psd_sqrt(c1)?;
    let inner = s1.matmul(c2).matmul(&s1).symmetrize();
    let cross = psd_sqrt(&inner)?;
    let mean_sq: f64 = m1.iter().zip(m2).map(|(a, b)| (a - b) * (a - b)).sum();
    let w2_sq = mean_sq + c1.trace() + c2.trace() - 2.0 * cross.trace();
    // Tiny negatives are rounding in the trace difference.
    Ok(w2_sq.max(0.0).sqrt())
}

/// Closed-form conditional W2 for all-Gaussian distributions.
pub fn cwd_gaussian(
    d: &LabeledDistribution,
    d_tilde: &LabeledDistribution,
) -> Result<CwdReport> {
    let mut per_class = Vec::new();
    for (a, b) in paired_classes(d, d_tilde)? {
        let (
            ClassConditional::Gaussian { mean: m1, cov_sqrt: s1 },
            ClassConditional::Gaussian { mean: m2, cov_sqrt: s2 },
        ) = (&a.conditional, &b.conditional)
        else {
            return Err(Error::UnsupportedFamily(
                "cwd_gaussian requires all-Gaussian conditionals".into(),
            ));
        };
        let c1 = s1.matmul(s1).symmetrize();
        let c2 = s2.matmul(s2).symmetrize();
        per_class.push(ClassDistance {
            label: a.label,
            weight: a.weight,
            distance: gaussian_w2(m1, &c1, m2, &c2)?,
        });
    }
    Ok(CwdReport::from_classes(per_class, Estimator::GaussianW2))
}

/// Exact conditional distance for per-class concentric uniform spheres:
/// the optimal transport is the radial rescaling, moving every point by
/// exactly |r̃ − r|.
pub fn cwd_sphere(d: &LabeledDistribution, d_tilde: &LabeledDistribution) -> Result<CwdReport> {
    let mut per_class = Vec::new();
    for (a, b) in paired_classes(d, d_tilde)? {
        let (
            ClassConditional::UniformSphere { center: c1, radius: r1 },
            ClassConditional::UniformSphere { center: c2, radius: r2 },
        ) = (&a.conditional, &b.conditional)
        else {
            return Err(Error::UnsupportedFamily(
                "cwd_sphere requires all-sphere conditionals".into(),
            ));
        };
        if Norm::L2.dist(c1, c2) > 1e-9 {
            return Err(Error::UnsupportedFamily(
                "cwd_sphere requires concentric spheres".into(),
            ));
        }
        per_class.push(ClassDistance {
            label: a.label,
            weight: a.weight,
            distance: (r1 - r2).abs(),
        });
    }
    Ok(CwdReport::from_classes(per_class, Estimator::SphereExact))
}

/// Exact empirical W1 between equal-size point sets, with the individual
/// matched distances (useful for standard-error estimates).
pub fn empirical_w1_detailed(
    a: &[Vec<f64>],
    b: &[Vec<f64>],
    metric: Norm,
) -> Result<(f64, Vec<f64>)> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::Argument(format!(
            "empirical_w1: need equal nonempty sets, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    if a.len() > MAX_ASSIGNMENT_SIZE {
        return Err(Error::Argument(format!(
            "empirical_w1: {} points exceeds the exact-assignment cap {MAX_ASSIGNMENT_SIZE}",
            a.len()
        )));
    }
    let n = a.len();
    let rows: Vec<Vec<f64>> = a
        .par_iter()
        .map(|ai| b.iter().map(|bj| metric.dist(ai, bj)).collect())
        .collect();
    let mut cost = Mat::zeros(n, n);
    for (i, row) in rows.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            cost[(i, j)] = v;
        }
    }
    let (assignment, total) = min_cost_assignment(&cost);
    let matched: Vec<f64> = assignment
        .iter()
        .enumerate()
        .map(|(i, &j)| cost[(i, j)])
        .collect();
    Ok((total / n as f64, matched))
}

/// Mean cost of the exact minimum matching between equal-size sets.
pub fn empirical_w1(a: &[Vec<f64>], b: &[Vec<f64>], metric: Norm) -> Result<f64> {
    empirical_w1_detailed(a, b, metric).map(|(mean, _)| mean)
}

/// Per-class empirical W1 between two datasets, weight-averaged by the
/// first dataset's class frequencies.
pub fn cwd_empirical(sa: &Dataset, sb: &Dataset, metric: Norm) -> Result<CwdReport> {
    let labels = sa.class_labels();
    if labels != sb.class_labels() {
        return Err(Error::Incompatible("datasets have different label sets".into()));
    }
    let mut per_class = Vec::new();
    for label in labels {
        let ia = sa.class_indices(label);
        let ib = sb.class_indices(label);
        if ia.len() != ib.len() {
            return Err(Error::Incompatible(format!(
                "class {label}: {} vs {} points",
                ia.len(),
                ib.len()
            )));
        }
        let pa: Vec<Vec<f64>> = ia.iter().map(|&i| sa.points[i].clone()).collect();
        let pb: Vec<Vec<f64>> = ib.iter().map(|&i| sb.points[i].clone()).collect();
        let (dist, _) = empirical_w1_detailed(&pa, &pb, metric)?;
        per_class.push(ClassDistance {
            label,
            weight: ia.len() as f64 / sa.len() as f64,
            distance: dist,
        });
    }
    Ok(CwdReport::from_classes(per_class, Estimator::EmpiricalW1))
}
