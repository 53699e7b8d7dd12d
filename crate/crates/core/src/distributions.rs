//! Labeled distributions from analytically tractable families, with
//! stratified samplers and the constructive distributions used by the
//! mixture and tightness arguments.

use crate::classifiers::{Classifier, LinearClassifier};
use crate::numerics::{psd_project, sample_gaussian, spectral_norm_sym, Mat, Norm, Rng};
use crate::{Error, Result};

/// A single class-conditional distribution on ℝᵈ.
#[derive(Debug, Clone)]
pub enum ClassConditional {
    Gaussian {
        mean: Vec<f64>,
        /// Symmetric PSD square root of the covariance.
        cov_sqrt: Mat,
    },
    UniformSphere {
        center: Vec<f64>,
        radius: f64,
    },
    Empirical {
        points: Vec<Vec<f64>>,
    },
    /// Draw x from `base`, then move the fraction `alpha` of the way to the
    /// nearest point the classifier labels differently from `label`.
    /// Restricted to linear classifiers, whose nearest adversarial point is
    /// exact; L2 metric only.
    AdversarialShift {
        base: Box<ClassConditional>,
        classifier: LinearClassifier,
        label: usize,
        alpha: f64,
    },
    /// Draw from `primary` with probability p, else from `secondary`.
    Mixture {
        p: f64,
        primary: Box<ClassConditional>,
        secondary: Box<ClassConditional>,
    },
}

impl ClassConditional {
    pub fn dim(&self) -> usize {
        match self {
            ClassConditional::Gaussian { mean, .. } => mean.len(),
            ClassConditional::UniformSphere { center, .. } => center.len(),
            ClassConditional::Empirical { points } => points.first().map_or(0, |p| p.len()),
            ClassConditional::AdversarialShift { base, .. } => base.dim(),
            ClassConditional::Mixture { primary, .. } => primary.dim(),
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            ClassConditional::Gaussian { mean, cov_sqrt } => {
                if !cov_sqrt.is_square() || cov_sqrt.rows() != mean.len() {
                    return Err(Error::Dimension(
                        "Gaussian: cov_sqrt must be square with the mean's dimension".into(),
                    ));
                }
                Ok(())
            }
            ClassConditional::UniformSphere { radius, .. } => {
                if *radius <= 0.0 {
                    return Err(Error::Argument("UniformSphere: radius must be > 0".into()));
                }
                Ok(())
            }
            ClassConditional::Empirical { points } => {
                if points.is_empty() {
                    return Err(Error::Argument("Empirical: needs at least one point".into()));
                }
                let d = points[0].len();
                if points.iter().any(|p| p.len() != d) {
                    return Err(Error::Dimension("Empirical: ragged point set".into()));
                }
                Ok(())
            }
            ClassConditional::AdversarialShift {
                base,
                classifier,
                alpha,
                ..
            } => {
                if !(0.0..=1.0).contains(alpha) {
                    return Err(Error::Argument("AdversarialShift: alpha in [0,1]".into()));
                }
                if classifier.input_dim() != base.dim() {
                    return Err(Error::Dimension(
                        "AdversarialShift: classifier dimension mismatch".into(),
                    ));
                }
                base.validate()
            }
            ClassConditional::Mixture {
                p,
                primary,
                secondary,
            } => {
                if !(0.0..=1.0).contains(p) {
                    return Err(Error::Argument("Mixture: p in [0,1]".into()));
                }
                if primary.dim() != secondary.dim() {
                    return Err(Error::Dimension("Mixture: component dimensions differ".into()));
                }
                primary.validate()?;
                secondary.validate()
            }
        }
    }

    pub fn sample(&self, rng: &mut Rng) -> Vec<f64> {
        match self {
            ClassConditional::Gaussian { mean, cov_sqrt } => {
                sample_gaussian(rng, mean, cov_sqrt).expect("validated at construction")
            }
            ClassConditional::UniformSphere { center, radius } => {
                // Normalized Gaussian draw is uniform on the sphere.
                loop {
                    let z: Vec<f64> = (0..center.len()).map(|_| rng.normal()).collect();
                    let n = Norm::L2.len(&z);
                    if n > 1e-12 {
                        return center
                            .iter()
                            .zip(&z)
                            .map(|(c, zi)| c + radius * zi / n)
                            .collect();
                    }
                }
            }
            ClassConditional::Empirical { points } => points[rng.below(points.len())].clone(),
            ClassConditional::AdversarialShift {
                base,
                classifier,
                label,
                alpha,
            } => {
                let x = base.sample(rng);
                let target = nearest_adversarial(classifier, &x, *label);
                x.iter()
                    .zip(&target)
                    .map(|(xi, ti)| xi + alpha * (ti - xi))
                    .collect()
            }
            ClassConditional::Mixture {
                p,
                primary,
                secondary,
            } => {
                if rng.uniform() < *p {
                    primary.sample(rng)
                } else {
                    secondary.sample(rng)
                }
            }
        }
    }
}

/// Nearest point (L2) whose prediction differs from `label`: the point
/// itself when already misclassified, otherwise the orthogonal projection
/// onto the decision boundary.
fn nearest_adversarial(h: &LinearClassifier, x: &[f64], label: usize) -> Vec<f64> {
    if h.predict(x) != label {
        x.to_vec()
    } else {
        h.project_to_boundary(x)
    }
}

/// One labeled class of a [`LabeledDistribution`].
#[derive(Debug, Clone)]
pub struct ClassSpec {
    pub label: usize,
    pub weight: f64,
    pub conditional: ClassConditional,
}

/// A sampleable class-conditional distribution over ℝᵈ × labels.
#[derive(Debug, Clone)]
pub struct LabeledDistribution {
    classes: Vec<ClassSpec>,
    metric: Norm,
}

impl LabeledDistribution {
    pub fn new(classes: Vec<ClassSpec>, metric: Norm) -> Result<Self> {
        if classes.is_empty() {
            return Err(Error::Argument("distribution needs at least one class".into()));
        }
        let total: f64 = classes.iter().map(|c| c.weight).sum();
        if (total - 1.0).abs() > 1e-12 || classes.iter().any(|c| c.weight <= 0.0) {
            return Err(Error::Argument(
                "class weights must be positive and sum to 1".into(),
            ));
        }
        let mut labels: Vec<usize> = classes.iter().map(|c| c.label).collect();
        labels.sort_unstable();
        labels.dedup();
        if labels.len() != classes.len() {
            return Err(Error::Argument("class labels must be distinct".into()));
        }
        let d = classes[0].conditional.dim();
        for c in &classes {
            c.conditional.validate()?;
            if c.conditional.dim() != d {
                return Err(Error::Dimension(
                    "all class conditionals must share one ambient dimension".into(),
                ));
            }
        }
        Ok(LabeledDistribution { classes, metric })
    }

    /// Equal-weight convenience constructor.
    pub fn uniform_weights(
        conditionals: Vec<(usize, ClassConditional)>,
        metric: Norm,
    ) -> Result<Self> {
        let w = 1.0 / conditionals.len() as f64;
        LabeledDistribution::new(
            conditionals
                .into_iter()
                .map(|(label, conditional)| ClassSpec {
                    label,
                    weight: w,
                    conditional,
                })
                .collect(),
            metric,
        )
    }

    pub fn classes(&self) -> &[ClassSpec] {
        &self.classes
    }

    pub fn metric(&self) -> Norm {
        self.metric
    }

    pub fn dim(&self) -> usize {
        self.classes[0].conditional.dim()
    }

    pub fn labels(&self) -> Vec<usize> {
        self.classes.iter().map(|c| c.label).collect()
    }
}

/// Finite labeled sample set — the empirical Ŝ of a distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub points: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    /// Free-text note on origin (family and seed).
    pub provenance: String,
}

impl Dataset {
    pub fn new(points: Vec<Vec<f64>>, labels: Vec<usize>, provenance: String) -> Result<Self> {
        if points.len() != labels.len() {
            return Err(Error::Dimension(
                "Dataset: points and labels must have equal length".into(),
            ));
        }
        if let Some(first) = points.first() {
            let d = first.len();
            if points.iter().any(|p| p.len() != d) {
                return Err(Error::Dimension("Dataset: ragged points".into()));
            }
        }
        Ok(Dataset {
            points,
            labels,
            provenance,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points.first().map_or(0, |p| p.len())
    }

    /// Distinct labels in ascending order.
    pub fn class_labels(&self) -> Vec<usize> {
        let mut l = self.labels.clone();
        l.sort_unstable();
        l.dedup();
        l
    }

    /// Indices of the points carrying `label`.
    pub fn class_indices(&self, label: usize) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.labels[i] == label).collect()
    }

    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            points: indices.iter().map(|&i| self.points[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            provenance: format!("{} (subset of {})", self.provenance, self.len()),
        }
    }
}

/// Stratified sampler: exactly `n_per_class` points per class, so paired
/// samples always have identical label distributions. Class `k` draws from
/// child stream `k` of `rng`, making per-class streams independent of the
/// class order and of other classes' draw counts.
pub fn sample(dist: &LabeledDistribution, n_per_class: usize, rng: &Rng) -> Dataset {
    assert!(n_per_class >= 1, "sample: n_per_class must be >= 1");
    let mut points = Vec::with_capacity(n_per_class * dist.classes.len());
    let mut labels = Vec::with_capacity(points.capacity());
    for (k, class) in dist.classes.iter().enumerate() {
        let mut class_rng = rng.child(k as u64);
        for _ in 0..n_per_class {
            points.push(class.conditional.sample(&mut class_rng));
            labels.push(class.label);
        }
    }
    Dataset {
        points,
        labels,
        provenance: format!("sampled seed={} n_per_class={}", rng.seed(), n_per_class),
    }
}

/// Perturbs every Gaussian class: the mean moves by an isotropic Gaussian
/// offset of per-coordinate standard deviation `mean_shift_scale`, and the
/// covariance square root gains a random symmetric perturbation of spectral
/// norm `cov_shift_scale`, re-projected to PSD. Class weights are kept.
pub fn perturb_gaussians(
    dist: &LabeledDistribution,
    mean_shift_scale: f64,
    cov_shift_scale: f64,
    rng: &mut Rng,
) -> Result<LabeledDistribution> {
    if mean_shift_scale < 0.0 || cov_shift_scale < 0.0 {
        return Err(Error::Argument("perturbation scales must be >= 0".into()));
    }
    let mut classes = Vec::with_capacity(dist.classes.len());
    for class in &dist.classes {
        let ClassConditional::Gaussian { mean, cov_sqrt } = &class.conditional else {
            return Err(Error::UnsupportedFamily(
                "perturb_gaussians requires all-Gaussian conditionals".into(),
            ));
        };
        let new_mean: Vec<f64> = mean
            .iter()
            .map(|m| m + mean_shift_scale * rng.normal())
            .collect();
        let new_sqrt = if cov_shift_scale > 0.0 {
            let d = cov_sqrt.rows();
            let mut raw = Mat::zeros(d, d);
            for i in 0..d {
                for j in 0..d {
                    raw[(i, j)] = rng.normal();
                }
            }
            let sym = raw.symmetrize();
            let norm = spectral_norm_sym(&sym)?;
            let perturbation = if norm > 0.0 {
                sym.scale(cov_shift_scale / norm)
            } else {
                sym
            };
            psd_project(&cov_sqrt.add(&perturbation))?
        } else {
            cov_sqrt.clone()
        };
        classes.push(ClassSpec {
            label: class.label,
            weight: class.weight,
            conditional: ClassConditional::Gaussian {
                mean: new_mean,
                cov_sqrt: new_sqrt,
            },
        });
    }
    LabeledDistribution::new(classes, dist.metric)
}

/// Per-class mixture p·D + (1−p)·D̃ with matching labels and weights.
pub fn mixture(
    d: &LabeledDistribution,
    d_tilde: &LabeledDistribution,
    p: f64,
) -> Result<LabeledDistribution> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Argument("mixture: p in [0,1]".into()));
    }
    if d.classes.len() != d_tilde.classes.len() || d.dim() != d_tilde.dim() {
        return Err(Error::Incompatible(
            "mixture: distributions must share labels, weights, and dimension".into(),
        ));
    }
    let mut classes = Vec::with_capacity(d.classes.len());
    for (a, b) in d.classes.iter().zip(&d_tilde.classes) {
        if a.label != b.label || (a.weight - b.weight).abs() > 1e-12 {
            return Err(Error::Incompatible(
                "mixture: class labels/weights must match".into(),
            ));
        }
        classes.push(ClassSpec {
            label: a.label,
            weight: a.weight,
            conditional: ClassConditional::Mixture {
                p,
                primary: Box::new(a.conditional.clone()),
                secondary: Box::new(b.conditional.clone()),
            },
        });
    }
    LabeledDistribution::new(classes, d.metric)
}

/// The tightness construction: each sample moves the fraction `alpha` of
/// the way to its nearest adversarial point under the linear classifier,
/// keeping its label. L2 only; the projection is exact there.
pub fn adversarial_shift(
    d: &LabeledDistribution,
    h: &LinearClassifier,
    alpha: f64,
) -> Result<LabeledDistribution> {
    if d.metric != Norm::L2 {
        return Err(Error::UnsupportedFamily(
            "adversarial_shift supports the L2 metric only".into(),
        ));
    }
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::Argument("adversarial_shift: alpha in [0,1]".into()));
    }
    let classes = d
        .classes
        .iter()
        .map(|c| ClassSpec {
            label: c.label,
            weight: c.weight,
            conditional: ClassConditional::AdversarialShift {
                base: Box::new(c.conditional.clone()),
                classifier: h.clone(),
                label: c.label,
                alpha,
            },
        })
        .collect();
    LabeledDistribution::new(classes, d.metric)
}

/// Isotropic Gaussian classes at the given means, all with covariance
/// `sigma²·I` and equal weights.
pub fn isotropic_gaussians(
    means: Vec<Vec<f64>>,
    sigma: f64,
    metric: Norm,
) -> Result<LabeledDistribution> {
    let d = means.first().map_or(0, |m| m.len());
    LabeledDistribution::uniform_weights(
        means
            .into_iter()
            .enumerate()
            .map(|(label, mean)| {
                (
                    label,
                    ClassConditional::Gaussian {
                        mean,
                        cov_sqrt: Mat::identity(d).scale(sigma),
                    },
                )
            })
            .collect(),
        metric,
    )
}
