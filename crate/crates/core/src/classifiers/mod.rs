//! Small differentiable classifiers with exact analytic gradients.
//!
//! [`Mlp`] is a fully connected ReLU network that serves as the robust
//! classifier, the discriminator, and (with no hidden layers) a multi-class
//! linear model. [`LinearClassifier`] is the binary linear model whose
//! closed-form margins make it the exactness oracle for tightness and
//! certification checks.

mod io;
mod train;

pub use train::{sgd_train, LossTrace, TrainConfig};

use crate::numerics::{Mat, Norm, Rng};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// Hidden-layer activation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    /// max(0, x); subgradient at 0 taken as 0.
    Relu,
}

/// Anything that maps inputs to logits. Implementations must be pure so
/// concurrent inference is safe.
pub trait Classifier: Sync {
    fn input_dim(&self) -> usize;
    fn num_classes(&self) -> usize;
    /// Raw logits; softmax is applied downstream, never here.
    fn forward(&self, x: &[f64]) -> Vec<f64>;
    /// Gradient of `loss_ce(forward(x), y)` with respect to the input.
    fn input_grad_ce(&self, x: &[f64], y: usize) -> Vec<f64>;

    fn predict(&self, x: &[f64]) -> usize {
        argmax(&self.forward(x))
    }
}

/// Index of the largest entry, lowest index on ties.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate().skip(1) {
        if x > v[best] {
            best = i;
        }
    }
    best
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let exps: Vec<f64> = logits.iter().map(|l| (l - m).exp()).collect();
    let z: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / z).collect()
}

pub fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let z: f64 = logits.iter().map(|l| (l - m).exp()).sum();
    let lz = z.ln() + m;
    logits.iter().map(|l| l - lz).collect()
}

/// Cross-entropy −log softmax(logits)[y], computed with max subtraction.
pub fn loss_ce(logits: &[f64], y: usize) -> f64 {
    assert!(y < logits.len(), "label {y} out of range");
    let m = logits.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let z: f64 = logits.iter().map(|l| (l - m).exp()).sum();
    z.ln() + m - logits[y]
}

/// KL(softmax(p_logits) ‖ softmax(q_logits)), clamped at 0 against
/// floating-point noise.
pub fn loss_kl(p_logits: &[f64], q_logits: &[f64]) -> f64 {
    assert_eq!(p_logits.len(), q_logits.len());
    let lp = log_softmax(p_logits);
    let lq = log_softmax(q_logits);
    let kl: f64 = lp.iter().zip(&lq).map(|(&a, &b)| a.exp() * (a - b)).sum();
    kl.max(0.0)
}

/// Fully connected network. `dims` lists the input, hidden, and logit
/// widths; with `dims = [in, out]` the model is multi-class linear.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    dims: Vec<usize>,
    /// weights[l] has shape dims[l+1] x dims[l].
    weights: Vec<Mat>,
    biases: Vec<Vec<f64>>,
    activation: Activation,
    seed: u64,
}

struct ForwardTrace {
    /// activations[0] is the input; activations[l+1] the output of layer l
    /// (post-activation for hidden layers, raw logits for the last).
    activations: Vec<Vec<f64>>,
}

impl Mlp {
    /// Seeded Glorot-uniform initialization: each layer uniform in
    /// ±√(6 / (fan_in + fan_out)).
    pub fn new(dims: &[usize], activation: Activation, seed: u64) -> Result<Self> {
        if dims.len() < 2 || dims.iter().any(|&d| d == 0) {
            return Err(Error::Argument(
                "Mlp needs at least input and output dims, all nonzero".into(),
            ));
        }
        let mut rng = Rng::new(seed);
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for l in 0..dims.len() - 1 {
            let (fan_in, fan_out) = (dims[l], dims[l + 1]);
            let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let mut w = Mat::zeros(fan_out, fan_in);
            for i in 0..fan_out {
                for j in 0..fan_in {
                    w[(i, j)] = (2.0 * rng.uniform() - 1.0) * bound;
                }
            }
            weights.push(w);
            biases.push(vec![0.0; fan_out]);
        }
        Ok(Mlp {
            dims: dims.to_vec(),
            weights,
            biases,
            activation,
            seed,
        })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    fn layer_count(&self) -> usize {
        self.weights.len()
    }

    fn forward_trace(&self, x: &[f64]) -> ForwardTrace {
        assert_eq!(x.len(), self.dims[0], "input dimension mismatch");
        let mut activations = Vec::with_capacity(self.layer_count() + 1);
        activations.push(x.to_vec());
        for l in 0..self.layer_count() {
            let mut z = self.weights[l].matvec(activations.last().unwrap());
            for (zi, bi) in z.iter_mut().zip(&self.biases[l]) {
                *zi += bi;
            }
            if l + 1 < self.layer_count() {
                match self.activation {
                    Activation::Relu => {
                        for zi in z.iter_mut() {
                            if *zi < 0.0 {
                                *zi = 0.0;
                            }
                        }
                    }
                }
            }
            activations.push(z);
        }
        ForwardTrace { activations }
    }

    /// Backpropagates `dL/dlogits`, accumulating parameter gradients into
    /// `bundle` (scaled by `scale`) and returning the input gradient.
    fn backward(
        &self,
        trace: &ForwardTrace,
        logit_grad: &[f64],
        bundle: Option<(&mut GradBundle, f64)>,
    ) -> Vec<f64> {
        let mut delta = logit_grad.to_vec();
        let mut bundle = bundle;
        for l in (0..self.layer_count()).rev() {
            let input = &trace.activations[l];
            if let Some((b, scale)) = bundle.as_mut() {
                let gw = &mut b.weights[l];
                for i in 0..delta.len() {
                    let di = delta[i] * *scale;
                    if di != 0.0 {
                        for j in 0..input.len() {
                            gw[(i, j)] += di * input[j];
                        }
                    }
                    b.biases[l][i] += di;
                }
            }
            // delta for the previous layer: Wᵀ·delta gated by the activation.
            let mut prev = vec![0.0; input.len()];
            for i in 0..delta.len() {
                let di = delta[i];
                if di != 0.0 {
                    let row = self.weights[l].row(i);
                    for j in 0..prev.len() {
                        prev[j] += row[j] * di;
                    }
                }
            }
            if l > 0 {
                match self.activation {
                    Activation::Relu => {
                        for (p, &a) in prev.iter_mut().zip(&trace.activations[l]) {
                            if a <= 0.0 {
                                *p = 0.0;
                            }
                        }
                    }
                }
            }
            delta = prev;
        }
        delta
    }

    pub fn param_count(&self) -> usize {
        self.weights
            .iter()
            .map(|w| w.rows() * w.cols())
            .sum::<usize>()
            + self.biases.iter().map(|b| b.len()).sum::<usize>()
    }

    pub fn get_param(&self, index: usize) -> f64 {
        let (kind, l, i) = self.locate(index);
        match kind {
            ParamKind::Weight => self.weights[l].data()[i],
            ParamKind::Bias => self.biases[l][i],
        }
    }

    pub fn set_param(&mut self, index: usize, value: f64) {
        let (kind, l, i) = self.locate(index);
        match kind {
            ParamKind::Weight => {
                let cols = self.weights[l].cols();
                self.weights[l][(i / cols, i % cols)] = value;
            }
            ParamKind::Bias => self.biases[l][i] = value,
        }
    }

    /// Human-readable location of a flat parameter index, e.g.
    /// `layer1.weight[3][0]`.
    pub fn param_path(&self, index: usize) -> String {
        let (kind, l, i) = self.locate(index);
        match kind {
            ParamKind::Weight => {
                let cols = self.weights[l].cols();
                format!("layer{l}.weight[{}][{}]", i / cols, i % cols)
            }
            ParamKind::Bias => format!("layer{l}.bias[{i}]"),
        }
    }

    fn locate(&self, mut index: usize) -> (ParamKind, usize, usize) {
        for l in 0..self.layer_count() {
            let wn = self.weights[l].rows() * self.weights[l].cols();
            if index < wn {
                return (ParamKind::Weight, l, index);
            }
            index -= wn;
            if index < self.biases[l].len() {
                return (ParamKind::Bias, l, index);
            }
            index -= self.biases[l].len();
        }
        panic!("parameter index out of range");
    }

    pub(crate) fn apply_update(&mut self, grads: &GradBundle, lr: f64, decay: f64) {
        for l in 0..self.layer_count() {
            let g = &grads.weights[l];
            let w = &mut self.weights[l];
            for i in 0..w.rows() {
                for j in 0..w.cols() {
                    w[(i, j)] = (1.0 - decay) * w[(i, j)] - lr * g[(i, j)];
                }
            }
            for (b, gb) in self.biases[l].iter_mut().zip(&grads.biases[l]) {
                *b = (1.0 - decay) * *b - lr * gb;
            }
        }
    }

    pub fn params_finite(&self) -> bool {
        self.weights
            .iter()
            .all(|w| w.data().iter().all(|v| v.is_finite()))
            && self.biases.iter().all(|b| b.iter().all(|v| v.is_finite()))
    }
}

enum ParamKind {
    Weight,
    Bias,
}

impl Classifier for Mlp {
    fn input_dim(&self) -> usize {
        self.dims[0]
    }

    fn num_classes(&self) -> usize {
        *self.dims.last().unwrap()
    }

    fn forward(&self, x: &[f64]) -> Vec<f64> {
        self.forward_trace(x).activations.pop().unwrap()
    }

    fn input_grad_ce(&self, x: &[f64], y: usize) -> Vec<f64> {
        input_grad(self, x, &PointLoss::CrossEntropy { label: y })
    }
}

/// Per-parameter gradients mirroring an [`Mlp`]'s shape, plus the scalar
/// loss they came from.
#[derive(Debug, Clone)]
pub struct GradBundle {
    pub weights: Vec<Mat>,
    pub biases: Vec<Vec<f64>>,
    pub loss: f64,
}

impl GradBundle {
    /// self += factor · other, combining losses the same way.
    pub fn add_scaled(&mut self, other: &GradBundle, factor: f64) {
        for (w, ow) in self.weights.iter_mut().zip(&other.weights) {
            for i in 0..w.rows() {
                for j in 0..w.cols() {
                    w[(i, j)] += factor * ow[(i, j)];
                }
            }
        }
        for (b, ob) in self.biases.iter_mut().zip(&other.biases) {
            for (x, y) in b.iter_mut().zip(ob) {
                *x += factor * y;
            }
        }
        self.loss += factor * other.loss;
    }

    pub fn zeros_like(model: &Mlp) -> Self {
        GradBundle {
            weights: model
                .weights
                .iter()
                .map(|w| Mat::zeros(w.rows(), w.cols()))
                .collect(),
            biases: model.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
            loss: 0.0,
        }
    }

    pub fn get(&self, model: &Mlp, index: usize) -> f64 {
        let (kind, l, i) = model.locate(index);
        match kind {
            ParamKind::Weight => self.weights[l].data()[i],
            ParamKind::Bias => self.biases[l][i],
        }
    }
}

/// Loss attached to a whole batch.
pub enum BatchLoss<'a> {
    CrossEntropy,
    /// KL(softmax(reference) ‖ softmax(f(x))) with the reference fixed.
    KlToReference { reference_logits: &'a [Vec<f64>] },
}

/// Loss attached to a single point, for input gradients.
pub enum PointLoss<'a> {
    CrossEntropy { label: usize },
    KlToReference { reference_logits: &'a [f64] },
}

fn point_logit_grad(logits: &[f64], loss: &PointLoss) -> (f64, Vec<f64>) {
    match loss {
        PointLoss::CrossEntropy { label } => {
            let value = loss_ce(logits, *label);
            let mut g = softmax(logits);
            g[*label] -= 1.0;
            (value, g)
        }
        PointLoss::KlToReference { reference_logits } => {
            let value = loss_kl(reference_logits, logits);
            let p = softmax(reference_logits);
            let q = softmax(logits);
            let g = q.iter().zip(&p).map(|(qi, pi)| qi - pi).collect();
            (value, g)
        }
    }
}

/// Exact analytic gradient of the mean batch loss over all parameters.
pub fn grad_batch(
    model: &Mlp,
    points: &[Vec<f64>],
    labels: &[usize],
    loss: &BatchLoss,
) -> GradBundle {
    assert!(!points.is_empty(), "grad_batch: empty batch");
    let mut bundle = GradBundle::zeros_like(model);
    let scale = 1.0 / points.len() as f64;
    for (i, x) in points.iter().enumerate() {
        let trace = model.forward_trace(x);
        let logits = trace.activations.last().unwrap();
        let point_loss = match loss {
            BatchLoss::CrossEntropy => PointLoss::CrossEntropy { label: labels[i] },
            BatchLoss::KlToReference { reference_logits } => PointLoss::KlToReference {
                reference_logits: &reference_logits[i],
            },
        };
        let (value, logit_grad) = point_logit_grad(logits, &point_loss);
        bundle.loss += value * scale;
        model.backward(&trace, &logit_grad, Some((&mut bundle, scale)));
    }
    bundle
}

/// Exact gradient of a point loss with respect to the input.
pub fn input_grad(model: &Mlp, x: &[f64], loss: &PointLoss) -> Vec<f64> {
    let trace = model.forward_trace(x);
    let logits = trace.activations.last().unwrap();
    let (_, logit_grad) = point_logit_grad(logits, loss);
    model.backward(&trace, &logit_grad, None)
}

/// Gradient of the stability objective
/// `mean_i [ CE(f(xᵢ), yᵢ) + beta · KL(f(xᵢ) ‖ f(xᵢ + δᵢ)) ]`
/// through both forward passes. Also returns the mean raw KL term.
pub fn grad_stability_batch(
    model: &Mlp,
    points: &[Vec<f64>],
    noisy_points: &[Vec<f64>],
    labels: &[usize],
    beta: f64,
) -> (GradBundle, f64) {
    assert_eq!(points.len(), noisy_points.len());
    let mut bundle = GradBundle::zeros_like(model);
    let scale = 1.0 / points.len() as f64;
    let mut kl_mean = 0.0;
    for i in 0..points.len() {
        let clean = model.forward_trace(&points[i]);
        let a = clean.activations.last().unwrap().clone();
        let p = softmax(&a);
        let lp = log_softmax(&a);

        let ce = loss_ce(&a, labels[i]);
        let mut grad_a = softmax(&a);
        grad_a[labels[i]] -= 1.0;

        if beta != 0.0 {
            let noisy = model.forward_trace(&noisy_points[i]);
            let b = noisy.activations.last().unwrap().clone();
            let q = softmax(&b);
            let lq = log_softmax(&b);
            let kl = loss_kl(&a, &b);
            kl_mean += kl * scale;
            bundle.loss += (ce + beta * kl) * scale;
            // dKL/da_j = p_j ((lp_j − lq_j) − KL); dKL/db = q − p.
            for j in 0..grad_a.len() {
                grad_a[j] += beta * p[j] * ((lp[j] - lq[j]) - kl);
            }
            let grad_b: Vec<f64> = q.iter().zip(&p).map(|(qj, pj)| beta * (qj - pj)).collect();
            model.backward(&noisy, &grad_b, Some((&mut bundle, scale)));
        } else {
            bundle.loss += ce * scale;
        }
        model.backward(&clean, &grad_a, Some((&mut bundle, scale)));
    }
    (bundle, kl_mean)
}

/// Binary linear classifier `x ↦ [h(x) = 1 ⟺ w·x + b > 0]`.
///
/// Its closed-form margins and boundary projections make it the exactness
/// oracle wherever attack-based estimates need independent ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearClassifier {
    pub w: Vec<f64>,
    pub b: f64,
}

impl LinearClassifier {
    pub fn new(w: Vec<f64>, b: f64) -> Result<Self> {
        if w.iter().all(|&v| v == 0.0) {
            return Err(Error::Argument(
                "LinearClassifier requires a nonzero weight vector".into(),
            ));
        }
        Ok(LinearClassifier { w, b })
    }

    /// Signed score w·x + b.
    pub fn decision(&self, x: &[f64]) -> f64 {
        self.w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + self.b
    }

    /// Exact distance to the decision boundary in the given norm
    /// (|w·x + b| divided by the dual norm of w).
    pub fn margin(&self, x: &[f64], norm: Norm) -> f64 {
        let dual = match norm {
            Norm::L2 => Norm::L2.len(&self.w),
            Norm::Linf => self.w.iter().map(|v| v.abs()).sum::<f64>(),
        };
        self.decision(x).abs() / dual
    }

    /// Orthogonal projection of x onto the decision boundary (the nearest
    /// point in L2 whose prediction differs, in the infimum sense).
    pub fn project_to_boundary(&self, x: &[f64]) -> Vec<f64> {
        let s = self.decision(x);
        let wn2: f64 = self.w.iter().map(|v| v * v).sum();
        x.iter()
            .zip(&self.w)
            .map(|(xi, wi)| xi - s * wi / wn2)
            .collect()
    }
}

impl Classifier for LinearClassifier {
    fn input_dim(&self) -> usize {
        self.w.len()
    }

    fn num_classes(&self) -> usize {
        2
    }

    fn forward(&self, x: &[f64]) -> Vec<f64> {
        vec![0.0, self.decision(x)]
    }

    fn input_grad_ce(&self, x: &[f64], y: usize) -> Vec<f64> {
        // p(class 1) = sigmoid(decision); dCE/ds = p − 1{y=1}.
        let s = self.decision(x);
        let p = 1.0 / (1.0 + (-s).exp());
        let coeff = p - if y == 1 { 1.0 } else { 0.0 };
        self.w.iter().map(|wi| coeff * wi).collect()
    }
}
