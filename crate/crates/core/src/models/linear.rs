//! From-scratch linear models: logistic regression (binary and multinomial),
//! linear soft-margin SVM (one-vs-rest), and ridge-stabilized linear
//! regression for dilution percentage. All three train by mini-batch
//! gradient descent from zero initialization, so training is deterministic
//! given a seed, and every objective here has a matching analytic gradient
//! that finite differences can verify.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{argmax_tie_low, TrainOptions, TrainingMeta};
use crate::preprocess::FeatureSource;
use crate::rng::Stream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LinearKind {
    Logreg,
    Svm,
    Linreg,
}

impl LinearKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            LinearKind::Logreg => "logreg",
            LinearKind::Svm => "svm",
            LinearKind::Linreg => "linreg",
        }
    }
}

/// A trained linear model. `weights` holds `n_outputs` rows of
/// `feature_dim` coefficients; binary classifiers and the regressor use a
/// single row.
#[derive(Debug, Clone)]
pub struct LinearModel {
    pub kind: LinearKind,
    pub n_outputs: usize,
    pub feature_dim: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub label_set: Vec<String>,
    pub normalize_pixels: bool,
    pub hyper: TrainOptions,
    pub training: TrainingMeta,
}

impl LinearModel {
    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.feature_dim {
            return Err(Error::shape(
                format!("{} features", self.feature_dim),
                format!("{}", x.len()),
            ));
        }
        Ok(())
    }

    fn row(&self, output: usize) -> &[f64] {
        &self.weights[output * self.feature_dim..(output + 1) * self.feature_dim]
    }

    /// Raw affine outputs, one per model row.
    fn raw_outputs(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n_outputs)
            .map(|k| dot(self.row(k), x) + self.bias[k])
            .collect()
    }

    /// Per-class decision scores. Binary classifiers report
    /// `[0, w·x + b]`: class 0 is the reference, so the raw score is the
    /// margin of class 1 and `argmax` with low-index ties gives the usual
    /// sign rule.
    pub fn decision_scores(&self, x: &[f64]) -> Result<Vec<f64>> {
        if self.kind == LinearKind::Linreg {
            return Err(Error::input("decision scores are undefined for linreg"));
        }
        self.check_input(x)?;
        let raw = self.raw_outputs(x);
        if self.label_set.len() == 2 && self.n_outputs == 1 {
            Ok(vec![0.0, raw[0]])
        } else {
            Ok(raw)
        }
    }

    /// Signed score of the positive class for binary models (the value whose
    /// sign classifies and whose magnitude is the margin).
    pub fn binary_score(&self, x: &[f64]) -> Result<f64> {
        if self.n_outputs != 1 || self.kind == LinearKind::Linreg {
            return Err(Error::input("binary_score needs a binary classifier"));
        }
        self.check_input(x)?;
        Ok(dot(self.row(0), x) + self.bias[0])
    }

    /// Class probability distribution (logistic models).
    pub fn predict_proba(&self, x: &[f64]) -> Result<Vec<f64>> {
        if self.kind != LinearKind::Logreg {
            return Err(Error::input(format!(
                "predict_proba is for logistic models, not {}",
                self.kind.as_str()
            )));
        }
        self.check_input(x)?;
        let raw = self.raw_outputs(x);
        if self.n_outputs == 1 {
            let p = sigmoid(raw[0]);
            Ok(vec![1.0 - p, p])
        } else {
            Ok(softmax(&raw))
        }
    }

    /// Predicted class index: argmax of scores or probabilities, ties to
    /// the lowest index.
    pub fn predict_class(&self, x: &[f64]) -> Result<usize> {
        match self.kind {
            LinearKind::Linreg => Err(Error::input("predict_class is undefined for linreg")),
            LinearKind::Logreg => Ok(argmax_tie_low(&self.predict_proba(x)?)),
            LinearKind::Svm => Ok(argmax_tie_low(&self.decision_scores(x)?)),
        }
    }

    /// Dilution prediction in percent, clamped to [0, 100]; the flag reports
    /// whether the clamp engaged.
    pub fn predict_dilution(&self, x: &[f64]) -> Result<(f64, bool)> {
        if self.kind != LinearKind::Linreg {
            return Err(Error::input("predict_dilution needs a linreg model"));
        }
        self.check_input(x)?;
        let raw = dot(self.row(0), x) + self.bias[0];
        let clamped = raw.clamp(0.0, 100.0);
        Ok((clamped, clamped != raw))
    }
}

#[inline]
fn sigmoid(s: f64) -> f64 {
    1.0 / (1.0 + (-s).exp())
}

/// Numerically stable binary cross-entropy of logit `s` against y ∈ {0, 1}.
#[inline]
fn bce_loss(s: f64, y: f64) -> f64 {
    s.max(0.0) - s * y + (-s.abs()).exp().ln_1p()
}

/// Max-subtracted softmax; invariant under adding a constant to all scores.
fn softmax(scores: &[f64]) -> Vec<f64> {
    let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|&s| (s - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 8];
    let chunks = a.len() / 8;
    for i in 0..chunks {
        let pa = &a[i * 8..i * 8 + 8];
        let pb = &b[i * 8..i * 8 + 8];
        for lane in 0..8 {
            acc[lane] += pa[lane] * pb[lane];
        }
    }
    let mut tail = 0.0;
    for i in chunks * 8..a.len() {
        tail += a[i] * b[i];
    }
    (((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7]))) + tail
}

/// Objective and gradient of multinomial/binary cross-entropy over `rows`,
/// including the L2 term: `mean CE + l2·Σw²`. Returns (loss, dW, db).
pub fn logreg_loss_grad<F: FeatureSource>(
    x: &F,
    labels: &[usize],
    rows: &[usize],
    weights: &[f64],
    bias: &[f64],
    l2: f64,
) -> (f64, Vec<f64>, Vec<f64>) {
    let outputs = bias.len();
    let dim = x.dim();
    let inv = 1.0 / rows.len() as f64;
    let mut grad_w = vec![0.0; weights.len()];
    let mut grad_b = vec![0.0; outputs];
    let mut loss = 0.0;

    if outputs == 1 {
        for &row in rows {
            let s = x.dot(row, weights) + bias[0];
            let y = labels[row] as f64;
            loss += bce_loss(s, y) * inv;
            let coef = (sigmoid(s) - y) * inv;
            x.axpy(row, coef, &mut grad_w);
            grad_b[0] += coef;
        }
    } else {
        let mut scores = vec![0.0; outputs];
        for &row in rows {
            for k in 0..outputs {
                scores[k] = x.dot(row, &weights[k * dim..(k + 1) * dim]) + bias[k];
            }
            let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + scores.iter().map(|&s| (s - max).exp()).sum::<f64>().ln();
            loss += (lse - scores[labels[row]]) * inv;
            for k in 0..outputs {
                let p = (scores[k] - lse).exp();
                let coef = (p - if labels[row] == k { 1.0 } else { 0.0 }) * inv;
                x.axpy(row, coef, &mut grad_w[k * dim..(k + 1) * dim]);
                grad_b[k] += coef;
            }
        }
    }
    add_l2(&mut loss, &mut grad_w, weights, l2);
    (loss, grad_w, grad_b)
}

/// Loss-only evaluation of the logistic objective.
pub fn logreg_loss<F: FeatureSource>(
    x: &F,
    labels: &[usize],
    rows: &[usize],
    weights: &[f64],
    bias: &[f64],
    l2: f64,
) -> f64 {
    let outputs = bias.len();
    let dim = x.dim();
    let inv = 1.0 / rows.len() as f64;
    let mut loss = 0.0;
    if outputs == 1 {
        for &row in rows {
            let s = x.dot(row, weights) + bias[0];
            loss += bce_loss(s, labels[row] as f64) * inv;
        }
    } else {
        let mut scores = vec![0.0; outputs];
        for &row in rows {
            for k in 0..outputs {
                scores[k] = x.dot(row, &weights[k * dim..(k + 1) * dim]) + bias[k];
            }
            let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + scores.iter().map(|&s| (s - max).exp()).sum::<f64>().ln();
            loss += (lse - scores[labels[row]]) * inv;
        }
    }
    loss + l2 * weights.iter().map(|w| w * w).sum::<f64>()
}

/// Objective and subgradient of the soft-margin SVM over `rows`:
/// `Σ_classes mean hinge + l2·Σw²`, one-vs-rest for multiclass. The hinge
/// subgradient uses the strict rule `margin < 1`.
pub fn svm_loss_grad<F: FeatureSource>(
    x: &F,
    labels: &[usize],
    rows: &[usize],
    weights: &[f64],
    bias: &[f64],
    l2: f64,
) -> (f64, Vec<f64>, Vec<f64>) {
    let outputs = bias.len();
    let dim = x.dim();
    let inv = 1.0 / rows.len() as f64;
    let mut grad_w = vec![0.0; weights.len()];
    let mut grad_b = vec![0.0; outputs];
    let mut loss = 0.0;

    for &row in rows {
        for k in 0..outputs {
            let w_k = &weights[k * dim..(k + 1) * dim];
            let s = x.dot(row, w_k) + bias[k];
            let y = target_pm1(labels[row], k, outputs);
            let margin = y * s;
            if margin < 1.0 {
                loss += (1.0 - margin) * inv;
                x.axpy(row, -y * inv, &mut grad_w[k * dim..(k + 1) * dim]);
                grad_b[k] -= y * inv;
            }
        }
    }
    add_l2(&mut loss, &mut grad_w, weights, l2);
    (loss, grad_w, grad_b)
}

pub fn svm_loss<F: FeatureSource>(
    x: &F,
    labels: &[usize],
    rows: &[usize],
    weights: &[f64],
    bias: &[f64],
    l2: f64,
) -> f64 {
    let outputs = bias.len();
    let dim = x.dim();
    let inv = 1.0 / rows.len() as f64;
    let mut loss = 0.0;
    for &row in rows {
        for k in 0..outputs {
            let s = x.dot(row, &weights[k * dim..(k + 1) * dim]) + bias[k];
            let margin = target_pm1(labels[row], k, outputs) * s;
            if margin < 1.0 {
                loss += (1.0 - margin) * inv;
            }
        }
    }
    loss + l2 * weights.iter().map(|w| w * w).sum::<f64>()
}

/// ±1 target of output `k`: binary models use a single row with class 1 as
/// positive, one-vs-rest models make each class its own positive.
#[inline]
fn target_pm1(label: usize, k: usize, outputs: usize) -> f64 {
    let positive = if outputs == 1 { label == 1 } else { label == k };
    if positive {
        1.0
    } else {
        -1.0
    }
}

/// Objective and gradient of ridge-stabilized least squares over `rows`:
/// `mean (w·x + b − y)² + l2·Σw²`.
pub fn linreg_loss_grad<F: FeatureSource>(
    x: &F,
    targets: &[f64],
    rows: &[usize],
    weights: &[f64],
    bias: &[f64],
    l2: f64,
) -> (f64, Vec<f64>, Vec<f64>) {
    let inv = 1.0 / rows.len() as f64;
    let mut grad_w = vec![0.0; weights.len()];
    let mut grad_b = vec![0.0; 1];
    let mut loss = 0.0;
    for &row in rows {
        let err = x.dot(row, weights) + bias[0] - targets[row];
        loss += err * err * inv;
        let coef = 2.0 * err * inv;
        x.axpy(row, coef, &mut grad_w);
        grad_b[0] += coef;
    }
    add_l2(&mut loss, &mut grad_w, weights, l2);
    (loss, grad_w, grad_b)
}

pub fn linreg_loss<F: FeatureSource>(
    x: &F,
    targets: &[f64],
    rows: &[usize],
    weights: &[f64],
    bias: &[f64],
    l2: f64,
) -> f64 {
    let inv = 1.0 / rows.len() as f64;
    let mut loss = 0.0;
    for &row in rows {
        let err = x.dot(row, weights) + bias[0] - targets[row];
        loss += err * err * inv;
    }
    loss + l2 * weights.iter().map(|w| w * w).sum::<f64>()
}

fn add_l2(loss: &mut f64, grad_w: &mut [f64], weights: &[f64], l2: f64) {
    if l2 == 0.0 {
        return;
    }
    let mut penalty = 0.0;
    for (g, &w) in grad_w.iter_mut().zip(weights) {
        penalty += w * w;
        *g += 2.0 * l2 * w;
    }
    *loss += l2 * penalty;
}

/// The shared training loop: zero initialization, seeded epoch shuffles,
/// fixed-step updates, post-epoch full-set loss. Divergence (non-finite
/// loss) aborts with the 1-based epoch index.
fn descend<F: FeatureSource>(
    x: &F,
    n_outputs: usize,
    opts: &TrainOptions,
    loss_grad: impl Fn(&F, &[usize], &[f64], &[f64]) -> (f64, Vec<f64>, Vec<f64>),
    full_loss: impl Fn(&F, &[f64], &[f64]) -> f64,
) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    opts.validate()?;
    let dim = x.dim();
    let mut weights = vec![0.0; n_outputs * dim];
    let mut bias = vec![0.0; n_outputs];

    let mut rng = Stream::from_seed(opts.seed);
    let mut order: Vec<usize> = (0..x.count()).collect();
    let mut losses = Vec::with_capacity(opts.epochs);

    for epoch in 0..opts.epochs {
        rng.shuffle(&mut order);
        for batch in order.chunks(opts.batch_size) {
            let (_, grad_w, grad_b) = loss_grad(x, batch, &weights, &bias);
            for (w, g) in weights.iter_mut().zip(&grad_w) {
                *w -= opts.learning_rate * g;
            }
            for (b, g) in bias.iter_mut().zip(&grad_b) {
                *b -= opts.learning_rate * g;
            }
        }
        let loss = full_loss(x, &weights, &bias);
        if !loss.is_finite() {
            return Err(Error::Divergence { epoch: epoch + 1 });
        }
        losses.push(loss);
    }
    Ok((weights, bias, losses))
}

fn check_classification_inputs<F: FeatureSource>(
    x: &F,
    labels: &[usize],
    label_set: &[String],
) -> Result<()> {
    if x.count() == 0 || labels.len() != x.count() {
        return Err(Error::config(format!(
            "feature count {} does not match label count {}",
            x.count(),
            labels.len()
        )));
    }
    if label_set.len() < 2 {
        return Err(Error::config(
            "classification needs at least 2 classes in the label set",
        ));
    }
    let mut present = vec![false; label_set.len()];
    for &label in labels {
        if label >= label_set.len() {
            return Err(Error::config(format!(
                "label index {label} outside label set of {}",
                label_set.len()
            )));
        }
        present[label] = true;
    }
    if present.iter().any(|&p| !p) {
        return Err(Error::config("every class needs at least one sample"));
    }
    Ok(())
}

/// Train a logistic regression classifier: binary sigmoid for two classes,
/// multinomial softmax otherwise. Returns the model and the per-epoch
/// full-training-set loss curve.
pub fn train_logreg<F: FeatureSource>(
    x: &F,
    labels: &[usize],
    label_set: &[String],
    normalize_pixels: bool,
    opts: &TrainOptions,
) -> Result<(LinearModel, Vec<f64>)> {
    check_classification_inputs(x, labels, label_set)?;
    let n_outputs = if label_set.len() == 2 { 1 } else { label_set.len() };
    let (weights, bias, losses) = descend(
        x,
        n_outputs,
        opts,
        |x, rows, w, b| logreg_loss_grad(x, labels, rows, w, b, opts.l2),
        |x, w, b| logreg_loss(x, labels, &all_rows(x), w, b, opts.l2),
    )?;
    let model = LinearModel {
        kind: LinearKind::Logreg,
        n_outputs,
        feature_dim: x.dim(),
        weights,
        bias,
        label_set: label_set.to_vec(),
        normalize_pixels,
        hyper: *opts,
        training: TrainingMeta {
            final_train_loss: *losses.last().expect("epochs >= 1"),
            epochs_run: losses.len(),
            timestamp: None,
        },
    };
    Ok((model, losses))
}

/// Train a linear soft-margin SVM by subgradient descent, one-vs-rest for
/// multiclass.
pub fn train_svm<F: FeatureSource>(
    x: &F,
    labels: &[usize],
    label_set: &[String],
    normalize_pixels: bool,
    opts: &TrainOptions,
) -> Result<(LinearModel, Vec<f64>)> {
    check_classification_inputs(x, labels, label_set)?;
    let n_outputs = if label_set.len() == 2 { 1 } else { label_set.len() };
    let (weights, bias, losses) = descend(
        x,
        n_outputs,
        opts,
        |x, rows, w, b| svm_loss_grad(x, labels, rows, w, b, opts.l2),
        |x, w, b| svm_loss(x, labels, &all_rows(x), w, b, opts.l2),
    )?;
    let model = LinearModel {
        kind: LinearKind::Svm,
        n_outputs,
        feature_dim: x.dim(),
        weights,
        bias,
        label_set: label_set.to_vec(),
        normalize_pixels,
        hyper: *opts,
        training: TrainingMeta {
            final_train_loss: *losses.last().expect("epochs >= 1"),
            epochs_run: losses.len(),
            timestamp: None,
        },
    };
    Ok((model, losses))
}

/// Fit the dilution regressor. Targets are percentages; training minimizes
/// mean squared error plus a small ridge term.
pub fn train_linreg<F: FeatureSource>(
    x: &F,
    targets: &[f64],
    normalize_pixels: bool,
    opts: &TrainOptions,
) -> Result<(LinearModel, Vec<f64>)> {
    if x.count() == 0 || targets.len() != x.count() {
        return Err(Error::config(format!(
            "feature count {} does not match target count {}",
            x.count(),
            targets.len()
        )));
    }
    let first = targets[0];
    if targets.iter().all(|&t| t == first) {
        return Err(Error::config(
            "regression needs at least 2 distinct target values",
        ));
    }
    let (weights, bias, losses) = descend(
        x,
        1,
        opts,
        |x, rows, w, b| linreg_loss_grad(x, targets, rows, w, b, opts.l2),
        |x, w, b| linreg_loss(x, targets, &all_rows(x), w, b, opts.l2),
    )?;
    let model = LinearModel {
        kind: LinearKind::Linreg,
        n_outputs: 1,
        feature_dim: x.dim(),
        weights,
        bias,
        label_set: Vec::new(),
        normalize_pixels,
        hyper: *opts,
        training: TrainingMeta {
            final_train_loss: *losses.last().expect("epochs >= 1"),
            epochs_run: losses.len(),
            timestamp: None,
        },
    };
    Ok((model, losses))
}

fn all_rows<F: FeatureSource>(x: &F) -> Vec<usize> {
    (0..x.count()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::preprocess::DenseFeatures;

    /// 1-D step toy: 50 copies of −1 → class 0 and +1 → class 1.
    fn step_toy() -> (DenseFeatures, Vec<usize>, Vec<String>) {
        let mut data = Vec::new();
        let mut labels = Vec::new();
        for _ in 0..50 {
            data.push(-1.0);
            labels.push(0);
            data.push(1.0);
            labels.push(1);
        }
        (
            DenseFeatures::new(1, data).unwrap(),
            labels,
            vec!["neg".into(), "pos".into()],
        )
    }

    fn training_accuracy(model: &LinearModel, x: &DenseFeatures, labels: &[usize]) -> f64 {
        let mut row = vec![0.0; x.dim()];
        let mut hits = 0;
        for i in 0..x.count() {
            x.copy_row(i, &mut row);
            if model.predict_class(&row).unwrap() == labels[i] {
                hits += 1;
            }
        }
        hits as f64 / x.count() as f64
    }

    #[test]
    fn logreg_separates_the_step_toy_within_100_epochs() {
        let (x, labels, label_set) = step_toy();
        let opts = TrainOptions {
            epochs: 100,
            ..TrainOptions::logreg_defaults()
        };
        let (model, losses) = train_logreg(&x, &labels, &label_set, true, &opts).unwrap();
        assert_eq!(training_accuracy(&model, &x, &labels), 1.0);
        assert_eq!(losses.len(), 100);
        let initial = logreg_loss(&x, &labels, &all_rows(&x), &vec![0.0; 1], &vec![0.0; 1], 0.0);
        assert!((initial - (2f64).ln()).abs() < 1e-12, "zero model loss is ln 2");
        assert!(losses.last().unwrap() <= &initial);
    }

    #[test]
    fn logreg_multiclass_reaches_the_toy_optimum() {
        // Three separable clusters on a line.
        let mut data = Vec::new();
        let mut labels = Vec::new();
        for i in 0..30 {
            let class = i % 3;
            data.push(class as f64 * 2.0 - 2.0);
            data.push(1.0); // constant second feature
            labels.push(class);
        }
        let x = DenseFeatures::new(2, data).unwrap();
        let label_set = vec!["a".into(), "b".into(), "c".into()];
        let opts = TrainOptions {
            epochs: 300,
            learning_rate: 0.5,
            ..TrainOptions::logreg_defaults()
        };
        let (model, _) = train_logreg(&x, &labels, &label_set, true, &opts).unwrap();
        assert_eq!(model.n_outputs, 3);
        assert_eq!(training_accuracy(&model, &x, &labels), 1.0);
    }

    #[test]
    fn zero_weight_probabilities_are_uniform() {
        let model = LinearModel {
            kind: LinearKind::Logreg,
            n_outputs: 1,
            feature_dim: 3,
            weights: vec![0.0; 3],
            bias: vec![0.0],
            label_set: vec!["a".into(), "b".into()],
            normalize_pixels: true,
            hyper: TrainOptions::logreg_defaults(),
            training: TrainingMeta::default(),
        };
        assert_eq!(model.predict_proba(&[1.0, 2.0, 3.0]).unwrap(), vec![0.5, 0.5]);

        let four = LinearModel {
            n_outputs: 4,
            feature_dim: 3,
            weights: vec![0.0; 12],
            bias: vec![0.0; 4],
            label_set: (0..4).map(|i| format!("c{i}")).collect(),
            ..model
        };
        let p = four.predict_proba(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(p, vec![0.25; 4]);
    }

    #[test]
    fn binary_probability_matches_the_closed_form() {
        let model = LinearModel {
            kind: LinearKind::Logreg,
            n_outputs: 1,
            feature_dim: 2,
            weights: vec![0.7, -1.3],
            bias: vec![0.25],
            label_set: vec!["a".into(), "b".into()],
            normalize_pixels: true,
            hyper: TrainOptions::logreg_defaults(),
            training: TrainingMeta::default(),
        };
        let x = [0.4, 1.1];
        let s = 0.7 * 0.4 - 1.3 * 1.1 + 0.25;
        let p = model.predict_proba(&x).unwrap();
        assert!((p[1] - 1.0 / (1.0 + (-s as f64).exp())).abs() < 1e-15);
        assert!((p[0] + p[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn softmax_sums_to_one_for_random_draws() {
        let mut rng = Stream::from_seed(77);
        for _ in 0..10_000 {
            let k = 2 + rng.next_index(6);
            let scores: Vec<f64> = (0..k).map(|_| (rng.next_f64() - 0.5) * 60.0).collect();
            let p = softmax(&scores);
            let sum: f64 = p.iter().sum();
            assert!((sum - 1.0).abs() < 1e-9, "softmax sum {sum}");
            assert!(p.iter().all(|&v| v >= 0.0));
        }
    }

    #[test]
    fn argmax_is_shift_invariant() {
        let mut rng = Stream::from_seed(78);
        for _ in 0..1000 {
            let k = 2 + rng.next_index(5);
            let scores: Vec<f64> = (0..k).map(|_| rng.next_f64() * 10.0).collect();
            let shift = (rng.next_f64() - 0.5) * 100.0;
            let shifted: Vec<f64> = scores.iter().map(|&s| s + shift).collect();
            assert_eq!(
                argmax_tie_low(&softmax(&scores)),
                argmax_tie_low(&softmax(&shifted))
            );
            assert_eq!(argmax_tie_low(&scores), argmax_tie_low(&shifted));
        }
    }

    #[test]
    fn svm_drives_hinge_loss_to_zero_on_the_step_toy() {
        let (x, labels, label_set) = step_toy();
        let opts = TrainOptions {
            epochs: 200,
            ..TrainOptions::svm_defaults()
        };
        let (model, losses) = train_svm(&x, &labels, &label_set, true, &opts).unwrap();
        let hinge = svm_loss(&x, &labels, &all_rows(&x), &model.weights, &model.bias, 0.0);
        assert!(hinge < 1e-3, "final mean hinge {hinge}");
        for i in 0..x.count() {
            let mut row = vec![0.0];
            x.copy_row(i, &mut row);
            let margin = target_pm1(labels[i], 0, 1) * model.binary_score(&row).unwrap();
            assert!(margin >= 0.999, "margin {margin} for item {i}");
        }
        assert!(losses.last().unwrap() < &1e-2);
    }

    #[test]
    fn svm_separates_random_separable_sets() {
        let mut rng = Stream::from_seed(91);
        for case in 0..10 {
            let dim = 1 + rng.next_index(5);
            let n = 20 + rng.next_index(181);
            let mut w_true: Vec<f64> = (0..dim).map(|_| rng.next_f64() * 2.0 - 1.0).collect();
            let norm = dot(&w_true, &w_true).sqrt().max(1e-3);
            for w in &mut w_true {
                *w /= norm;
            }
            let mut data = Vec::new();
            let mut labels = Vec::new();
            for _ in 0..n {
                let x: Vec<f64> = (0..dim).map(|_| rng.next_f64() * 4.0 - 2.0).collect();
                let margin = dot(&w_true, &x);
                // Push points a unit margin away from the separator so the
                // set is comfortably separable.
                let y = if margin >= 0.0 { 1usize } else { 0usize };
                let shift = if y == 1 { 1.0 } else { -1.0 };
                let x: Vec<f64> = x
                    .iter()
                    .zip(&w_true)
                    .map(|(&xi, &wi)| xi + shift * wi)
                    .collect();
                data.extend(x);
                labels.push(y);
            }
            if labels.iter().all(|&y| y == labels[0]) {
                continue;
            }
            let x = DenseFeatures::new(dim, data).unwrap();
            let label_set = vec!["n".into(), "p".into()];
            let opts = TrainOptions {
                epochs: 400,
                ..TrainOptions::svm_defaults()
            };
            let (model, _) = train_svm(&x, &labels, &label_set, true, &opts).unwrap();
            let acc = training_accuracy(&model, &x, &labels);
            assert_eq!(acc, 1.0, "case {case}: separable accuracy {acc}");
        }
    }

    #[test]
    fn svm_decision_reference_values() {
        let zero = LinearModel {
            kind: LinearKind::Svm,
            n_outputs: 1,
            feature_dim: 2,
            weights: vec![0.0, 0.0],
            bias: vec![0.0],
            label_set: vec!["a".into(), "b".into()],
            normalize_pixels: true,
            hyper: TrainOptions::svm_defaults(),
            training: TrainingMeta::default(),
        };
        assert_eq!(zero.decision_scores(&[1.0, 1.0]).unwrap(), vec![0.0, 0.0]);
        assert_eq!(zero.predict_class(&[1.0, 1.0]).unwrap(), 0, "tie goes low");

        let model = LinearModel {
            weights: vec![1.0, -1.0],
            ..zero
        };
        // On the hyperplane: x = (1, 1) → score 0.
        assert_eq!(model.binary_score(&[1.0, 1.0]).unwrap(), 0.0);
        // w = (1, −1), x = (3, 1) → 2.
        let scores = model.decision_scores(&[3.0, 1.0]).unwrap();
        assert_eq!(scores, vec![0.0, 2.0]);
        assert_eq!(model.predict_class(&[3.0, 1.0]).unwrap(), 1);
    }

    #[test]
    fn linreg_recovers_the_identity_line() {
        let x = DenseFeatures::new(1, vec![0.0, 50.0, 100.0]).unwrap();
        let targets = vec![0.0, 50.0, 100.0];
        let opts = TrainOptions {
            learning_rate: 1.5e-4,
            epochs: 100_000,
            batch_size: 3,
            l2: 1e-6,
            seed: 1,
        };
        let (model, losses) = train_linreg(&x, &targets, true, &opts).unwrap();
        assert!((model.weights[0] - 1.0).abs() < 1e-3, "slope {}", model.weights[0]);
        assert!(model.bias[0].abs() < 0.1, "intercept {}", model.bias[0]);

        let preds: Vec<f64> = targets
            .iter()
            .enumerate()
            .map(|(i, _)| model.predict_dilution(&[x_value(&x, i)]).unwrap().0)
            .collect();
        let r = crate::metrics::pearson_r(&preds, &targets).unwrap();
        assert!(r > 0.999_999, "r = {r}");

        // Full-batch descent on a quadratic objective is monotone.
        for pair in losses.windows(2) {
            assert!(pair[1] <= pair[0] + 1e-9, "loss increased: {pair:?}");
        }
    }

    fn x_value(x: &DenseFeatures, row: usize) -> f64 {
        let mut out = [0.0];
        x.copy_row(row, &mut out);
        out[0]
    }

    #[test]
    fn linreg_rejects_constant_targets() {
        let x = DenseFeatures::new(1, vec![0.0, 1.0]).unwrap();
        let err = train_linreg(&x, &[5.0, 5.0], true, &TrainOptions::linreg_defaults());
        assert!(matches!(err, Err(Error::Config(_))));
    }

    #[test]
    fn dilution_predictions_clamp_to_percent_range() {
        let base = LinearModel {
            kind: LinearKind::Linreg,
            n_outputs: 1,
            feature_dim: 1,
            weights: vec![0.0],
            bias: vec![0.0],
            label_set: Vec::new(),
            normalize_pixels: true,
            hyper: TrainOptions::linreg_defaults(),
            training: TrainingMeta::default(),
        };
        assert_eq!(base.predict_dilution(&[3.0]).unwrap(), (0.0, false));

        let high = LinearModel {
            bias: vec![103.2],
            ..base.clone()
        };
        assert_eq!(high.predict_dilution(&[0.0]).unwrap(), (100.0, true));

        let mid = LinearModel {
            bias: vec![47.3],
            ..base
        };
        assert_eq!(mid.predict_dilution(&[0.0]).unwrap(), (47.3, false));
    }

    #[test]
    fn single_class_training_is_a_config_error() {
        let x = DenseFeatures::new(1, vec![1.0, 2.0]).unwrap();
        let labels = vec![0, 0];
        let err = train_logreg(
            &x,
            &labels,
            &["only".to_string(), "ghost".to_string()],
            true,
            &TrainOptions::logreg_defaults(),
        );
        assert!(matches!(err, Err(Error::Config(_))), "missing class must fail");

        let err = train_logreg(
            &x,
            &labels,
            &["only".to_string()],
            true,
            &TrainOptions::logreg_defaults(),
        );
        assert!(matches!(err, Err(Error::Config(_))));
    }

    #[test]
    fn divergent_training_reports_the_epoch() {
        let x = DenseFeatures::new(1, vec![0.0, 50.0, 100.0]).unwrap();
        let opts = TrainOptions {
            learning_rate: 10.0, // wildly unstable for this scale
            epochs: 50,
            batch_size: 3,
            l2: 0.0,
            seed: 1,
        };
        match train_linreg(&x, &[0.0, 50.0, 100.0], true, &opts) {
            Err(Error::Divergence { epoch }) => assert!(epoch >= 1 && epoch <= 50),
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn training_is_bitwise_deterministic() {
        let (x, labels, label_set) = step_toy();
        let opts = TrainOptions {
            epochs: 20,
            ..TrainOptions::logreg_defaults()
        };
        let (a, _) = train_logreg(&x, &labels, &label_set, true, &opts).unwrap();
        let (b, _) = train_logreg(&x, &labels, &label_set, true, &opts).unwrap();
        let bits = |m: &LinearModel| -> Vec<u64> {
            m.weights.iter().chain(&m.bias).map(|v| v.to_bits()).collect()
        };
        assert_eq!(bits(&a), bits(&b));
    }

    #[test]
    fn shape_mismatches_are_shape_errors() {
        let model = LinearModel {
            kind: LinearKind::Logreg,
            n_outputs: 1,
            feature_dim: 4,
            weights: vec![0.0; 4],
            bias: vec![0.0],
            label_set: vec!["a".into(), "b".into()],
            normalize_pixels: true,
            hyper: TrainOptions::logreg_defaults(),
            training: TrainingMeta::default(),
        };
        assert!(matches!(
            model.predict_proba(&[1.0, 2.0]),
            Err(Error::Shape { .. })
        ));
    }

    /// Central-difference gradient of a scalar objective over (w, b).
    fn fd_grad(
        f: &dyn Fn(&[f64], &[f64]) -> f64,
        w: &[f64],
        b: &[f64],
        step: f64,
    ) -> (Vec<f64>, Vec<f64>) {
        let mut gw = vec![0.0; w.len()];
        let mut gb = vec![0.0; b.len()];
        let mut wp = w.to_vec();
        for i in 0..w.len() {
            wp[i] = w[i] + step;
            let hi = f(&wp, b);
            wp[i] = w[i] - step;
            let lo = f(&wp, b);
            wp[i] = w[i];
            gw[i] = (hi - lo) / (2.0 * step);
        }
        let mut bp = b.to_vec();
        for i in 0..b.len() {
            bp[i] = b[i] + step;
            let hi = f(w, &bp);
            bp[i] = b[i] - step;
            let lo = f(w, &bp);
            bp[i] = b[i];
            gb[i] = (hi - lo) / (2.0 * step);
        }
        (gw, gb)
    }

    fn max_rel_err(analytic: &[f64], numeric: &[f64]) -> f64 {
        analytic
            .iter()
            .zip(numeric)
            .map(|(&a, &n)| (a - n).abs() / a.abs().max(n.abs()).max(1e-8))
            .fold(0.0, f64::max)
    }

    fn random_batch(rng: &mut Stream, n: usize, dim: usize) -> (DenseFeatures, Vec<usize>) {
        let data: Vec<f64> = (0..n * dim).map(|_| rng.next_f64()).collect();
        let labels: Vec<usize> = (0..n).map(|_| rng.next_index(2)).collect();
        (DenseFeatures::new(dim, data).unwrap(), labels)
    }

    #[test]
    fn logreg_gradient_matches_finite_differences() {
        let mut rng = Stream::from_seed(5150);
        let (x, labels) = random_batch(&mut rng, 10, 12);
        let rows = all_rows(&x);
        for &outputs in &[1usize, 3] {
            let labels3: Vec<usize> = labels.iter().map(|&l| l % outputs.max(2)).collect();
            let w: Vec<f64> = (0..outputs * 12).map(|_| rng.next_f64() - 0.5).collect();
            let b: Vec<f64> = (0..outputs).map(|_| rng.next_f64() - 0.5).collect();
            let (_, gw, gb) = logreg_loss_grad(&x, &labels3, &rows, &w, &b, 1e-3);
            let f = |w: &[f64], b: &[f64]| logreg_loss(&x, &labels3, &rows, w, b, 1e-3);
            let (nw, nb) = fd_grad(&f, &w, &b, 1e-5);
            assert!(max_rel_err(&gw, &nw) < 1e-4, "weights, outputs={outputs}");
            assert!(max_rel_err(&gb, &nb) < 1e-4, "bias, outputs={outputs}");
        }
    }

    #[test]
    fn svm_subgradient_matches_finite_differences_off_the_kink() {
        let mut rng = Stream::from_seed(6060);
        let (x, labels) = random_batch(&mut rng, 10, 8);
        let rows = all_rows(&x);
        let w: Vec<f64> = (0..8).map(|_| rng.next_f64() * 0.4 - 0.2).collect();
        let b = vec![0.1];
        // Verify no margin sits near the hinge kink for this seed.
        for &row in &rows {
            let s = x.dot(row, &w) + b[0];
            let m = target_pm1(labels[row], 0, 1) * s;
            assert!(
                (m - 1.0).abs() > 1e-3,
                "margin {m} too close to the kink; pick a different seed"
            );
        }
        let (_, gw, gb) = svm_loss_grad(&x, &labels, &rows, &w, &b, 1e-4);
        let f = |w: &[f64], b: &[f64]| svm_loss(&x, &labels, &rows, w, b, 1e-4);
        let (nw, nb) = fd_grad(&f, &w, &b, 1e-5);
        assert!(max_rel_err(&gw, &nw) < 1e-4);
        assert!(max_rel_err(&gb, &nb) < 1e-4);
    }

    #[test]
    fn linreg_gradient_matches_finite_differences() {
        let mut rng = Stream::from_seed(7070);
        let (x, _) = random_batch(&mut rng, 10, 9);
        let rows = all_rows(&x);
        let targets: Vec<f64> = (0..10).map(|_| rng.next_f64() * 100.0).collect();
        let w: Vec<f64> = (0..9).map(|_| rng.next_f64() - 0.5).collect();
        let b = vec![rng.next_f64()];
        let (_, gw, gb) = linreg_loss_grad(&x, &targets, &rows, &w, &b, 1e-6);
        let f = |w: &[f64], b: &[f64]| linreg_loss(&x, &targets, &rows, w, b, 1e-6);
        let (nw, nb) = fd_grad(&f, &w, &b, 1e-5);
        assert!(max_rel_err(&gw, &nw) < 1e-4);
        assert!(max_rel_err(&gb, &nb) < 1e-4);
    }
}
