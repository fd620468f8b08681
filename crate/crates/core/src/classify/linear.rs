//! Linear models: softmax logistic regression and one-vs-rest hinge SVM.
//!
//! Both trainers are full-batch and deterministic. Logistic regression runs
//! plain gradient descent on the convex L2-regularized cross-entropy; with
//! unit-norm TF-IDF rows its gradient is 1-Lipschitz (plus the L2 term), so
//! any step size below `2 / (1 + l2)` decreases the objective every epoch.
//!
//! The SVM runs subgradient descent with an `lr / sqrt(t)` schedule per class
//! and returns the running average of the iterates. The average is merged in
//! with weight `1/t`, halved until the averaged objective does not increase,
//! which makes the reported objective trace monotone.

use serde::{Deserialize, Serialize};

use super::{check_features, encode_labels, Classifier, ClassifyError};
use crate::features::{DocTermMatrix, SparseVec};
use crate::label::Label;

const MAX_AVERAGING_HALVINGS: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Loss {
    SoftmaxCe,
    HingeOvr,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearHyperparams {
    pub learning_rate: f64,
    pub l2: f64,
    pub epochs: usize,
    /// Recorded for provenance; full-batch training from a zero start uses no randomness.
    pub seed: u64,
}

impl LinearHyperparams {
    pub fn logreg_default() -> Self {
        LinearHyperparams {
            learning_rate: 1.0,
            l2: 1e-4,
            epochs: 300,
            seed: 0,
        }
    }

    pub fn svm_default() -> Self {
        LinearHyperparams {
            learning_rate: 1.0,
            l2: 1e-4,
            epochs: 300,
            seed: 0,
        }
    }

    fn validate(&self) -> Result<(), ClassifyError> {
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(ClassifyError::BadHyperparam("learning_rate must be > 0".into()));
        }
        if !(self.l2.is_finite() && self.l2 >= 0.0) {
            return Err(ClassifyError::BadHyperparam("l2 must be >= 0".into()));
        }
        if self.epochs == 0 {
            return Err(ClassifyError::BadHyperparam("epochs must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    /// `classes.len()` rows of `n_features` weights.
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
    pub classes: Vec<Label>,
    pub loss: Loss,
    pub hyperparams: LinearHyperparams,
    pub n_features: usize,
    /// Training objective at the start and after every epoch.
    pub objective_trace: Vec<f64>,
}

impl LinearModel {
    /// Raw decision values `W x + b`.
    pub fn decision_function(&self, x: &DocTermMatrix) -> Result<Vec<Vec<f64>>, ClassifyError> {
        check_features(self.n_features, x)?;
        Ok(x.rows.iter().map(|r| margins(&self.weights, &self.bias, r)).collect())
    }
}

impl Classifier for LinearModel {
    fn classes(&self) -> &[Label] {
        &self.classes
    }

    /// Softmax probabilities for logistic regression, raw margins for the SVM.
    fn predict_scores(&self, x: &DocTermMatrix) -> Result<Vec<Vec<f64>>, ClassifyError> {
        let mut scores = self.decision_function(x)?;
        if self.loss == Loss::SoftmaxCe {
            scores.iter_mut().for_each(|s| softmax_in_place(s));
        }
        Ok(scores)
    }
}

fn margins(weights: &[Vec<f64>], bias: &[f64], row: &SparseVec) -> Vec<f64> {
    weights.iter().zip(bias).map(|(w, b)| row.dot_dense(w) + b).collect()
}

fn softmax_in_place(z: &mut [f64]) {
    let max = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in z.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    z.iter_mut().for_each(|v| *v /= sum);
}

fn squared_norm(weights: &[Vec<f64>]) -> f64 {
    weights.iter().flatten().map(|w| w * w).sum()
}

/// Mean softmax cross-entropy plus `l2 / 2 * ||W||^2` (bias unregularized).
pub fn logreg_objective(weights: &[Vec<f64>], bias: &[f64], x: &DocTermMatrix, y: &[usize], l2: f64) -> f64 {
    let n = x.n_rows() as f64;
    let mut loss = 0.0;
    for (row, &yi) in x.rows.iter().zip(y) {
        let z = margins(weights, bias, row);
        let max = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + z.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        loss += lse - z[yi];
    }
    loss / n + 0.5 * l2 * squared_norm(weights)
}

/// Analytic gradient of [`logreg_objective`]: `(dW, db)`.
pub fn logreg_gradient(
    weights: &[Vec<f64>],
    bias: &[f64],
    x: &DocTermMatrix,
    y: &[usize],
    l2: f64,
) -> (Vec<Vec<f64>>, Vec<f64>) {
    let n = x.n_rows() as f64;
    let k = weights.len();
    let mut gw: Vec<Vec<f64>> = weights.iter().map(|w| w.iter().map(|v| l2 * v).collect()).collect();
    let mut gb = vec![0.0; k];
    for (row, &yi) in x.rows.iter().zip(y) {
        let mut p = margins(weights, bias, row);
        softmax_in_place(&mut p);
        p[yi] -= 1.0;
        for c in 0..k {
            let coef = p[c] / n;
            gb[c] += coef;
            for (j, v) in row.iter() {
                gw[c][j] += coef * v;
            }
        }
    }
    (gw, gb)
}

pub fn train_logreg(x: &DocTermMatrix, y: &[Label], hp: &LinearHyperparams) -> Result<LinearModel, ClassifyError> {
    hp.validate()?;
    let (classes, yi) = encode_labels(x, y)?;
    let k = classes.len();
    let mut weights = vec![vec![0.0; x.n_features]; k];
    let mut bias = vec![0.0; k];
    let mut trace = Vec::with_capacity(hp.epochs + 1);
    trace.push(logreg_objective(&weights, &bias, x, &yi, hp.l2));
    for _ in 0..hp.epochs {
        let (gw, gb) = logreg_gradient(&weights, &bias, x, &yi, hp.l2);
        for (w, g) in weights.iter_mut().zip(&gw) {
            for (wj, gj) in w.iter_mut().zip(g) {
                *wj -= hp.learning_rate * gj;
            }
        }
        for (b, g) in bias.iter_mut().zip(&gb) {
            *b -= hp.learning_rate * g;
        }
        trace.push(logreg_objective(&weights, &bias, x, &yi, hp.l2));
    }
    Ok(LinearModel {
        weights,
        bias,
        classes,
        loss: Loss::SoftmaxCe,
        hyperparams: *hp,
        n_features: x.n_features,
        objective_trace: trace,
    })
}

/// Binary hinge objective `l2/2 ||w||^2 + mean(max(0, 1 - y (w.x + b)))` with y in {-1, +1}.
fn hinge_objective(w: &[f64], b: f64, x: &DocTermMatrix, y: &[f64], l2: f64) -> f64 {
    let n = x.n_rows() as f64;
    let hinge: f64 = x
        .rows
        .iter()
        .zip(y)
        .map(|(row, yi)| (1.0 - yi * (row.dot_dense(w) + b)).max(0.0))
        .sum();
    0.5 * l2 * w.iter().map(|v| v * v).sum::<f64>() + hinge / n
}

/// Sum over classes of the one-vs-rest hinge objectives at the model's weights.
pub fn svm_objective(model: &LinearModel, x: &DocTermMatrix, y: &[Label]) -> f64 {
    (0..model.classes.len())
        .map(|c| {
            let signs = one_vs_rest(y, model.classes[c]);
            hinge_objective(&model.weights[c], model.bias[c], x, &signs, model.hyperparams.l2)
        })
        .sum()
}

fn one_vs_rest(y: &[Label], positive: Label) -> Vec<f64> {
    y.iter().map(|&l| if l == positive { 1.0 } else { -1.0 }).collect()
}

struct BinarySvm {
    w: Vec<f64>,
    b: f64,
    trace: Vec<f64>,
}

fn train_binary_svm(x: &DocTermMatrix, y: &[f64], hp: &LinearHyperparams) -> BinarySvm {
    let n = x.n_rows() as f64;
    let d = x.n_features;
    let mut w = vec![0.0; d];
    let mut b = 0.0;
    let mut avg_w = vec![0.0; d];
    let mut avg_b = 0.0;
    let mut avg_obj = hinge_objective(&avg_w, avg_b, x, y, hp.l2);
    let mut trace = Vec::with_capacity(hp.epochs + 1);
    trace.push(avg_obj);

    let mut gw = vec![0.0; d];
    for t in 1..=hp.epochs {
        gw.iter_mut().zip(&w).for_each(|(g, wj)| *g = hp.l2 * wj);
        let mut gb = 0.0;
        for (row, &yi) in x.rows.iter().zip(y) {
            if yi * (row.dot_dense(&w) + b) < 1.0 {
                for (j, v) in row.iter() {
                    gw[j] -= yi * v / n;
                }
                gb -= yi / n;
            }
        }
        let step = hp.learning_rate / (t as f64).sqrt();
        w.iter_mut().zip(&gw).for_each(|(wj, g)| *wj -= step * g);
        b -= step * gb;

        let mut rho = 1.0 / t as f64;
        for _ in 0..=MAX_AVERAGING_HALVINGS {
            let cand_w: Vec<f64> = avg_w.iter().zip(&w).map(|(a, wj)| a + rho * (wj - a)).collect();
            let cand_b = avg_b + rho * (b - avg_b);
            let obj = hinge_objective(&cand_w, cand_b, x, y, hp.l2);
            if obj <= avg_obj {
                avg_w = cand_w;
                avg_b = cand_b;
                avg_obj = obj;
                break;
            }
            rho *= 0.5;
        }
        trace.push(avg_obj);
    }
    BinarySvm {
        w: avg_w,
        b: avg_b,
        trace,
    }
}

pub fn train_svm(x: &DocTermMatrix, y: &[Label], hp: &LinearHyperparams) -> Result<LinearModel, ClassifyError> {
    hp.validate()?;
    let (classes, _) = encode_labels(x, y)?;
    let per_class: Vec<BinarySvm> = classes
        .iter()
        .map(|&c| train_binary_svm(x, &one_vs_rest(y, c), hp))
        .collect();
    let objective_trace = (0..=hp.epochs)
        .map(|e| per_class.iter().map(|m| m.trace[e]).sum())
        .collect();
    let (weights, bias) = per_class.into_iter().map(|m| (m.w, m.b)).unzip();
    Ok(LinearModel {
        weights,
        bias,
        classes,
        loss: Loss::HingeOvr,
        hyperparams: *hp,
        n_features: x.n_features,
        objective_trace,
    })
}
