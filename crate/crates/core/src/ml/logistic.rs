//! Logistic regression fitted by full-batch gradient descent.
//!
//! The loss is the mean negative log-likelihood of the Bernoulli model
//! `p(y = 1 | x) = sigmoid(w . x + b)`. Both the loss and its analytic
//! gradient are public so they can be cross-checked against finite
//! differences; the loss uses the softplus form, which stays finite for
//! arbitrarily large decision values.

use super::{perceptron::dot, MlError};

/// A fitted logistic-regression model.
#[derive(Debug, Clone)]
pub struct LogisticModel {
    /// Coefficients of the linear decision value.
    pub weights: Vec<f64>,
    /// Intercept; the decision value is `w . x + b`.
    pub bias: f64,
    /// Gradient steps actually taken.
    pub iterations_run: usize,
    /// Mean negative log-likelihood at the final parameters.
    pub final_loss: f64,
}

impl LogisticModel {
    /// Predicted probability of class 1.
    pub fn probability(&self, x: &[f64]) -> f64 {
        sigmoid(dot(&self.weights, x) + self.bias)
    }

    /// Predicts 1 for a strictly positive decision value (probability above
    /// one half), otherwise 0.
    pub fn predict(&self, x: &[f64]) -> usize {
        usize::from(dot(&self.weights, x) + self.bias > 0.0)
    }
}

/// Numerically stable logistic function.
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + exp(z))` without overflow for large `|z|`.
fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

/// Mean negative log-likelihood of labels `y` under `(weights, bias)`.
///
/// Per sample with decision value `z`: `y * softplus(-z) + (1 - y) *
/// softplus(z)`, which equals `-[y ln p + (1 - y) ln(1 - p)]` exactly but
/// never evaluates a logarithm of a rounded-to-zero probability.
pub fn nll(weights: &[f64], bias: f64, x: &[Vec<f64>], y: &[usize]) -> f64 {
    let n = x.len() as f64;
    x.iter()
        .zip(y)
        .map(|(row, &label)| {
            let z = dot(weights, row) + bias;
            if label == 1 {
                softplus(-z)
            } else {
                softplus(z)
            }
        })
        .sum::<f64>()
        / n
}

/// Analytic gradient of [`nll`] with respect to `(weights, bias)`.
///
/// Returns `(d_loss / d_weights, d_loss / d_bias)`; per sample the
/// contribution is `(p - y) * x` and `(p - y)`.
pub fn nll_gradient(
    weights: &[f64],
    bias: f64,
    x: &[Vec<f64>],
    y: &[usize],
) -> (Vec<f64>, f64) {
    let n = x.len() as f64;
    let mut grad_w = vec![0.0; weights.len()];
    let mut grad_b = 0.0;
    for (row, &label) in x.iter().zip(y) {
        let residual = sigmoid(dot(weights, row) + bias) - label as f64;
        for (g, &v) in grad_w.iter_mut().zip(row) {
            *g += residual * v;
        }
        grad_b += residual;
    }
    for g in &mut grad_w {
        *g /= n;
    }
    (grad_w, grad_b / n)
}

/// Fits logistic regression by gradient descent from zero parameters.
///
/// Runs at most `max_iters` full-batch steps of size `learning_rate` and
/// stops early once the loss improves by less than `tolerance` between
/// consecutive steps. On separable data the unregularized optimum is at
/// infinity, so the iteration cap is what terminates the fit there; the
/// decision boundary itself stabilizes long before that.
///
/// # Errors
///
/// [`MlError::EmptyTrainingSet`] and [`MlError::InvalidHyperparameter`]
/// for a non-positive step size or tolerance.
pub fn train_logistic(
    x: &[Vec<f64>],
    y: &[usize],
    learning_rate: f64,
    max_iters: usize,
    tolerance: f64,
) -> Result<LogisticModel, MlError> {
    if x.is_empty() {
        return Err(MlError::EmptyTrainingSet);
    }
    if !(learning_rate > 0.0) {
        return Err(MlError::InvalidHyperparameter(format!(
            "logistic learning rate must be positive, got {learning_rate}"
        )));
    }
    if !(tolerance > 0.0) {
        return Err(MlError::InvalidHyperparameter(format!(
            "logistic tolerance must be positive, got {tolerance}"
        )));
    }
    let dim = x[0].len();
    let mut weights = vec![0.0; dim];
    let mut bias = 0.0;
    let mut loss = nll(&weights, bias, x, y);
    let mut iterations_run = 0;
    for _ in 0..max_iters {
        let (grad_w, grad_b) = nll_gradient(&weights, bias, x, y);
        for (w, g) in weights.iter_mut().zip(&grad_w) {
            *w -= learning_rate * g;
        }
        bias -= learning_rate * grad_b;
        iterations_run += 1;
        let next_loss = nll(&weights, bias, x, y);
        let improved_by = loss - next_loss;
        loss = next_loss;
        if improved_by.abs() < tolerance {
            break;
        }
    }
    Ok(LogisticModel {
        weights,
        bias,
        iterations_run,
        final_loss: loss,
    })
}
