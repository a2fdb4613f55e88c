//! Linear soft-margin SVM trained by projected subgradient descent.
//!
//! The objective splits a penalty for margin violations from a ridge term
//! on the weights:
//!
//! ```text
//! J(w, b) = (1/n) * sum_i max(0, 1 - y_i * (w . x_i - b)) + lambda * ||w||^2
//! ```
//!
//! with signed labels `y_i` in {-1, +1} and the decision value `w . x - b`.
//! Note the sign convention: the offset is *subtracted*, so a larger `b`
//! moves the boundary toward class +1.
//!
//! Two deliberate variants exist:
//!
//! * [`svm_objective_literal`] drops the label factor from the hinge,
//!   penalizing `max(0, 1 - w . x_i - b)` for every sample regardless of
//!   class. This makes the objective label-independent and is kept only as
//!   a comparison mode (enable with `Hyperparams::svm_literal_hinge`); a
//!   model trained on it learns nothing about the classes.
//! * `Hyperparams::svm_freeze_b` pins the offset to a fixed constant and
//!   lets descent adjust only the weights, for reproducing setups where the
//!   offset is reported as a known constant.
//!
//! Subgradient descent is not monotone, so each fit tracks the best
//! parameters seen so far and returns those; the best-so-far objective is
//! non-increasing by construction. The regularization weight is chosen by
//! [`lambda_search`], a stratified cross-validated sweep over a fixed grid.

use super::{check_binary_labels, perceptron::dot, signed_labels, stratified_folds};
use super::{Hyperparams, MlError};
use crate::seed::SeedPath;

/// A fitted linear SVM.
#[derive(Debug, Clone)]
pub struct SvmModel {
    /// Hyperplane normal.
    pub weights: Vec<f64>,
    /// Offset; the decision value is `w . x - b`.
    pub bias: f64,
    /// Regularization weight the model was trained with.
    pub lambda: f64,
    /// Objective value of the returned (best-so-far) parameters.
    pub objective: f64,
}

impl SvmModel {
    /// Signed decision value `w . x - b`.
    pub fn decision(&self, x: &[f64]) -> f64 {
        dot(&self.weights, x) - self.bias
    }

    /// Predicts 1 for a strictly positive decision value, otherwise 0.
    pub fn predict(&self, x: &[f64]) -> usize {
        usize::from(self.decision(x) > 0.0)
    }
}

/// Mean labeled hinge loss plus `lambda * ||w||^2`.
///
/// Labels are API labels {0, 1}; they are mapped to signed labels
/// internally. A sample contributes `max(0, 1 - y * (w . x - b))`.
pub fn svm_objective(weights: &[f64], bias: f64, lambda: f64, x: &[Vec<f64>], y: &[usize]) -> f64 {
    let signed = signed_labels(y);
    let n = x.len() as f64;
    let hinge: f64 = x
        .iter()
        .zip(&signed)
        .map(|(row, &label)| (1.0 - label * (dot(weights, row) - bias)).max(0.0))
        .sum();
    hinge / n + lambda * dot(weights, weights)
}

/// Label-free hinge variant: every sample contributes
/// `max(0, 1 - w . x - b)`, so relabelling the data does not change the
/// value. Comparison mode only; see the module docs.
pub fn svm_objective_literal(weights: &[f64], bias: f64, lambda: f64, x: &[Vec<f64>]) -> f64 {
    let n = x.len() as f64;
    let hinge: f64 = x
        .iter()
        .map(|row| (1.0 - dot(weights, row) - bias).max(0.0))
        .sum();
    hinge / n + lambda * dot(weights, weights)
}

/// Fits one SVM at a fixed regularization weight.
///
/// Runs `hyper.svm_iterations` full-batch subgradient steps with step size
/// `lr / sqrt(t + 1)` from zero parameters, evaluating the objective after
/// every step and returning the best parameters visited. Honors the
/// `svm_freeze_b` and `svm_literal_hinge` modes.
///
/// # Errors
///
/// Label-validation errors from [`check_binary_labels`] and
/// [`MlError::InvalidHyperparameter`] for a non-positive step size, a zero
/// iteration budget, or a negative `lambda`.
pub fn train_svm(
    x: &[Vec<f64>],
    y: &[usize],
    lambda: f64,
    hyper: &Hyperparams,
) -> Result<SvmModel, MlError> {
    check_binary_labels(y)?;
    if !(hyper.svm_learning_rate > 0.0) {
        return Err(MlError::InvalidHyperparameter(format!(
            "svm learning rate must be positive, got {}",
            hyper.svm_learning_rate
        )));
    }
    if hyper.svm_iterations == 0 {
        return Err(MlError::InvalidHyperparameter(
            "svm iteration budget must be at least 1".into(),
        ));
    }
    if !(lambda >= 0.0) {
        return Err(MlError::InvalidHyperparameter(format!(
            "svm lambda must be non-negative, got {lambda}"
        )));
    }
    let signed = signed_labels(y);
    let n = x.len() as f64;
    let dim = x[0].len();
    let mut weights = vec![0.0; dim];
    let mut bias = hyper.svm_freeze_b.unwrap_or(0.0);
    let objective_of = |w: &[f64], b: f64| {
        if hyper.svm_literal_hinge {
            svm_objective_literal(w, b, lambda, x)
        } else {
            svm_objective(w, b, lambda, x, y)
        }
    };
    let mut best_weights = weights.clone();
    let mut best_bias = bias;
    let mut best_objective = objective_of(&weights, bias);
    let mut grad_w = vec![0.0; dim];
    for t in 0..hyper.svm_iterations {
        grad_w.iter_mut().for_each(|g| *g = 0.0);
        let mut grad_b = 0.0;
        for (row, &label) in x.iter().zip(&signed) {
            let decision = dot(&weights, row) - bias;
            if hyper.svm_literal_hinge {
                // Violation test and slope ignore the label entirely.
                if 1.0 - decision > 0.0 {
                    for (g, &v) in grad_w.iter_mut().zip(row) {
                        *g -= v;
                    }
                    grad_b += 1.0;
                }
            } else if 1.0 - label * decision > 0.0 {
                for (g, &v) in grad_w.iter_mut().zip(row) {
                    *g -= label * v;
                }
                grad_b += label;
            }
        }
        let step = hyper.svm_learning_rate / ((t + 1) as f64).sqrt();
        for (w, g) in weights.iter_mut().zip(&grad_w) {
            *w -= step * (g / n + 2.0 * lambda * *w);
        }
        if hyper.svm_freeze_b.is_none() {
            bias -= step * (grad_b / n);
        }
        let objective = objective_of(&weights, bias);
        if objective < best_objective {
            best_objective = objective;
            best_weights.clone_from(&weights);
            best_bias = bias;
        }
    }
    Ok(SvmModel {
        weights: best_weights,
        bias: best_bias,
        lambda,
        objective: best_objective,
    })
}

/// Sweeps the regularization grid with stratified cross-validation and
/// refits on the full set at the winning value.
///
/// Candidates are taken from `hyper.svm_lambda_grid`, sorted ascending and
/// deduplicated. Each is scored by pooled correct-prediction count over
/// `hyper.svm_cv_folds` stratified folds; ties go to the smaller lambda. A
/// single-candidate grid skips cross-validation entirely. Returns the
/// refitted model and the chosen lambda.
///
/// # Errors
///
/// [`MlError::InvalidHyperparameter`] for an empty grid, fold errors from
/// [`stratified_folds`], and fit errors from [`train_svm`].
pub fn lambda_search(
    x: &[Vec<f64>],
    y: &[usize],
    hyper: &Hyperparams,
    seed: u64,
) -> Result<(SvmModel, f64), MlError> {
    check_binary_labels(y)?;
    let mut grid = hyper.svm_lambda_grid.clone();
    if grid.is_empty() {
        return Err(MlError::InvalidHyperparameter(
            "svm lambda grid is empty".into(),
        ));
    }
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let best_lambda = if grid.len() == 1 {
        grid[0]
    } else {
        let folds = stratified_folds(y, hyper.svm_cv_folds, SeedPath::new(seed).with_str("cv").seed())?;
        let mut best: Option<(usize, f64)> = None;
        for &lambda in &grid {
            let mut correct = 0usize;
            for held_out in &folds {
                let hold: std::collections::HashSet<usize> = held_out.iter().copied().collect();
                let mut train_x = Vec::with_capacity(x.len() - held_out.len());
                let mut train_y = Vec::with_capacity(x.len() - held_out.len());
                for (i, (row, &label)) in x.iter().zip(y).enumerate() {
                    if !hold.contains(&i) {
                        train_x.push(row.clone());
                        train_y.push(label);
                    }
                }
                let model = train_svm(&train_x, &train_y, lambda, hyper)?;
                correct += held_out
                    .iter()
                    .filter(|&&i| model.predict(&x[i]) == y[i])
                    .count();
            }
            // Strict improvement keeps the smallest lambda on ties because
            // the grid is visited in ascending order.
            if best.map_or(true, |(best_correct, _)| correct > best_correct) {
                best = Some((correct, lambda));
            }
        }
        best.expect("non-empty grid always yields a candidate").1
    };
    let model = train_svm(x, y, best_lambda, hyper)?;
    Ok((model, best_lambda))
}
