//! Rosenblatt perceptron with the classic mistake-driven update.
//!
//! Training walks the samples in order and nudges the hyperplane whenever a
//! sample is on the wrong side (or exactly on the boundary). On linearly
//! separable data the number of updates is bounded by `(R / gamma)^2`,
//! where `R` is the largest augmented sample norm and `gamma` the best
//! achievable margin, so training always terminates with zero errors there;
//! on inseparable data it stops after the epoch cap.

use super::{signed_labels, MlError};

/// A fitted perceptron: a hyperplane plus convergence bookkeeping.
#[derive(Debug, Clone)]
pub struct PerceptronModel {
    /// Hyperplane normal.
    pub weights: Vec<f64>,
    /// Hyperplane offset; the decision value is `w . x + b`.
    pub bias: f64,
    /// Number of mistake-driven updates performed during training.
    pub updates: usize,
    /// Number of full passes over the data, including the final clean pass.
    pub epochs_run: usize,
    /// Whether a full pass completed with zero mistakes.
    pub converged: bool,
}

impl PerceptronModel {
    /// Signed decision value `w . x + b`.
    pub fn decision(&self, x: &[f64]) -> f64 {
        dot(&self.weights, x) + self.bias
    }

    /// Predicts 1 for a strictly positive decision value, otherwise 0.
    pub fn predict(&self, x: &[f64]) -> usize {
        usize::from(self.decision(x) > 0.0)
    }
}

/// Fits a perceptron from zero-initialized weights.
///
/// A sample counts as a mistake when `y * (w . x + b) <= 0`, i.e. points
/// exactly on the boundary still trigger an update; this is what makes the
/// mistake bound argument go through. Training stops at the first clean
/// pass or after `max_epochs` passes.
///
/// # Errors
///
/// [`MlError::EmptyTrainingSet`] and
/// [`MlError::InvalidHyperparameter`] for a non-positive learning rate or a
/// zero epoch budget.
pub fn train_perceptron(
    x: &[Vec<f64>],
    y: &[usize],
    learning_rate: f64,
    max_epochs: usize,
) -> Result<PerceptronModel, MlError> {
    if x.is_empty() {
        return Err(MlError::EmptyTrainingSet);
    }
    if !(learning_rate > 0.0) {
        return Err(MlError::InvalidHyperparameter(format!(
            "perceptron learning rate must be positive, got {learning_rate}"
        )));
    }
    if max_epochs == 0 {
        return Err(MlError::InvalidHyperparameter(
            "perceptron epoch budget must be at least 1".into(),
        ));
    }
    let signed = signed_labels(y);
    let dim = x[0].len();
    let mut weights = vec![0.0; dim];
    let mut bias = 0.0;
    let mut updates = 0;
    let mut epochs_run = 0;
    let mut converged = false;
    for _ in 0..max_epochs {
        epochs_run += 1;
        let mut mistakes = 0;
        for (row, &label) in x.iter().zip(&signed) {
            let activation = dot(&weights, row) + bias;
            if label * activation <= 0.0 {
                for (w, &v) in weights.iter_mut().zip(row) {
                    *w += learning_rate * label * v;
                }
                bias += learning_rate * label;
                mistakes += 1;
                updates += 1;
            }
        }
        if mistakes == 0 {
            converged = true;
            break;
        }
    }
    Ok(PerceptronModel {
        weights,
        bias,
        updates,
        epochs_run,
        converged,
    })
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
