//! Binary classifiers for spectral-fingerprint identification.
//!
//! Seven algorithms share one training and evaluation surface: perceptron,
//! logistic regression, linear SVM, k-nearest neighbours, Gaussian process
//! classification, a single decision tree, and a random forest. Every model
//! is trained on feature rows that have already been standardized (see
//! [`crate::features::Standardizer`]); the standardizer used is bundled into
//! the returned [`TrainedClassifier`] so downstream code can map raw feature
//! vectors into the model's input space without tracking it separately.
//!
//! Conventions shared by every algorithm:
//!
//! * Labels are `0` and `1` at the API boundary. Margin-based methods map
//!   them to `-1`/`+1` internally.
//! * Prediction is deterministic given the fitted parameters. Decision
//!   boundaries resolve toward class 0: a margin method predicts 1 only for
//!   a strictly positive decision value, and vote ties in the forest and in
//!   k-NN go to class 0. The one documented exception is the Gaussian
//!   process classifier, which predicts 1 when its predictive probability
//!   is at least one half.
//! * Any randomness (bootstrap draws, feature subsampling, fold shuffling)
//!   comes from an explicit seed, so identical inputs produce identical
//!   models.
//!
//! The [`study`] submodule drives the full experiment: scenario generation,
//! cluster labeling, class balancing, and the regime-by-algorithm accuracy
//! grid.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::Dataset;
use crate::features::Standardizer;
use crate::seed::SeedPath;

pub mod forest;
pub mod gpc;
pub mod knn;
pub mod logistic;
pub mod perceptron;
pub mod study;
pub mod svm;
pub mod tree;

pub use forest::RandomForest;
pub use gpc::GpcModel;
pub use knn::KnnModel;
pub use logistic::LogisticModel;
pub use perceptron::PerceptronModel;
pub use svm::SvmModel;
pub use tree::DecisionTree;

/// Errors raised while fitting or applying classifiers.
#[derive(Debug, Error)]
pub enum MlError {
    /// The training set has no rows.
    #[error("training set is empty")]
    EmptyTrainingSet,
    /// The evaluation set has no rows.
    #[error("evaluation set is empty")]
    EmptyTestSet,
    /// A label outside {0, 1} was encountered.
    #[error("label {label} at row {row} is not binary (expected 0 or 1)")]
    NonBinaryLabels { row: usize, label: usize },
    /// Training requires at least one sample of each class.
    #[error("training set contains only class {class}")]
    SingleClass { class: usize },
    /// A feature vector does not match the model's input dimension.
    #[error("feature vector has {found} entries, model expects {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    /// A hyperparameter value is outside its valid range.
    #[error("invalid hyperparameter: {0}")]
    InvalidHyperparameter(String),
    /// Cross-validation cannot build the requested folds.
    #[error("cannot build {folds} folds: smallest class has {min_class} samples")]
    DegenerateFolds { folds: usize, min_class: usize },
    /// A numerical routine inside a fit failed.
    #[error("linear algebra failure during fit: {0}")]
    Numerical(#[from] crate::linalg::LinalgError),
}

/// The classifier families in the evaluation suite.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Perceptron,
    Logistic,
    SvmLinear,
    Knn,
    Gpc,
    DecisionTree,
    RandomForest,
}

impl Algorithm {
    /// Every algorithm, in the fixed order used by reports.
    pub const ALL: [Algorithm; 7] = [
        Algorithm::Perceptron,
        Algorithm::Logistic,
        Algorithm::SvmLinear,
        Algorithm::Knn,
        Algorithm::Gpc,
        Algorithm::DecisionTree,
        Algorithm::RandomForest,
    ];

    /// Stable lower-case identifier used in file names and report columns.
    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::Perceptron => "perceptron",
            Algorithm::Logistic => "logistic",
            Algorithm::SvmLinear => "svm_linear",
            Algorithm::Knn => "knn",
            Algorithm::Gpc => "gpc",
            Algorithm::DecisionTree => "decision_tree",
            Algorithm::RandomForest => "random_forest",
        }
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "perceptron" => Ok(Algorithm::Perceptron),
            "logistic" => Ok(Algorithm::Logistic),
            "svm" | "svm_linear" => Ok(Algorithm::SvmLinear),
            "knn" => Ok(Algorithm::Knn),
            "gpc" => Ok(Algorithm::Gpc),
            "tree" | "decision_tree" => Ok(Algorithm::DecisionTree),
            "forest" | "random_forest" => Ok(Algorithm::RandomForest),
            other => Err(format!("unknown algorithm `{other}`")),
        }
    }
}

/// Tunable settings for every algorithm in the suite, with working defaults.
///
/// A single bundle is passed to [`train`] so that study code can carry one
/// value around; each algorithm reads only its own fields.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Hyperparams {
    /// Perceptron update step size.
    pub perceptron_learning_rate: f64,
    /// Upper bound on perceptron passes over the training set.
    pub perceptron_max_epochs: usize,
    /// Gradient-descent step size for logistic regression.
    pub logistic_learning_rate: f64,
    /// Upper bound on logistic-regression gradient steps.
    pub logistic_max_iters: usize,
    /// Stop logistic regression when the loss improves by less than this.
    pub logistic_tolerance: f64,
    /// Ridge-style regularization candidates for the SVM grid search.
    pub svm_lambda_grid: Vec<f64>,
    /// Subgradient-descent iterations per SVM fit.
    pub svm_iterations: usize,
    /// Initial subgradient step size; decays as 1/sqrt(t).
    pub svm_learning_rate: f64,
    /// Stratified cross-validation folds for the SVM grid search.
    pub svm_cv_folds: usize,
    /// When set, the SVM offset is frozen at this value instead of learned.
    pub svm_freeze_b: Option<f64>,
    /// Use the label-free hinge variant (comparison mode; see [`svm`]).
    pub svm_literal_hinge: bool,
    /// Neighbour count for k-NN voting.
    pub knn_k: usize,
    /// Minimum samples in a decision-tree leaf.
    pub tree_min_leaf: usize,
    /// Optional depth cap for decision trees (`None` = unlimited).
    pub tree_max_depth: Option<usize>,
    /// Number of bootstrap trees in the random forest.
    pub forest_trees: usize,
    /// Largest training-set size the Gaussian process will fit exactly;
    /// larger sets are subsampled per class with the training seed.
    pub gpc_max_train: usize,
    /// Convergence tolerance for the Gaussian-process mode search.
    pub gpc_newton_tol: f64,
    /// Upper bound on Newton steps in the Gaussian-process mode search.
    pub gpc_newton_max_iters: usize,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            perceptron_learning_rate: 1.0,
            perceptron_max_epochs: 1000,
            logistic_learning_rate: 0.1,
            logistic_max_iters: 5000,
            logistic_tolerance: 1e-8,
            svm_lambda_grid: vec![1e-3, 1e-2, 1e-1, 1.0, 1e1, 1e2],
            svm_iterations: 2000,
            svm_learning_rate: 0.5,
            svm_cv_folds: 5,
            svm_freeze_b: None,
            svm_literal_hinge: false,
            knn_k: 5,
            tree_min_leaf: 1,
            tree_max_depth: None,
            forest_trees: 100,
            gpc_max_train: 1000,
            gpc_newton_tol: 1e-8,
            gpc_newton_max_iters: 100,
        }
    }
}

/// Learned state for one fitted algorithm.
#[derive(Debug, Clone)]
pub enum Model {
    Perceptron(PerceptronModel),
    Logistic(LogisticModel),
    Svm(SvmModel),
    Knn(KnnModel),
    Gpc(GpcModel),
    Tree(DecisionTree),
    Forest(RandomForest),
}

/// Bookkeeping recorded at fit time.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainingMeta {
    /// Number of training rows the fit saw.
    pub n_samples: usize,
    /// Input dimension.
    pub n_features: usize,
    /// Seed that drove any randomness in the fit.
    pub seed: u64,
}

/// A fitted classifier bundled with the standardizer its inputs assume.
///
/// [`TrainedClassifier::predict`] expects feature vectors that are already
/// standardized; [`TrainedClassifier::predict_raw`] applies the bundled
/// standardizer first.
#[derive(Debug, Clone)]
pub struct TrainedClassifier {
    /// Which algorithm produced [`Self::model`].
    pub algorithm: Algorithm,
    /// The learned state.
    pub model: Model,
    /// Feature scaling the model's inputs assume.
    pub standardizer: Standardizer,
    /// Fit-time bookkeeping.
    pub meta: TrainingMeta,
}

/// Accuracy and error structure of a model on one labelled set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    /// Fraction of rows predicted correctly.
    pub accuracy: f64,
    /// `confusion[t][p]` counts rows of true class `t` predicted as `p`.
    pub confusion: [[usize; 2]; 2],
    /// Recall per true class; a class absent from the set reports 1.0
    /// (vacuously correct) so reports never carry NaN.
    pub per_class_recall: [f64; 2],
}

/// Validates that every label is 0 or 1 and both classes appear.
///
/// # Errors
///
/// [`MlError::EmptyTrainingSet`], [`MlError::NonBinaryLabels`], or
/// [`MlError::SingleClass`].
pub fn check_binary_labels(labels: &[usize]) -> Result<(), MlError> {
    if labels.is_empty() {
        return Err(MlError::EmptyTrainingSet);
    }
    let mut seen = [false; 2];
    for (row, &label) in labels.iter().enumerate() {
        if label > 1 {
            return Err(MlError::NonBinaryLabels { row, label });
        }
        seen[label] = true;
    }
    if !seen[0] {
        return Err(MlError::SingleClass { class: 1 });
    }
    if !seen[1] {
        return Err(MlError::SingleClass { class: 0 });
    }
    Ok(())
}

/// Maps API labels {0, 1} to the signed labels {-1, +1} used by margin
/// methods.
pub(crate) fn signed_labels(labels: &[usize]) -> Vec<f64> {
    labels
        .iter()
        .map(|&l| if l == 1 { 1.0 } else { -1.0 })
        .collect()
}

/// Fits `algorithm` to an already-standardized training set.
///
/// `standardizer` must be the transform that produced `train.features`; it
/// is stored on the returned model so raw vectors can be standardized
/// consistently later. `seed` drives any randomness inside the fit
/// (bootstrap draws, cross-validation shuffles, subsampling); algorithms
/// without internal randomness ignore it.
///
/// # Errors
///
/// [`MlError::EmptyTrainingSet`] / [`MlError::NonBinaryLabels`] /
/// [`MlError::SingleClass`] for malformed inputs, plus algorithm-specific
/// failures such as [`MlError::DegenerateFolds`].
pub fn train(
    algorithm: Algorithm,
    train: &Dataset,
    standardizer: &Standardizer,
    hyper: &Hyperparams,
    seed: u64,
) -> Result<TrainedClassifier, MlError> {
    check_binary_labels(&train.labels)?;
    let x = &train.features;
    let y = &train.labels;
    let model = match algorithm {
        Algorithm::Perceptron => Model::Perceptron(perceptron::train_perceptron(
            x,
            y,
            hyper.perceptron_learning_rate,
            hyper.perceptron_max_epochs,
        )?),
        Algorithm::Logistic => Model::Logistic(logistic::train_logistic(
            x,
            y,
            hyper.logistic_learning_rate,
            hyper.logistic_max_iters,
            hyper.logistic_tolerance,
        )?),
        Algorithm::SvmLinear => {
            let (model, _lambda) = svm::lambda_search(x, y, hyper, seed)?;
            Model::Svm(model)
        }
        Algorithm::Knn => Model::Knn(knn::fit_knn(x, y, hyper.knn_k)?),
        Algorithm::Gpc => Model::Gpc(gpc::train_gpc(x, y, hyper, seed)?),
        Algorithm::DecisionTree => Model::Tree(tree::DecisionTree::fit(
            x,
            y,
            hyper.tree_min_leaf,
            hyper.tree_max_depth,
        )?),
        Algorithm::RandomForest => Model::Forest(forest::train_forest(x, y, hyper, seed)?),
    };
    Ok(TrainedClassifier {
        algorithm,
        model,
        standardizer: standardizer.clone(),
        meta: TrainingMeta {
            n_samples: train.len(),
            n_features: x.first().map_or(0, Vec::len),
            seed,
        },
    })
}

impl TrainedClassifier {
    /// Predicts the class of one standardized feature vector.
    ///
    /// # Errors
    ///
    /// [`MlError::DimensionMismatch`] if `x` has the wrong length.
    pub fn predict(&self, x: &[f64]) -> Result<usize, MlError> {
        if x.len() != self.meta.n_features {
            return Err(MlError::DimensionMismatch {
                expected: self.meta.n_features,
                found: x.len(),
            });
        }
        Ok(match &self.model {
            Model::Perceptron(m) => m.predict(x),
            Model::Logistic(m) => m.predict(x),
            Model::Svm(m) => m.predict(x),
            Model::Knn(m) => m.predict(x),
            Model::Gpc(m) => m.predict(x),
            Model::Tree(m) => m.predict(x),
            Model::Forest(m) => m.predict(x),
        })
    }

    /// Standardizes a raw feature vector with the bundled scaler, then
    /// predicts.
    ///
    /// # Errors
    ///
    /// [`MlError::DimensionMismatch`] if `x` has the wrong length.
    pub fn predict_raw(&self, x: &[f64]) -> Result<usize, MlError> {
        let standardized = self.standardizer.transform_row(x).map_err(|_| {
            MlError::DimensionMismatch {
                expected: self.standardizer.means.len(),
                found: x.len(),
            }
        })?;
        self.predict(&standardized)
    }
}

/// Scores a model against a standardized, ground-truth-labelled set.
///
/// # Errors
///
/// [`MlError::EmptyTestSet`], [`MlError::NonBinaryLabels`], or a dimension
/// mismatch from prediction.
pub fn evaluate(model: &TrainedClassifier, test: &Dataset) -> Result<Metrics, MlError> {
    if test.is_empty() {
        return Err(MlError::EmptyTestSet);
    }
    let mut confusion = [[0usize; 2]; 2];
    for (row, (x, &label)) in test.features.iter().zip(&test.labels).enumerate() {
        if label > 1 {
            return Err(MlError::NonBinaryLabels { row, label });
        }
        let predicted = model.predict(x)?;
        confusion[label][predicted] += 1;
    }
    Ok(metrics_from_confusion(confusion))
}

/// Builds [`Metrics`] from a filled confusion matrix.
pub fn metrics_from_confusion(confusion: [[usize; 2]; 2]) -> Metrics {
    let total: usize = confusion.iter().flatten().sum();
    let correct = confusion[0][0] + confusion[1][1];
    let recall = |class: usize| {
        let class_total = confusion[class][0] + confusion[class][1];
        if class_total == 0 {
            1.0
        } else {
            confusion[class][class] as f64 / class_total as f64
        }
    };
    Metrics {
        accuracy: correct as f64 / total as f64,
        confusion,
        per_class_recall: [recall(0), recall(1)],
    }
}

/// Splits row indices into stratified folds for cross-validation.
///
/// Each class's indices are shuffled with a seed derived from `seed`, then
/// dealt round-robin so every fold holds nearly the same class mix. Fold
/// sizes differ by at most one sample per class.
///
/// # Errors
///
/// [`MlError::DegenerateFolds`] when any class has fewer samples than
/// `folds`, and [`MlError::InvalidHyperparameter`] for `folds < 2`.
pub(crate) fn stratified_folds(
    labels: &[usize],
    folds: usize,
    seed: u64,
) -> Result<Vec<Vec<usize>>, MlError> {
    use rand::seq::SliceRandom;
    use rand::SeedableRng;

    if folds < 2 {
        return Err(MlError::InvalidHyperparameter(format!(
            "cross-validation needs at least 2 folds, got {folds}"
        )));
    }
    let mut by_class: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
    for (i, &label) in labels.iter().enumerate() {
        by_class[label].push(i);
    }
    let min_class = by_class.iter().map(Vec::len).min().unwrap_or(0);
    if min_class < folds {
        return Err(MlError::DegenerateFolds { folds, min_class });
    }
    let mut assignment = vec![Vec::new(); folds];
    for (class, indices) in by_class.iter_mut().enumerate() {
        let fold_seed = SeedPath::new(seed)
            .with_str("fold")
            .with_u64(class as u64)
            .seed();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(fold_seed);
        indices.shuffle(&mut rng);
        for (slot, &row) in indices.iter().enumerate() {
            assignment[slot % folds].push(row);
        }
    }
    for fold in &mut assignment {
        fold.sort_unstable();
    }
    Ok(assignment)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binary_label_check_accepts_mixed_and_rejects_bad_input() {
        assert!(check_binary_labels(&[0, 1, 1, 0]).is_ok());
        assert!(matches!(
            check_binary_labels(&[]),
            Err(MlError::EmptyTrainingSet)
        ));
        assert!(matches!(
            check_binary_labels(&[0, 2]),
            Err(MlError::NonBinaryLabels { row: 1, label: 2 })
        ));
        assert!(matches!(
            check_binary_labels(&[1, 1]),
            Err(MlError::SingleClass { class: 1 })
        ));
        assert!(matches!(
            check_binary_labels(&[0, 0]),
            Err(MlError::SingleClass { class: 0 })
        ));
    }

    #[test]
    fn metrics_match_hand_computed_confusion() {
        let m = metrics_from_confusion([[90, 10], [5, 95]]);
        assert!((m.accuracy - 0.925).abs() < 1e-12);
        assert!((m.per_class_recall[0] - 0.9).abs() < 1e-12);
        assert!((m.per_class_recall[1] - 0.95).abs() < 1e-12);
    }

    #[test]
    fn metrics_report_vacuous_recall_for_absent_class() {
        let m = metrics_from_confusion([[0, 0], [3, 7]]);
        assert_eq!(m.per_class_recall[0], 1.0);
        assert!((m.accuracy - 0.7).abs() < 1e-12);
    }

    #[test]
    fn stratified_folds_balance_classes_and_partition_rows() {
        let labels: Vec<usize> = (0..50).map(|i| i % 2).collect();
        let folds = stratified_folds(&labels, 5, 7).unwrap();
        assert_eq!(folds.len(), 5);
        let mut all: Vec<usize> = folds.iter().flatten().copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..50).collect::<Vec<_>>());
        for fold in &folds {
            let ones = fold.iter().filter(|&&i| labels[i] == 1).count();
            assert_eq!(fold.len(), 10);
            assert_eq!(ones, 5);
        }
    }

    #[test]
    fn stratified_folds_reject_tiny_classes() {
        let labels = [0, 0, 0, 0, 1, 1];
        assert!(matches!(
            stratified_folds(&labels, 5, 1),
            Err(MlError::DegenerateFolds {
                folds: 5,
                min_class: 2
            })
        ));
    }

    #[test]
    fn algorithm_names_round_trip() {
        for algorithm in Algorithm::ALL {
            let parsed: Algorithm = algorithm.name().parse().unwrap();
            assert_eq!(parsed, algorithm);
        }
        assert!("nonsense".parse::<Algorithm>().is_err());
    }
}
