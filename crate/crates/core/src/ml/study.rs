//! End-to-end identification study: scenarios, labeling, balancing, and
//! the regime-by-algorithm accuracy grid.
//!
//! The study asks one question three ways: how well does a classifier
//! trained under some placement regime identify which of two devices
//! produced a spectrum it has never seen? The three training regimes are
//!
//! * `static_only` — train on the fixed-placement captures alone;
//! * `increased` — add a fixed per-class quota of rows from each
//!   perturbed scenario's training split to the static rows;
//! * `combined` — train on every scenario's full training split.
//!
//! Each regime trains every requested algorithm once and scores it on the
//! held-out test split of all three scenarios, giving `regimes x
//! algorithms x scenarios` accuracy cells.
//!
//! Within a regime the pipeline is: fit a standardizer on the regime's
//! training rows; relabel those rows by two-cluster K-means run per
//! capture group (see [`cluster_by_capture_group`] for why grouping is
//! needed in mixed regimes); orient the resulting labels by one global
//! majority vote against ground truth so "cluster 0" consistently means
//! "device 0" — without that step a flipped but internally perfect
//! clustering would score near zero; balance classes with SMOTE; train.
//! Test rows are always scored against ground-truth device labels and are
//! never seen by the standardizer, the clustering, or SMOTE.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{evaluate, train, Algorithm, Hyperparams, Metrics, MlError, Model};
use crate::dataset::{
    generate_scenario, kmeans_label, smote_balance, split_train_test, subsample_per_class,
    Dataset, DatasetError, Scenario, SimParams,
};
use crate::features::{FeatureError, Pca, Standardizer};
use crate::nonlin::{DeviceModel, NonlinError};
use crate::seed::SeedPath;

/// Errors from the end-to-end study pipeline.
#[derive(Debug, Error)]
pub enum StudyError {
    /// A configuration value is unusable.
    #[error("invalid study configuration: {0}")]
    InvalidConfig(String),
    /// Failure while generating or reshaping datasets.
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    /// Failure in feature standardization or projection.
    #[error(transparent)]
    Feature(#[from] FeatureError),
    /// Failure while training or evaluating a classifier.
    #[error(transparent)]
    Ml(#[from] MlError),
    /// Failure while constructing device models.
    #[error(transparent)]
    Nonlin(#[from] NonlinError),
}

/// Training regimes, ordered as they appear in reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    StaticOnly,
    Increased,
    Combined,
}

impl Regime {
    /// Every regime in report order.
    pub const ALL: [Regime; 3] = [Regime::StaticOnly, Regime::Increased, Regime::Combined];

    /// Stable lower-case identifier used in file names and report columns.
    pub fn name(&self) -> &'static str {
        match self {
            Regime::StaticOnly => "static_only",
            Regime::Increased => "increased",
            Regime::Combined => "combined",
        }
    }
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Coefficient perturbation applied to the reference device by default.
pub const DEFAULT_PERTURB_FRACTION: f64 = 0.05;

/// Per-device perturbation seeds for the default pair. Chosen so the pair
/// differs visibly at the intermodulation lines while staying within the
/// default perturbation budget.
pub const DEFAULT_DEVICE_SEEDS: [u64; 2] = [1, 9];

/// Builds the default device pair: two copies of the reference amplifier
/// with every coefficient from the quadratic term up perturbed by at most
/// `fraction`, using [`DEFAULT_DEVICE_SEEDS`].
///
/// # Errors
///
/// Propagates device-model validation failures.
pub fn default_device_pair(fraction: f64) -> Result<Vec<DeviceModel>, NonlinError> {
    let base = DeviceModel::reference_amplifier("reference");
    Ok(vec![
        base.perturbed("tag-1", fraction, 2, DEFAULT_DEVICE_SEEDS[0])?,
        base.perturbed("tag-2", fraction, 2, DEFAULT_DEVICE_SEEDS[1])?,
    ])
}

/// Full configuration of one study run.
#[derive(Debug, Clone)]
pub struct StudyConfig {
    /// Exactly two device models (the task is binary identification).
    pub devices: Vec<DeviceModel>,
    /// Capture-chain simulation parameters shared by all scenarios.
    pub params: SimParams,
    /// Root seed; every random choice in the study derives from it.
    pub master_seed: u64,
    /// Fraction of each class held out for testing, per scenario.
    pub test_fraction: f64,
    /// Rows per class taken from each perturbed scenario's training split
    /// in the `increased` regime (clamped to availability).
    pub increased_per_class: usize,
    /// Neighbour count for SMOTE interpolation.
    pub smote_k: usize,
    /// Number of principal components recorded per regime.
    pub pca_components: usize,
    /// Algorithms to train, in report order.
    pub algorithms: Vec<Algorithm>,
    /// Hyperparameters shared by every fit.
    pub hyper: Hyperparams,
}

impl StudyConfig {
    /// Canonical configuration around a given device pair.
    pub fn with_devices(devices: Vec<DeviceModel>) -> Self {
        StudyConfig {
            devices,
            params: SimParams::default(),
            master_seed: 42,
            test_fraction: 0.1,
            increased_per_class: 907,
            smote_k: 5,
            pca_components: 2,
            algorithms: Algorithm::ALL.to_vec(),
            hyper: Hyperparams::default(),
        }
    }
}

impl Default for StudyConfig {
    fn default() -> Self {
        let devices = default_device_pair(DEFAULT_PERTURB_FRACTION)
            .expect("reference perturbation parameters are valid");
        StudyConfig::with_devices(devices)
    }
}

/// One accuracy cell of the study grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyCell {
    /// Training regime the model was fitted under.
    pub regime: Regime,
    /// Algorithm that produced the prediction.
    pub algorithm: Algorithm,
    /// Scenario whose test split was scored.
    pub test_scenario: Scenario,
    /// Accuracy, confusion matrix, per-class recall.
    pub metrics: Metrics,
}

/// One projected training row for scatter plots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaPoint {
    /// Coordinates along the retained principal components.
    pub coords: Vec<f64>,
    /// Ground-truth device index.
    pub label: usize,
    /// Oriented cluster label the classifiers trained on.
    pub cluster: usize,
    /// Scenario the row came from.
    pub scenario: Scenario,
    /// Position index within its scenario.
    pub position: usize,
}

/// Per-regime byproducts of the pipeline, kept for reporting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeArtifacts {
    /// Which regime this describes.
    pub regime: Regime,
    /// Training rows before balancing.
    pub train_rows: usize,
    /// Training rows after SMOTE balancing.
    pub balanced_rows: usize,
    /// Fraction of training rows whose oriented cluster label matches
    /// ground truth.
    pub cluster_agreement: f64,
    /// Whether majority-vote orientation had to flip the raw clustering.
    pub cluster_flipped: bool,
    /// Regularization weight the SVM grid search chose, when SVM ran.
    pub svm_lambda: Option<f64>,
    /// Variance captured by each retained principal component.
    pub explained_variance: Vec<f64>,
    /// Projection of the (pre-balancing) training rows.
    pub pca_points: Vec<PcaPoint>,
}

/// Complete study output: the accuracy grid plus per-regime artifacts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    /// Accuracy cells, regime-major, then algorithm, then scenario.
    pub cells: Vec<StudyCell>,
    /// Pipeline byproducts per regime, in [`Regime::ALL`] order.
    pub regimes: Vec<RegimeArtifacts>,
}

impl StudyReport {
    /// Accuracy of one cell, if it was computed.
    pub fn accuracy(
        &self,
        regime: Regime,
        algorithm: Algorithm,
        scenario: Scenario,
    ) -> Option<f64> {
        self.cells
            .iter()
            .find(|c| {
                c.regime == regime && c.algorithm == algorithm && c.test_scenario == scenario
            })
            .map(|c| c.metrics.accuracy)
    }
}

/// Runs the full study described by `config`.
///
/// Deterministic: identical configurations produce identical reports.
///
/// # Errors
///
/// [`StudyError::InvalidConfig`] for a device count other than two, an
/// empty algorithm list, or a bad test fraction; otherwise whatever the
/// underlying pipeline stages report.
pub fn run_study(config: &StudyConfig) -> Result<StudyReport, StudyError> {
    if config.devices.len() != 2 {
        return Err(StudyError::InvalidConfig(format!(
            "need exactly 2 devices, got {}",
            config.devices.len()
        )));
    }
    if config.algorithms.is_empty() {
        return Err(StudyError::InvalidConfig("no algorithms requested".into()));
    }
    if !(config.test_fraction > 0.0 && config.test_fraction < 1.0) {
        return Err(StudyError::InvalidConfig(format!(
            "test fraction must lie strictly between 0 and 1, got {}",
            config.test_fraction
        )));
    }
    if config.pca_components == 0 {
        return Err(StudyError::InvalidConfig(
            "at least one principal component is required".into(),
        ));
    }

    // Generate every scenario once and split it; both sides keep their
    // ground-truth labels and provenance.
    let mut trains = Vec::with_capacity(3);
    let mut tests = Vec::with_capacity(3);
    for scenario in Scenario::all() {
        let data = generate_scenario(
            &config.devices,
            scenario,
            &config.params,
            config.master_seed,
        )?;
        let split_seed = SeedPath::new(config.master_seed)
            .with_str("split")
            .with_str(scenario.name())
            .seed();
        let split = split_train_test(&data, config.test_fraction, split_seed)?;
        trains.push(data.select(&split.train));
        tests.push(data.select(&split.test));
    }

    let mut cells = Vec::new();
    let mut regimes = Vec::new();
    for regime in Regime::ALL {
        let train_set = assemble_training_set(config, regime, &trains)?;
        let standardizer = Standardizer::fit(&train_set.features)?;
        let std_train = standardizer.transform(&train_set.features)?;

        // Cluster the standardized training rows into device labels, then
        // orient the labels by majority vote against ground truth.
        let raw_clusters = cluster_by_capture_group(
            &std_train,
            &train_set,
            config.master_seed,
            regime,
        )?;
        let matches = raw_clusters
            .iter()
            .zip(&train_set.labels)
            .filter(|(a, b)| a == b)
            .count();
        let raw_agreement = matches as f64 / train_set.len() as f64;
        let cluster_flipped = raw_agreement < 0.5;
        let cluster_labels: Vec<usize> = if cluster_flipped {
            raw_clusters.iter().map(|&a| 1 - a).collect()
        } else {
            raw_clusters
        };
        let cluster_agreement = if cluster_flipped {
            1.0 - raw_agreement
        } else {
            raw_agreement
        };

        // Project the pre-balancing rows for scatter reporting.
        let n_components = config.pca_components.min(
            train_set
                .features
                .first()
                .map_or(config.pca_components, Vec::len),
        );
        let pca = Pca::fit(&std_train, n_components)?;
        let projected = pca.project(&std_train)?;
        let pca_points = projected
            .into_iter()
            .zip(&train_set.labels)
            .zip(&cluster_labels)
            .zip(&train_set.info)
            .map(|(((coords, &label), &cluster), info)| PcaPoint {
                coords,
                label,
                cluster,
                scenario: info.scenario,
                position: info.position_index,
            })
            .collect();

        // Balance the cluster-labelled rows. Synthetic rows inherit the
        // provenance of their base row; only features and labels matter to
        // the fits.
        let smote_seed = SeedPath::new(config.master_seed)
            .with_str("smote")
            .with_str(regime.name())
            .seed();
        let balanced = smote_balance(&std_train, &cluster_labels, config.smote_k, smote_seed)?;
        let mut balanced_info = train_set.info.clone();
        for record in &balanced.records {
            balanced_info.push(train_set.info[record.base_index].clone());
        }
        let balanced_train = Dataset {
            features: balanced.features,
            labels: balanced.labels,
            info: balanced_info,
        };

        let mut svm_lambda = None;
        for &algorithm in &config.algorithms {
            let train_seed = SeedPath::new(config.master_seed)
                .with_str("train")
                .with_str(regime.name())
                .with_str(algorithm.name())
                .seed();
            let model = train(
                algorithm,
                &balanced_train,
                &standardizer,
                &config.hyper,
                train_seed,
            )?;
            if let Model::Svm(svm) = &model.model {
                svm_lambda = Some(svm.lambda);
            }
            for (scenario, test_set) in Scenario::all().into_iter().zip(&tests) {
                let std_test = Dataset {
                    features: standardizer.transform(&test_set.features)?,
                    labels: test_set.labels.clone(),
                    info: test_set.info.clone(),
                };
                let metrics = evaluate(&model, &std_test)?;
                cells.push(StudyCell {
                    regime,
                    algorithm,
                    test_scenario: scenario,
                    metrics,
                });
            }
        }

        regimes.push(RegimeArtifacts {
            regime,
            train_rows: train_set.len(),
            balanced_rows: balanced_train.len(),
            cluster_agreement,
            cluster_flipped,
            svm_lambda,
            explained_variance: pca.explained_variance.clone(),
            pca_points,
        });
    }
    Ok(StudyReport { cells, regimes })
}

/// Unsupervised device labels for the training rows, clustered one
/// capture group at a time.
///
/// A capture group is a (scenario, position) pair. Grouping matters in the
/// mixed regimes: position changes shift all four peaks of *both* devices
/// together, and after standardization those common shifts can dominate
/// the much smaller device gap, letting a whole-set clustering split by
/// position instead of by device. Within one group the channel is common
/// to both devices, so the device gap is the only bimodal structure left.
///
/// Cross-group consistency comes from the label convention of
/// [`kmeans_label`]: cluster 0 is the lower-first-feature cluster, and
/// since a position shifts both devices' first features equally, the same
/// physical device ends up below the other in every group. A group too
/// small to cluster (fewer than two rows) is assigned cluster 0 outright.
fn cluster_by_capture_group(
    std_train: &[Vec<f64>],
    train_set: &Dataset,
    master_seed: u64,
    regime: Regime,
) -> Result<Vec<usize>, StudyError> {
    use std::collections::BTreeMap;
    let mut groups: BTreeMap<(&'static str, usize), Vec<usize>> = BTreeMap::new();
    for (row, info) in train_set.info.iter().enumerate() {
        groups
            .entry((info.scenario.name(), info.position_index))
            .or_default()
            .push(row);
    }
    let mut labels = vec![0usize; std_train.len()];
    for ((scenario_name, position), rows) in groups {
        if rows.len() < 2 {
            continue;
        }
        let group_rows: Vec<Vec<f64>> = rows.iter().map(|&r| std_train[r].clone()).collect();
        let group_seed = SeedPath::new(master_seed)
            .with_str("kmeans")
            .with_str(regime.name())
            .with_str(scenario_name)
            .with_u64(position as u64)
            .seed();
        let clustering = kmeans_label(&group_rows, group_seed)?;
        for (&row, &assignment) in rows.iter().zip(&clustering.assignments) {
            labels[row] = assignment;
        }
    }
    Ok(labels)
}

/// Builds the training rows for one regime from the per-scenario splits
/// (ordered static, small, large).
fn assemble_training_set(
    config: &StudyConfig,
    regime: Regime,
    trains: &[Dataset],
) -> Result<Dataset, StudyError> {
    Ok(match regime {
        Regime::StaticOnly => trains[0].clone(),
        Regime::Increased => {
            let mut parts = vec![trains[0].clone()];
            for (scenario, train) in Scenario::all().into_iter().zip(trains).skip(1) {
                let mut counts = std::collections::HashMap::new();
                for &label in &train.labels {
                    *counts.entry(label).or_insert(0usize) += 1;
                }
                let available = counts.values().copied().min().unwrap_or(0);
                let per_class = config.increased_per_class.min(available);
                let all_rows: Vec<usize> = (0..train.len()).collect();
                let subsample_seed = SeedPath::new(config.master_seed)
                    .with_str("increase")
                    .with_str(scenario.name())
                    .seed();
                let keep = subsample_per_class(train, &all_rows, per_class, subsample_seed)?;
                parts.push(train.select(&keep));
            }
            let refs: Vec<&Dataset> = parts.iter().collect();
            Dataset::concat(&refs)
        }
        Regime::Combined => {
            let refs: Vec<&Dataset> = trains.iter().collect();
            Dataset::concat(&refs)
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// A scaled-down configuration that keeps every pipeline stage live.
    fn mini_config() -> StudyConfig {
        let mut config = StudyConfig::default();
        config.params.samples_per_position = 30;
        config.increased_per_class = 20;
        config.algorithms = vec![Algorithm::Perceptron, Algorithm::Knn, Algorithm::DecisionTree];
        config.hyper.svm_iterations = 200;
        config
    }

    #[test]
    fn report_has_the_full_grid_in_order() {
        let report = run_study(&mini_config()).unwrap();
        assert_eq!(report.cells.len(), 3 * 3 * 3);
        assert_eq!(report.regimes.len(), 3);
        let mut index = 0;
        for regime in Regime::ALL {
            for algorithm in [Algorithm::Perceptron, Algorithm::Knn, Algorithm::DecisionTree] {
                for scenario in Scenario::all() {
                    let cell = &report.cells[index];
                    assert_eq!(cell.regime, regime);
                    assert_eq!(cell.algorithm, algorithm);
                    assert_eq!(cell.test_scenario, scenario);
                    index += 1;
                }
            }
        }
    }

    #[test]
    fn clusters_recover_device_identity_and_static_models_classify_well() {
        let report = run_study(&mini_config()).unwrap();
        for artifacts in &report.regimes {
            assert!(
                artifacts.cluster_agreement >= 0.99,
                "{} agreement {}",
                artifacts.regime,
                artifacts.cluster_agreement
            );
            assert_eq!(artifacts.balanced_rows % 2, 0);
            assert!(artifacts.balanced_rows >= artifacts.train_rows);
            assert_eq!(artifacts.pca_points.len(), artifacts.train_rows);
        }
        for algorithm in [Algorithm::Perceptron, Algorithm::Knn, Algorithm::DecisionTree] {
            let acc = report
                .accuracy(Regime::StaticOnly, algorithm, Scenario::Static)
                .unwrap();
            assert!(acc >= 0.95, "{algorithm} static accuracy {acc}");
        }
    }

    #[test]
    fn reruns_are_bit_identical() {
        let config = mini_config();
        let a = run_study(&config).unwrap();
        let b = run_study(&config).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn invalid_configurations_are_rejected_up_front() {
        let mut one_device = mini_config();
        one_device.devices.truncate(1);
        assert!(matches!(
            run_study(&one_device),
            Err(StudyError::InvalidConfig(_))
        ));

        let mut no_algorithms = mini_config();
        no_algorithms.algorithms.clear();
        assert!(matches!(
            run_study(&no_algorithms),
            Err(StudyError::InvalidConfig(_))
        ));

        let mut bad_fraction = mini_config();
        bad_fraction.test_fraction = 1.5;
        assert!(matches!(
            run_study(&bad_fraction),
            Err(StudyError::InvalidConfig(_))
        ));
    }

    #[test]
    fn increased_regime_sits_between_static_and_combined_in_size() {
        let report = run_study(&mini_config()).unwrap();
        let sizes: Vec<usize> = report.regimes.iter().map(|r| r.train_rows).collect();
        assert!(sizes[0] < sizes[1], "static {} vs increased {}", sizes[0], sizes[1]);
        assert!(sizes[1] < sizes[2], "increased {} vs combined {}", sizes[1], sizes[2]);
    }
}
