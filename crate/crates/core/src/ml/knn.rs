//! k-nearest-neighbour voting with deterministic tie handling.
//!
//! "Training" stores the (standardized) samples verbatim. Prediction ranks
//! the stored points by squared Euclidean distance — equal distances rank
//! by smaller stored index — and takes a majority vote over the first `k`;
//! a split vote goes to class 0.

use super::MlError;

/// A fitted nearest-neighbour model: the training set plus `k`.
#[derive(Debug, Clone)]
pub struct KnnModel {
    /// Stored feature rows.
    pub points: Vec<Vec<f64>>,
    /// Stored labels, parallel to [`Self::points`].
    pub labels: Vec<usize>,
    /// Neighbours consulted per prediction (clamped to the set size).
    pub k: usize,
}

/// Stores the training set for neighbour voting.
///
/// `k` is clamped to the number of stored samples at predict time, so a
/// `k` larger than the set degrades to a global majority vote.
///
/// # Errors
///
/// [`MlError::EmptyTrainingSet`] and [`MlError::InvalidHyperparameter`]
/// for `k == 0`.
pub fn fit_knn(x: &[Vec<f64>], y: &[usize], k: usize) -> Result<KnnModel, MlError> {
    if x.is_empty() {
        return Err(MlError::EmptyTrainingSet);
    }
    if k == 0 {
        return Err(MlError::InvalidHyperparameter(
            "knn needs at least one neighbour".into(),
        ));
    }
    Ok(KnnModel {
        points: x.to_vec(),
        labels: y.to_vec(),
        k,
    })
}

impl KnnModel {
    /// Majority vote of the `k` nearest stored points.
    pub fn predict(&self, x: &[f64]) -> usize {
        let mut ranked: Vec<(f64, usize)> = self
            .points
            .iter()
            .enumerate()
            .map(|(i, p)| (squared_distance(p, x), i))
            .collect();
        // Sort by distance, then by index so equal distances resolve to the
        // earlier stored sample.
        ranked.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let k = self.k.min(ranked.len());
        let ones = ranked[..k]
            .iter()
            .filter(|&&(_, i)| self.labels[i] == 1)
            .count();
        // Strict majority for class 1; ties go to class 0.
        usize::from(2 * ones > k)
    }
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = x - y;
            d * d
        })
        .sum()
}
