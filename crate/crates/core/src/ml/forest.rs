//! Random forest: bagged Gini trees with per-split feature subsampling.
//!
//! Each tree is grown on a bootstrap resample (n draws with replacement)
//! and considers only `floor(sqrt(d))` features at every split, the usual
//! decorrelation recipe. Every tree gets its own stream seeded from the
//! forest seed and the tree index, so forests are reproducible and trees
//! are independent. Prediction is an unweighted majority vote with ties
//! going to class 0.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::tree::DecisionTree;
use super::{Hyperparams, MlError};
use crate::seed::SeedPath;

/// A fitted forest.
#[derive(Debug, Clone)]
pub struct RandomForest {
    /// The bagged trees, in training order.
    pub trees: Vec<DecisionTree>,
    /// Features considered per split.
    pub mtry: usize,
}

impl RandomForest {
    /// Majority vote over all trees; see [`majority_vote`].
    pub fn predict(&self, x: &[f64]) -> usize {
        let votes: Vec<usize> = self.trees.iter().map(|t| t.predict(x)).collect();
        majority_vote(&votes)
    }
}

/// Unweighted majority of binary votes; an exact tie resolves to class 0.
pub fn majority_vote(votes: &[usize]) -> usize {
    let ones = votes.iter().filter(|&&v| v == 1).count();
    usize::from(2 * ones > votes.len())
}

/// Trains `hyper.forest_trees` bootstrap trees.
///
/// Tree `t` draws its bootstrap rows and split-time feature subsets from a
/// stream seeded by `(seed, "tree", t)`, so adding trees never perturbs
/// the ones already grown.
///
/// # Errors
///
/// [`MlError::EmptyTrainingSet`], [`MlError::InvalidHyperparameter`] for a
/// zero tree count, and tree-fit errors.
pub fn train_forest(
    x: &[Vec<f64>],
    y: &[usize],
    hyper: &Hyperparams,
    seed: u64,
) -> Result<RandomForest, MlError> {
    if x.is_empty() {
        return Err(MlError::EmptyTrainingSet);
    }
    if hyper.forest_trees == 0 {
        return Err(MlError::InvalidHyperparameter(
            "forest needs at least one tree".into(),
        ));
    }
    let n = x.len();
    let d = x[0].len();
    let mtry = ((d as f64).sqrt().floor() as usize).max(1);
    let mut trees = Vec::with_capacity(hyper.forest_trees);
    for t in 0..hyper.forest_trees {
        let tree_seed = SeedPath::new(seed)
            .with_str("tree")
            .with_u64(t as u64)
            .seed();
        let mut rng = ChaCha8Rng::seed_from_u64(tree_seed);
        let rows: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
        let mut rng_opt = Some(&mut rng);
        trees.push(DecisionTree::grow(
            x,
            y,
            rows,
            hyper.tree_min_leaf,
            hyper.tree_max_depth,
            Some(mtry),
            &mut rng_opt,
        )?);
    }
    Ok(RandomForest { trees, mtry })
}
