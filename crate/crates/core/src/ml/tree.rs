//! Binary classification tree grown greedily on Gini impurity.
//!
//! Each split minimizes the size-weighted Gini impurity of its two
//! children over every feature and every midpoint between consecutive
//! distinct sorted values. There is no pruning and, by default, no depth
//! cap: growth stops only at pure nodes, at nodes too small to split under
//! the minimum-leaf rule, or where every feature is constant. A node
//! splits whenever a valid candidate exists even if impurity does not
//! drop, because zero-gain splits (as at the root of XOR-shaped data) are
//! often what make the classes separable one level down; termination is
//! still guaranteed since children are strictly smaller.
//!
//! Determinism: features are visited in a fixed order and a strictly
//! better score is required to replace the incumbent, so score ties
//! resolve to the earliest feature and the smallest threshold. The same
//! grower serves the random forest, which passes bootstrap row indices
//! and a per-split feature subsample.

use rand_chacha::ChaCha8Rng;

use super::MlError;

/// One node of the fitted tree, stored in an arena.
#[derive(Debug, Clone)]
enum Node {
    Leaf {
        label: usize,
    },
    Split {
        feature: usize,
        /// Midpoint between two observed values; rows with
        /// `x[feature] <= threshold` descend left.
        threshold: f64,
        left: usize,
        right: usize,
    },
}

/// A fitted classification tree.
#[derive(Debug, Clone)]
pub struct DecisionTree {
    nodes: Vec<Node>,
    n_features: usize,
}

impl DecisionTree {
    /// Grows a tree on the full data with every feature available at every
    /// split.
    ///
    /// `min_leaf` is the smallest row count either side of a split may
    /// have; `max_depth` of `Some(0)` degenerates to a single majority
    /// leaf. Single-class input is allowed (it yields one leaf) so the
    /// same path can serve bootstrap resamples.
    ///
    /// # Errors
    ///
    /// [`MlError::EmptyTrainingSet`], [`MlError::NonBinaryLabels`], and
    /// [`MlError::InvalidHyperparameter`] for `min_leaf == 0`.
    pub fn fit(
        x: &[Vec<f64>],
        y: &[usize],
        min_leaf: usize,
        max_depth: Option<usize>,
    ) -> Result<Self, MlError> {
        let rows: Vec<usize> = (0..x.len()).collect();
        Self::grow(x, y, rows, min_leaf, max_depth, None, &mut None)
    }

    /// Core grower shared with the forest: explicit row multiset (so
    /// bootstrap duplicates are fine) and an optional per-split feature
    /// subsample of size `mtry` drawn from `rng`.
    pub(crate) fn grow(
        x: &[Vec<f64>],
        y: &[usize],
        rows: Vec<usize>,
        min_leaf: usize,
        max_depth: Option<usize>,
        mtry: Option<usize>,
        rng: &mut Option<&mut ChaCha8Rng>,
    ) -> Result<Self, MlError> {
        if x.is_empty() || rows.is_empty() {
            return Err(MlError::EmptyTrainingSet);
        }
        if min_leaf == 0 {
            return Err(MlError::InvalidHyperparameter(
                "tree minimum leaf size must be at least 1".into(),
            ));
        }
        for &row in &rows {
            if y[row] > 1 {
                return Err(MlError::NonBinaryLabels {
                    row,
                    label: y[row],
                });
            }
        }
        let n_features = x[0].len();
        let mut tree = DecisionTree {
            nodes: Vec::new(),
            n_features,
        };
        tree.nodes.push(Node::Leaf { label: 0 });
        let mut work = vec![(0usize, rows, 0usize)];
        while let Some((slot, rows, depth)) = work.pop() {
            let counts = class_counts(y, &rows);
            let depth_capped = max_depth.map_or(false, |cap| depth >= cap);
            let splittable = rows.len() >= 2 * min_leaf && counts[0] > 0 && counts[1] > 0;
            let candidate = if depth_capped || !splittable {
                None
            } else {
                best_split(x, y, &rows, min_leaf, mtry, rng)
            };
            match candidate {
                None => {
                    tree.nodes[slot] = Node::Leaf {
                        label: majority(counts),
                    };
                }
                Some((feature, threshold)) => {
                    let (left_rows, right_rows): (Vec<usize>, Vec<usize>) = rows
                        .into_iter()
                        .partition(|&r| x[r][feature] <= threshold);
                    let left = tree.nodes.len();
                    tree.nodes.push(Node::Leaf { label: 0 });
                    let right = tree.nodes.len();
                    tree.nodes.push(Node::Leaf { label: 0 });
                    tree.nodes[slot] = Node::Split {
                        feature,
                        threshold,
                        left,
                        right,
                    };
                    work.push((left, left_rows, depth + 1));
                    work.push((right, right_rows, depth + 1));
                }
            }
        }
        Ok(tree)
    }

    /// Walks the tree to a leaf label.
    pub fn predict(&self, x: &[f64]) -> usize {
        let mut index = 0;
        loop {
            match &self.nodes[index] {
                Node::Leaf { label } => return *label,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    index = if x[*feature] <= *threshold {
                        *left
                    } else {
                        *right
                    };
                }
            }
        }
    }

    /// Total number of nodes, leaves included.
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Number of leaf nodes.
    pub fn leaf_count(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, Node::Leaf { .. }))
            .count()
    }

    /// Input dimension the tree was grown on.
    pub fn n_features(&self) -> usize {
        self.n_features
    }
}

fn class_counts(y: &[usize], rows: &[usize]) -> [usize; 2] {
    let mut counts = [0usize; 2];
    for &r in rows {
        counts[y[r]] += 1;
    }
    counts
}

/// Majority label; an exact tie resolves to class 0.
fn majority(counts: [usize; 2]) -> usize {
    usize::from(counts[1] > counts[0])
}

/// Finds the (feature, threshold) pair minimizing child-weighted Gini
/// impurity, or `None` when no feature offers two distinct values with
/// enough rows on both sides.
fn best_split(
    x: &[Vec<f64>],
    y: &[usize],
    rows: &[usize],
    min_leaf: usize,
    mtry: Option<usize>,
    rng: &mut Option<&mut ChaCha8Rng>,
) -> Option<(usize, f64)> {
    let n_features = x[0].len();
    let features: Vec<usize> = match (mtry, rng.as_deref_mut()) {
        (Some(m), Some(rng)) => {
            let mut sampled =
                rand::seq::index::sample(rng, n_features, m.min(n_features)).into_vec();
            // Ascending order makes score ties resolve to the lowest
            // feature index regardless of sampling order.
            sampled.sort_unstable();
            sampled
        }
        _ => (0..n_features).collect(),
    };
    let n = rows.len();
    let mut best: Option<(f64, usize, f64)> = None;
    let mut column: Vec<(f64, usize)> = Vec::with_capacity(n);
    for &feature in &features {
        column.clear();
        column.extend(rows.iter().map(|&r| (x[r][feature], y[r])));
        column.sort_by(|a, b| a.0.total_cmp(&b.0));
        let total = {
            let mut c = [0usize; 2];
            for &(_, label) in &column {
                c[label] += 1;
            }
            c
        };
        let mut left = [0usize; 2];
        for i in 1..n {
            left[column[i - 1].1] += 1;
            if column[i].0 <= column[i - 1].0 {
                continue;
            }
            if i < min_leaf || n - i < min_leaf {
                continue;
            }
            let right = [total[0] - left[0], total[1] - left[1]];
            let score = weighted_gini(left, right);
            let threshold = 0.5 * (column[i - 1].0 + column[i].0);
            if best.map_or(true, |(s, _, _)| score < s) {
                best = Some((score, feature, threshold));
            }
        }
    }
    best.map(|(_, feature, threshold)| (feature, threshold))
}

/// Size-weighted Gini impurity of a candidate split, up to the constant
/// factor 1/n shared by all candidates at a node.
fn weighted_gini(left: [usize; 2], right: [usize; 2]) -> f64 {
    let side = |c: [usize; 2]| {
        let n = (c[0] + c[1]) as f64;
        let p0 = c[0] as f64 / n;
        let p1 = c[1] as f64 / n;
        n * (1.0 - p0 * p0 - p1 * p1)
    };
    side(left) + side(right)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn sorted_line_splits_at_the_class_border() {
        let x = vec![vec![1.0], vec![2.0], vec![3.0], vec![4.0]];
        let y = vec![0, 0, 1, 1];
        let tree = DecisionTree::fit(&x, &y, 1, None).unwrap();
        assert_eq!(tree.node_count(), 3);
        assert_eq!(tree.predict(&[0.0]), 0);
        assert_eq!(tree.predict(&[2.4]), 0);
        assert_eq!(tree.predict(&[2.6]), 1);
        assert_eq!(tree.predict(&[9.0]), 1);
    }

    #[test]
    fn xor_needs_a_zero_gain_root_split_and_still_fits_exactly() {
        let x = vec![
            vec![0.0, 0.0],
            vec![1.0, 1.0],
            vec![0.0, 1.0],
            vec![1.0, 0.0],
        ];
        let y = vec![0, 0, 1, 1];
        let tree = DecisionTree::fit(&x, &y, 1, None).unwrap();
        for (row, &label) in x.iter().zip(&y) {
            assert_eq!(tree.predict(row), label);
        }
    }

    #[test]
    fn consistent_random_data_is_memorized_perfectly() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x: Vec<Vec<f64>> = (0..200)
            .map(|_| (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let y: Vec<usize> = (0..200).map(|_| rng.gen_range(0..2)).collect();
        let tree = DecisionTree::fit(&x, &y, 1, None).unwrap();
        for (row, &label) in x.iter().zip(&y) {
            assert_eq!(tree.predict(row), label);
        }
    }

    #[test]
    fn min_leaf_blocks_undersized_splits() {
        let x = vec![vec![1.0], vec![2.0], vec![3.0], vec![4.0]];
        let y = vec![0, 0, 1, 1];
        // min_leaf 2 still allows the balanced 2/2 split...
        let tree = DecisionTree::fit(&x, &y, 2, None).unwrap();
        assert_eq!(tree.node_count(), 3);
        // ...but min_leaf 3 cannot put 3 rows on both sides of 4.
        let stump = DecisionTree::fit(&x, &y, 3, None).unwrap();
        assert_eq!(stump.node_count(), 1);
    }

    #[test]
    fn depth_cap_zero_gives_a_majority_leaf() {
        let x = vec![vec![1.0], vec![2.0], vec![3.0]];
        let y = vec![1, 1, 0];
        let tree = DecisionTree::fit(&x, &y, 1, Some(0)).unwrap();
        assert_eq!(tree.node_count(), 1);
        for probe in [-5.0, 2.0, 9.0] {
            assert_eq!(tree.predict(&[probe]), 1);
        }
    }

    #[test]
    fn conflicting_duplicates_fall_back_to_a_tied_leaf_of_class_zero() {
        // Identical rows with opposite labels admit no valid split; the
        // 1-1 tie at the leaf resolves to class 0.
        let x = vec![vec![7.0], vec![7.0]];
        let y = vec![1, 0];
        let tree = DecisionTree::fit(&x, &y, 1, None).unwrap();
        assert_eq!(tree.node_count(), 1);
        assert_eq!(tree.predict(&[7.0]), 0);
    }

    #[test]
    fn single_class_input_yields_one_leaf() {
        let x = vec![vec![0.0], vec![1.0]];
        let y = vec![1, 1];
        let tree = DecisionTree::fit(&x, &y, 1, None).unwrap();
        assert_eq!(tree.node_count(), 1);
        assert_eq!(tree.predict(&[0.5]), 1);
    }

    #[test]
    fn rejects_empty_input_bad_labels_and_zero_min_leaf() {
        assert!(DecisionTree::fit(&[], &[], 1, None).is_err());
        assert!(DecisionTree::fit(&[vec![0.0]], &[4], 1, None).is_err());
        assert!(DecisionTree::fit(&[vec![0.0]], &[0], 0, None).is_err());
    }

    #[test]
    fn score_ties_resolve_to_the_earliest_feature() {
        // Both features separate the classes perfectly, so their scores
        // tie; the split must use feature 0.
        let x = vec![vec![0.0, 10.0], vec![1.0, 11.0]];
        let y = vec![0, 1];
        let tree = DecisionTree::fit(&x, &y, 1, None).unwrap();
        match &tree.nodes[0] {
            Node::Split { feature, .. } => assert_eq!(*feature, 0),
            Node::Leaf { .. } => panic!("expected a split at the root"),
        }
    }
}
