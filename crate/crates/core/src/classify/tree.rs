//! CART classification trees with Gini impurity, and bootstrap-aggregated
//! ensembles of them.
//!
//! Trees grow breadth-first, so limiting `max_splits` keeps the shallowest
//! splits and a larger limit only ever refines a smaller tree.

use std::collections::VecDeque;

use ndarray::{Array2, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{argmax, LabeledDataset, Model, TrainedClassifier};
use crate::derive_seed;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Leaf {
        /// Class frequencies of the training rows that reached the leaf.
        distribution: Vec<f64>,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub class_count: usize,
    /// `nodes[0]` is the root.
    pub nodes: Vec<Node>,
}

fn gini(counts: &[usize], total: usize) -> f64 {
    if total == 0 {
        return 0.0;
    }
    let t = total as f64;
    1.0 - counts.iter().map(|&c| (c as f64 / t).powi(2)).sum::<f64>()
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    impurity: f64,
}

/// Lowest weighted child impurity over all axis-aligned thresholds that
/// leave at least `min_leaf` rows on each side. Ties keep the lower feature
/// and then the lower threshold.
fn best_split(x: ArrayView2<'_, f64>, y: &[usize], rows: &[usize], k: usize, min_leaf: usize) -> Option<BestSplit> {
    let n = rows.len();
    let mut best: Option<BestSplit> = None;
    let mut order = rows.to_vec();
    for f in 0..x.ncols() {
        order.sort_by(|&a, &b| x[[a, f]].total_cmp(&x[[b, f]]).then(a.cmp(&b)));
        let mut left = vec![0usize; k];
        let mut right = vec![0usize; k];
        for &r in &order {
            right[y[r]] += 1;
        }
        for pos in 1..n {
            let moved = order[pos - 1];
            left[y[moved]] += 1;
            right[y[moved]] -= 1;
            let (lo, hi) = (x[[moved, f]], x[[order[pos], f]]);
            if lo == hi || pos < min_leaf || n - pos < min_leaf {
                continue;
            }
            let imp = (pos as f64 * gini(&left, pos) + (n - pos) as f64 * gini(&right, n - pos)) / n as f64;
            if best.as_ref().is_none_or(|b| imp < b.impurity) {
                let mid = lo + (hi - lo) / 2.0;
                best = Some(BestSplit { feature: f, threshold: mid, impurity: imp });
            }
        }
    }
    best
}

impl DecisionTree {
    pub fn fit(
        x: ArrayView2<'_, f64>,
        y: &[usize],
        class_count: usize,
        max_splits: usize,
        min_leaf: usize,
    ) -> Result<Self> {
        if y.is_empty() {
            return Err(Error::InvalidDataset("empty training split".into()));
        }
        let min_leaf = min_leaf.max(1);
        let leaf = |rows: &[usize]| {
            let mut d = vec![0.0; class_count];
            for &r in rows {
                d[y[r]] += 1.0;
            }
            let n = rows.len() as f64;
            d.iter_mut().for_each(|v| *v /= n);
            Node::Leaf { distribution: d }
        };
        let all: Vec<usize> = (0..y.len()).collect();
        let mut nodes = vec![leaf(&all)];
        let mut queue = VecDeque::from([(0usize, all)]);
        let mut splits = 0;
        while let Some((id, rows)) = queue.pop_front() {
            if splits >= max_splits {
                break;
            }
            let first = y[rows[0]];
            if rows.iter().all(|&r| y[r] == first) || rows.len() < 2 * min_leaf {
                continue;
            }
            let Some(split) = best_split(x, y, &rows, class_count, min_leaf) else {
                continue;
            };
            let (l, r): (Vec<usize>, Vec<usize>) =
                rows.iter().partition(|&&i| x[[i, split.feature]] <= split.threshold);
            let (li, ri) = (nodes.len(), nodes.len() + 1);
            nodes.push(leaf(&l));
            nodes.push(leaf(&r));
            nodes[id] = Node::Split { feature: split.feature, threshold: split.threshold, left: li, right: ri };
            queue.push_back((li, l));
            queue.push_back((ri, r));
            splits += 1;
        }
        Ok(Self { class_count, nodes })
    }

    pub fn split_count(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Split { .. })).count()
    }

    pub fn leaf_distribution(&self, point: &[f64]) -> &[f64] {
        let mut id = 0;
        loop {
            match &self.nodes[id] {
                Node::Leaf { distribution } => return distribution,
                Node::Split { feature, threshold, left, right } => {
                    id = if point[*feature] <= *threshold { *left } else { *right };
                }
            }
        }
    }

    pub(crate) fn scores(&self, points: ArrayView2<'_, f64>) -> Array2<f64> {
        let mut out = Array2::zeros((points.nrows(), self.class_count));
        for (i, row) in points.rows().into_iter().enumerate() {
            let p = row.to_vec();
            for (j, v) in self.leaf_distribution(&p).iter().enumerate() {
                out[[i, j]] = *v;
            }
        }
        out
    }
}

pub fn tree_train(data: &LabeledDataset, max_splits: usize, min_leaf: usize) -> Result<TrainedClassifier> {
    let (x, y) = data.train_split();
    let tree = DecisionTree::fit(x.view(), &y, data.class_count(), max_splits, min_leaf)?;
    Ok(TrainedClassifier {
        class_count: data.class_count(),
        dim: data.dim(),
        model: Model::Tree(tree),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaggedTrees {
    pub class_count: usize,
    pub trees: Vec<DecisionTree>,
}

/// Resampling used for each ensemble member.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Bootstrap {
    /// `n` draws with replacement, seeded per tree.
    Resample { seed: u64 },
    /// Every tree sees the training rows unchanged (test hook).
    Identity,
}

/// Ensemble members are grown without a split limit, as deep as the leaves
/// allow.
pub fn bagged_trees_train(data: &LabeledDataset, n_trees: usize, seed: u64) -> Result<TrainedClassifier> {
    bagged_trees_train_with(data, n_trees, usize::MAX, 1, Bootstrap::Resample { seed })
}

pub fn bagged_trees_train_with(
    data: &LabeledDataset,
    n_trees: usize,
    max_splits: usize,
    min_leaf: usize,
    bootstrap: Bootstrap,
) -> Result<TrainedClassifier> {
    if n_trees == 0 {
        return Err(Error::InvalidConfig("n_trees must be at least 1".into()));
    }
    let (x, y) = data.train_split();
    let k = data.class_count();
    let n = y.len();
    let trees = (0..n_trees)
        .map(|t| {
            let rows: Vec<usize> = match bootstrap {
                Bootstrap::Identity => (0..n).collect(),
                Bootstrap::Resample { seed } => {
                    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &format!("tree-{t}")));
                    (0..n).map(|_| rng.random_range(0..n)).collect()
                }
            };
            let xs = x.select(ndarray::Axis(0), &rows);
            let ys: Vec<usize> = rows.iter().map(|&r| y[r]).collect();
            DecisionTree::fit(xs.view(), &ys, k, max_splits, min_leaf)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TrainedClassifier {
        class_count: k,
        dim: data.dim(),
        model: Model::Bagged(BaggedTrees { class_count: k, trees }),
    })
}

impl BaggedTrees {
    /// Vote fractions; each tree votes for its leaf's majority class.
    pub(crate) fn scores(&self, points: ArrayView2<'_, f64>) -> Array2<f64> {
        let mut out = Array2::zeros((points.nrows(), self.class_count));
        let w = 1.0 / self.trees.len() as f64;
        for (i, row) in points.rows().into_iter().enumerate() {
            let p = row.to_vec();
            for t in &self.trees {
                out[[i, argmax(t.leaf_distribution(&p).iter().copied())]] += w;
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand_distr::{Distribution, Normal};

    fn data(x: Array2<f64>, y: Vec<usize>) -> LabeledDataset {
        LabeledDataset::all_train(x, y).unwrap()
    }

    fn accuracy(m: &TrainedClassifier, x: &Array2<f64>, y: &[usize]) -> f64 {
        let p = m.predict(x.view()).unwrap().labels;
        p.iter().zip(y).filter(|(a, b)| a == b).count() as f64 / y.len() as f64
    }

    #[test]
    fn one_dimensional_split() {
        let x = array![[1.0], [2.0], [8.0], [9.0]];
        let y = vec![0, 0, 1, 1];
        let m = tree_train(&data(x.clone(), y.clone()), 100, 1).unwrap();
        let Model::Tree(t) = &m.model else { unreachable!() };
        assert_eq!(t.split_count(), 1);
        let Node::Split { threshold, .. } = t.nodes[0] else { panic!("root is a leaf") };
        assert!(threshold > 2.0 && threshold < 8.0);
        assert_eq!(accuracy(&m, &x, &y), 1.0);
    }

    #[test]
    fn pure_data_is_one_leaf() {
        let m = tree_train(&data(array![[1.0], [5.0], [3.0]], vec![0, 0, 0]), 100, 1).unwrap();
        let Model::Tree(t) = &m.model else { unreachable!() };
        assert_eq!(t.nodes.len(), 1);
    }

    #[test]
    fn xor_needs_three_splits() {
        let x = array![[0.0, 0.0], [1.0, 1.0], [0.0, 1.0], [1.0, 0.0]];
        let y = vec![0, 0, 1, 1];
        let d = data(x.clone(), y.clone());
        assert_eq!(accuracy(&tree_train(&d, 3, 1).unwrap(), &x, &y), 1.0);
        assert!(accuracy(&tree_train(&d, 1, 1).unwrap(), &x, &y) < 1.0);
    }

    #[test]
    fn min_leaf_respected() {
        let x = array![[1.0], [2.0], [3.0], [4.0], [5.0]];
        let m = tree_train(&data(x, vec![0, 1, 0, 1, 0]), 100, 2).unwrap();
        let Model::Tree(t) = &m.model else { unreachable!() };
        let leaves = t.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count();
        assert!(leaves <= 2);
    }

    fn noisy_blobs(seed: u64, n: usize, classes: usize) -> (Array2<f64>, Vec<usize>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = Normal::new(0.0, 1.0).unwrap();
        let y: Vec<usize> = (0..n).map(|i| i % classes).collect();
        let x = Array2::from_shape_fn((n, 2), |(i, _)| 1.5 * y[i] as f64 + g.sample(&mut rng));
        (x, y)
    }

    #[test]
    fn accuracy_monotone_in_splits() {
        let (x, y) = noisy_blobs(3, 120, 3);
        let d = data(x.clone(), y.clone());
        let mut last = 0.0;
        for s in [0, 1, 2, 4, 8, 16, 32, 64, 128] {
            let a = accuracy(&tree_train(&d, s, 1).unwrap(), &x, &y);
            assert!(a >= last, "{s}: {a} < {last}");
            last = a;
        }
        assert_eq!(last, 1.0);
    }

    #[test]
    fn identity_bootstrap_single_tree_equals_tree() {
        let (x, y) = noisy_blobs(4, 60, 3);
        let d = data(x.clone(), y);
        let single = tree_train(&d, usize::MAX, 1).unwrap();
        let bag = bagged_trees_train_with(&d, 1, usize::MAX, 1, Bootstrap::Identity).unwrap();
        let Model::Bagged(b) = &bag.model else { unreachable!() };
        let Model::Tree(t) = &single.model else { unreachable!() };
        assert_eq!(&b.trees[0], t);
        assert_eq!(single.predict(x.view()).unwrap().labels, bag.predict(x.view()).unwrap().labels);
    }

    #[test]
    fn vote_fractions_sum_to_one_and_are_seeded() {
        let (x, y) = noisy_blobs(5, 90, 3);
        let d = data(x.clone(), y);
        let a = bagged_trees_train(&d, 11, 42).unwrap();
        let p = a.predict(x.view()).unwrap();
        for r in p.scores.rows() {
            assert!((r.sum() - 1.0).abs() < 1e-12);
        }
        assert_eq!(a, bagged_trees_train(&d, 11, 42).unwrap());
        assert_ne!(a, bagged_trees_train(&d, 11, 43).unwrap());
    }

    #[test]
    fn bagging_not_worse_than_single_tree() {
        let mut diffs = Vec::new();
        for seed in 0..10 {
            let (x, y) = noisy_blobs(100 + seed, 200, 2);
            let mask: Vec<bool> = (0..200).map(|i| i < 140).collect();
            let d = LabeledDataset::new(x, y, mask).unwrap();
            let (xt, yt) = d.test_split();
            let tree = accuracy(&tree_train(&d, 100, 1).unwrap(), &xt, &yt);
            let bag = accuracy(&bagged_trees_train(&d, 30, seed).unwrap(), &xt, &yt);
            diffs.push(bag - tree);
        }
        let mean = diffs.iter().sum::<f64>() / diffs.len() as f64;
        assert!(mean >= -0.05, "{diffs:?}");
    }
}
