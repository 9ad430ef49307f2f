//! Distance-weighted k-nearest neighbours.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use ndarray::{Array2, ArrayView2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{LabeledDataset, Model, TrainedClassifier};
use crate::{Error, Result};

/// Guards the `1 / d^2` weight at zero distance.
pub const KNN_EPSILON: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnModel {
    pub k: usize,
    pub class_count: usize,
    pub points: Array2<f64>,
    pub labels: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Neighbour {
    d2: f64,
    index: usize,
}

impl Eq for Neighbour {}

impl Ord for Neighbour {
    fn cmp(&self, other: &Self) -> Ordering {
        self.d2.total_cmp(&other.d2).then(self.index.cmp(&other.index))
    }
}

impl PartialOrd for Neighbour {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

pub fn knn_train(data: &LabeledDataset, k: usize) -> Result<TrainedClassifier> {
    let (points, labels) = data.train_split();
    if k == 0 {
        return Err(Error::InvalidConfig("k must be at least 1".into()));
    }
    if k > labels.len() {
        return Err(Error::KTooLarge { k, n: labels.len() });
    }
    let class_count = data.class_count();
    Ok(TrainedClassifier {
        class_count,
        dim: data.dim(),
        model: Model::Knn(KnnModel { k, class_count, points, labels }),
    })
}

impl KnnModel {
    /// The `k` nearest training rows to `query`, closest first; equal
    /// distances keep the lower training index.
    pub fn neighbours(&self, query: &[f64]) -> Vec<(usize, f64)> {
        let mut heap = BinaryHeap::with_capacity(self.k + 1);
        for (index, row) in self.points.rows().into_iter().enumerate() {
            let d2: f64 = row.iter().zip(query).map(|(a, b)| (a - b) * (a - b)).sum();
            let cand = Neighbour { d2, index };
            if heap.len() < self.k {
                heap.push(cand);
            } else if cand < *heap.peek().expect("k >= 1") {
                heap.pop();
                heap.push(cand);
            }
        }
        heap.into_sorted_vec().into_iter().map(|n| (n.index, n.d2)).collect()
    }

    /// Normalized per-class sums of `1 / (eps + d^2)` over the neighbours.
    pub fn score_one(&self, query: &[f64]) -> Vec<f64> {
        let mut s = vec![0.0; self.class_count];
        for (i, d2) in self.neighbours(query) {
            s[self.labels[i]] += 1.0 / (KNN_EPSILON + d2);
        }
        let total: f64 = s.iter().sum();
        s.iter_mut().for_each(|v| *v /= total);
        s
    }

    pub(crate) fn scores(&self, points: ArrayView2<'_, f64>) -> Array2<f64> {
        let rows: Vec<Vec<f64>> = (0..points.nrows())
            .into_par_iter()
            .map(|i| self.score_one(&points.row(i).to_vec()))
            .collect();
        Array2::from_shape_fn((rows.len(), self.class_count), |(i, j)| rows[i][j])
    }
}
