//! Frame classifiers: weighted k-NN, CART, bagged trees, one-vs-one SVM and a
//! two-hidden-layer feed-forward network.
//!
//! Every model predicts a label in `0..K` and a length-`K` score row per
//! query (higher means more likely); the scores feed the ROC analysis.

mod ffnn;
mod knn;
mod svm;
mod tree;

use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub use ffnn::{ffnn_train, FfnnModel, FfnnNetwork};
pub use knn::{knn_train, KnnModel, KNN_EPSILON};
pub use svm::{svm_train, BinarySvm, SvmModel};
pub use tree::{bagged_trees_train, bagged_trees_train_with, tree_train, BaggedTrees, Bootstrap, DecisionTree};

/// Points with dense labels `0..K` and a train/test mask.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub points: Array2<f64>,
    pub labels: Vec<usize>,
    /// `true` marks a training row.
    pub split_mask: Vec<bool>,
}

impl LabeledDataset {
    /// Checks lengths, finiteness, and that every class `0..K` (K = largest
    /// label + 1) has at least one training row.
    pub fn new(points: Array2<f64>, labels: Vec<usize>, split_mask: Vec<bool>) -> Result<Self> {
        let n = points.nrows();
        if labels.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: labels.len() });
        }
        if split_mask.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: split_mask.len() });
        }
        if points.ncols() == 0 {
            return Err(Error::InvalidDataset("points have no columns".into()));
        }
        if points.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidDataset("points contain non-finite values".into()));
        }
        let k = labels.iter().max().map_or(0, |m| m + 1);
        let mut seen = vec![false; k];
        for (&l, &train) in labels.iter().zip(&split_mask) {
            if train {
                seen[l] = true;
            }
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(Error::InvalidDataset(format!("class {missing} has no training rows")));
        }
        Ok(Self { points, labels, split_mask })
    }

    /// Every row is a training row.
    pub fn all_train(points: Array2<f64>, labels: Vec<usize>) -> Result<Self> {
        let n = points.nrows();
        Self::new(points, labels, vec![true; n])
    }

    pub fn class_count(&self) -> usize {
        self.labels.iter().max().map_or(0, |m| m + 1)
    }

    pub fn dim(&self) -> usize {
        self.points.ncols()
    }

    fn subset(&self, train: bool) -> (Array2<f64>, Vec<usize>) {
        let rows: Vec<usize> = (0..self.labels.len()).filter(|&i| self.split_mask[i] == train).collect();
        let labels = rows.iter().map(|&i| self.labels[i]).collect();
        (self.points.select(Axis(0), &rows), labels)
    }

    pub fn train_split(&self) -> (Array2<f64>, Vec<usize>) {
        self.subset(true)
    }

    pub fn test_split(&self) -> (Array2<f64>, Vec<usize>) {
        self.subset(false)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassifierKind {
    #[serde(alias = "knn")]
    WeightedKnn,
    #[serde(alias = "tree")]
    DecisionTree,
    #[serde(alias = "bagged")]
    BaggedTrees,
    #[serde(alias = "svm")]
    FineSvm,
    #[serde(alias = "ffnn")]
    FeedForward,
}

impl ClassifierKind {
    /// Table row order.
    pub const ALL: [ClassifierKind; 5] = [
        ClassifierKind::DecisionTree,
        ClassifierKind::WeightedKnn,
        ClassifierKind::FineSvm,
        ClassifierKind::FeedForward,
        ClassifierKind::BaggedTrees,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ClassifierKind::WeightedKnn => "knn",
            ClassifierKind::DecisionTree => "tree",
            ClassifierKind::BaggedTrees => "bagged",
            ClassifierKind::FineSvm => "svm",
            ClassifierKind::FeedForward => "ffnn",
        }
    }

    /// Row label used in the result tables.
    pub fn table_label(&self) -> &'static str {
        match self {
            ClassifierKind::WeightedKnn => "weighted knn",
            ClassifierKind::DecisionTree => "complex tree",
            ClassifierKind::BaggedTrees => "bagged trees",
            ClassifierKind::FineSvm => "fine svm",
            ClassifierKind::FeedForward => "feed forward",
        }
    }
}

impl fmt::Display for ClassifierKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ClassifierKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['-', '_'], " ").as_str() {
            "knn" | "weighted knn" | "weightedknn" => Ok(ClassifierKind::WeightedKnn),
            "tree" | "complex tree" | "decisiontree" | "decision tree" => Ok(ClassifierKind::DecisionTree),
            "bagged" | "bagged trees" | "baggedtrees" => Ok(ClassifierKind::BaggedTrees),
            "svm" | "fine svm" | "finesvm" => Ok(ClassifierKind::FineSvm),
            "ffnn" | "feed forward" | "feedforward" => Ok(ClassifierKind::FeedForward),
            other => Err(Error::Parse(format!("unknown classifier '{other}'"))),
        }
    }
}

/// Hyper-parameters for all five families; each family reads its own fields.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClassifierParams {
    pub k: usize,
    pub max_splits: usize,
    pub min_leaf: usize,
    pub n_trees: usize,
    /// `None` selects `sqrt(d) / 4`.
    pub kernel_scale: Option<f64>,
    pub box_c: f64,
    pub svm_tol: f64,
    pub svm_max_iter: usize,
    pub hidden: (usize, usize),
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for ClassifierParams {
    fn default() -> Self {
        Self {
            k: 10,
            max_splits: 100,
            min_leaf: 1,
            n_trees: 30,
            kernel_scale: None,
            box_c: 1.0,
            svm_tol: 1e-3,
            svm_max_iter: 1_000_000,
            hidden: (20, 10),
            epochs: 200,
            learning_rate: 0.5,
            batch_size: 16,
            seed: 0,
        }
    }
}

impl ClassifierParams {
    /// Applies `key=value` overrides separated by commas, e.g.
    /// `k=5,hidden=8x4,kernel_scale=0.5`.
    pub fn with_overrides(mut self, spec: &str) -> Result<Self> {
        for item in spec.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let (key, value) = item
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("expected key=value, got '{item}'")))?;
            let value = value.trim();
            let bad = |_| Error::Parse(format!("bad value for {key}: '{value}'"));
            match key.trim() {
                "k" => self.k = value.parse().map_err(bad)?,
                "max_splits" => self.max_splits = value.parse().map_err(bad)?,
                "min_leaf" => self.min_leaf = value.parse().map_err(bad)?,
                "n_trees" => self.n_trees = value.parse().map_err(bad)?,
                "kernel_scale" => {
                    self.kernel_scale = if value == "auto" {
                        None
                    } else {
                        Some(value.parse().map_err(|_| Error::Parse(format!("bad kernel_scale '{value}'")))?)
                    }
                }
                "box_c" => self.box_c = value.parse().map_err(|_| Error::Parse(format!("bad box_c '{value}'")))?,
                "svm_tol" => self.svm_tol = value.parse().map_err(|_| Error::Parse(format!("bad svm_tol '{value}'")))?,
                "svm_max_iter" => self.svm_max_iter = value.parse().map_err(bad)?,
                "hidden" => {
                    let (a, b) = value
                        .split_once(['x', ':'])
                        .ok_or_else(|| Error::Parse(format!("hidden expects AxB, got '{value}'")))?;
                    self.hidden = (a.parse().map_err(bad)?, b.parse().map_err(bad)?);
                }
                "epochs" => self.epochs = value.parse().map_err(bad)?,
                "learning_rate" | "lr" => {
                    self.learning_rate = value.parse().map_err(|_| Error::Parse(format!("bad learning rate '{value}'")))?
                }
                "batch_size" => self.batch_size = value.parse().map_err(bad)?,
                "seed" => self.seed = value.parse().map_err(bad)?,
                other => return Err(Error::Parse(format!("unknown classifier parameter '{other}'"))),
            }
        }
        Ok(self)
    }
}

/// Per-row labels and `n x K` scores.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub labels: Vec<usize>,
    pub scores: Array2<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "model", rename_all = "lowercase")]
pub enum Model {
    Knn(KnnModel),
    Tree(DecisionTree),
    Bagged(BaggedTrees),
    Svm(SvmModel),
    Ffnn(FfnnModel),
}

/// A fitted classifier; immutable and safe to share across threads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedClassifier {
    pub class_count: usize,
    pub dim: usize,
    pub model: Model,
}

impl TrainedClassifier {
    pub fn kind(&self) -> ClassifierKind {
        match self.model {
            Model::Knn(_) => ClassifierKind::WeightedKnn,
            Model::Tree(_) => ClassifierKind::DecisionTree,
            Model::Bagged(_) => ClassifierKind::BaggedTrees,
            Model::Svm(_) => ClassifierKind::FineSvm,
            Model::Ffnn(_) => ClassifierKind::FeedForward,
        }
    }

    pub fn predict(&self, points: ArrayView2<'_, f64>) -> Result<Prediction> {
        if points.ncols() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: points.ncols() });
        }
        let scores = match &self.model {
            Model::Knn(m) => m.scores(points),
            Model::Tree(m) => m.scores(points),
            Model::Bagged(m) => m.scores(points),
            Model::Svm(m) => m.scores(points),
            Model::Ffnn(m) => m.scores(points),
        };
        let labels = scores.rows().into_iter().map(|r| argmax(r.iter().copied())).collect();
        Ok(Prediction { labels, scores })
    }
}

/// Trains the training split of `data` with the family's parameters.
pub fn train(kind: ClassifierKind, data: &LabeledDataset, params: &ClassifierParams) -> Result<TrainedClassifier> {
    match kind {
        ClassifierKind::WeightedKnn => knn_train(data, params.k),
        ClassifierKind::DecisionTree => tree_train(data, params.max_splits, params.min_leaf),
        ClassifierKind::BaggedTrees => bagged_trees_train(data, params.n_trees, params.seed),
        ClassifierKind::FineSvm => svm_train(data, params),
        ClassifierKind::FeedForward => ffnn_train(data, params),
    }
}

/// Index of the first maximum.
pub(crate) fn argmax(values: impl IntoIterator<Item = f64>) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, v) in values.into_iter().enumerate() {
        if v > best.1 {
            best = (i, v);
        }
    }
    best.0
}

/// Per-column z-scoring fitted on training rows; constant columns pass
/// through centred.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Array1<f64>,
    pub scale: Array1<f64>,
}

impl Standardizer {
    pub fn fit(x: ArrayView2<'_, f64>) -> Self {
        let mean = x.mean_axis(Axis(0)).expect("non-empty");
        let scale = x.std_axis(Axis(0), 0.0).mapv(|s| if s > 0.0 { s } else { 1.0 });
        Self { mean, scale }
    }

    pub fn apply(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        (&x - &self.mean) / &self.scale
    }
}
