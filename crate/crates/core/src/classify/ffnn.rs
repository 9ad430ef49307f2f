//! Feed-forward network `d -> h1 -> h2 -> K` with sigmoid hidden layers and a
//! softmax output, trained on mean cross-entropy by mini-batch gradient
//! descent. Inputs are z-scored on the training split.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{ClassifierParams, LabeledDataset, Model, Standardizer, TrainedClassifier};
use crate::derive_seed;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FfnnNetwork {
    /// `weights[l]` maps layer `l` to layer `l + 1` (`out x in`).
    pub weights: [Array2<f64>; 3],
    pub biases: [Array1<f64>; 3],
}

fn sigmoid(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

fn softmax_rows(z: &mut Array2<f64>) {
    for mut row in z.rows_mut() {
        let max = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        row.mapv_inplace(|v| (v - max).exp());
        let s = row.sum();
        row.mapv_inplace(|v| v / s);
    }
}

impl FfnnNetwork {
    fn shapes(input: usize, hidden: (usize, usize), classes: usize) -> [(usize, usize); 3] {
        [(hidden.0, input), (hidden.1, hidden.0), (classes, hidden.1)]
    }

    /// Weights and biases drawn from `U(-0.5, 0.5)`.
    pub fn init(input: usize, hidden: (usize, usize), classes: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sh = Self::shapes(input, hidden, classes);
        let mut w = |s: (usize, usize)| Array2::from_shape_simple_fn(s, || rng.random_range(-0.5..0.5));
        let weights = [w(sh[0]), w(sh[1]), w(sh[2])];
        let biases = sh.map(|s| Array1::from_shape_simple_fn(s.0, || rng.random_range(-0.5..0.5)));
        Self { weights, biases }
    }

    /// All-zero parameters (test hook).
    pub fn zeros(input: usize, hidden: (usize, usize), classes: usize) -> Self {
        let sh = Self::shapes(input, hidden, classes);
        Self {
            weights: sh.map(Array2::zeros),
            biases: sh.map(|s| Array1::zeros(s.0)),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.weights[0].ncols()
    }

    pub fn class_count(&self) -> usize {
        self.weights[2].nrows()
    }

    /// Activations of both hidden layers and the softmax output.
    fn forward(&self, x: ArrayView2<'_, f64>) -> [Array2<f64>; 3] {
        let mut h1 = x.dot(&self.weights[0].t()) + &self.biases[0];
        h1.mapv_inplace(sigmoid);
        let mut h2 = h1.dot(&self.weights[1].t()) + &self.biases[1];
        h2.mapv_inplace(sigmoid);
        let mut out = h2.dot(&self.weights[2].t()) + &self.biases[2];
        softmax_rows(&mut out);
        [h1, h2, out]
    }

    pub fn probabilities(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        let [_, _, p] = self.forward(x);
        p
    }

    /// Flattened parameters: each weight matrix row-major, then its bias,
    /// layer by layer.
    pub fn parameters(&self) -> Vec<f64> {
        let mut v = Vec::new();
        for (w, b) in self.weights.iter().zip(&self.biases) {
            v.extend(w.iter());
            v.extend(b.iter());
        }
        v
    }

    pub fn with_parameters(&self, params: &[f64]) -> Result<Self> {
        let expected = self.parameters().len();
        if params.len() != expected {
            return Err(Error::DimensionMismatch { expected, got: params.len() });
        }
        let mut out = self.clone();
        let mut it = params.iter().copied();
        for (w, b) in out.weights.iter_mut().zip(out.biases.iter_mut()) {
            w.iter_mut().for_each(|v| *v = it.next().expect("length checked"));
            b.iter_mut().for_each(|v| *v = it.next().expect("length checked"));
        }
        Ok(out)
    }

    /// Mean cross-entropy over the rows and its gradient, flattened like
    /// [`FfnnNetwork::parameters`].
    pub fn loss_and_gradient(&self, x: ArrayView2<'_, f64>, labels: &[usize]) -> Result<(f64, Vec<f64>)> {
        let (loss, [gw, gb]) = self.backprop(x, labels)?;
        let mut g = Vec::new();
        for (w, b) in gw.iter().zip(&gb) {
            g.extend(w.iter());
            g.extend(b.iter());
        }
        Ok((loss, g))
    }

    #[allow(clippy::type_complexity)]
    fn backprop(
        &self,
        x: ArrayView2<'_, f64>,
        labels: &[usize],
    ) -> Result<(f64, [Vec<Array2<f64>>; 2])> {
        if x.ncols() != self.input_dim() {
            return Err(Error::DimensionMismatch { expected: self.input_dim(), got: x.ncols() });
        }
        if labels.len() != x.nrows() {
            return Err(Error::DimensionMismatch { expected: x.nrows(), got: labels.len() });
        }
        let n = x.nrows() as f64;
        let [h1, h2, p] = self.forward(x);
        let loss = -labels
            .iter()
            .enumerate()
            .map(|(i, &l)| {
                let v = p[[i, l]];
                if v.is_nan() { v } else { v.max(f64::MIN_POSITIVE).ln() }
            })
            .sum::<f64>()
            / n;
        let mut d3 = p;
        for (i, &l) in labels.iter().enumerate() {
            d3[[i, l]] -= 1.0;
        }
        d3 /= n;
        let d2 = d3.dot(&self.weights[2]) * h2.mapv(|a| a * (1.0 - a));
        let d1 = d2.dot(&self.weights[1]) * h1.mapv(|a| a * (1.0 - a));
        let gw = vec![d1.t().dot(&x), d2.t().dot(&h1), d3.t().dot(&h2)];
        let gb = vec![
            d1.sum_axis(Axis(0)).insert_axis(Axis(0)),
            d2.sum_axis(Axis(0)).insert_axis(Axis(0)),
            d3.sum_axis(Axis(0)).insert_axis(Axis(0)),
        ];
        Ok((loss, [gw, gb]))
    }

    fn step(&mut self, x: ArrayView2<'_, f64>, labels: &[usize], lr: f64) -> Result<f64> {
        let (loss, [gw, gb]) = self.backprop(x, labels)?;
        for l in 0..3 {
            self.weights[l].scaled_add(-lr, &gw[l]);
            self.biases[l].scaled_add(-lr, &gb[l].row(0));
        }
        Ok(loss)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FfnnModel {
    pub standardizer: Standardizer,
    pub network: FfnnNetwork,
    /// Mean training loss after each epoch.
    pub loss_trace: Vec<f64>,
}

impl FfnnModel {
    pub(crate) fn scores(&self, points: ArrayView2<'_, f64>) -> Array2<f64> {
        self.network.probabilities(self.standardizer.apply(points).view())
    }
}

pub fn ffnn_train(data: &LabeledDataset, params: &ClassifierParams) -> Result<TrainedClassifier> {
    let (h1, h2) = params.hidden;
    if h1 == 0 || h2 == 0 {
        return Err(Error::InvalidConfig("hidden layer sizes must be at least 1".into()));
    }
    if params.batch_size == 0 || !(params.learning_rate > 0.0) {
        return Err(Error::InvalidConfig("batch_size and learning_rate must be positive".into()));
    }
    let (x, y) = data.train_split();
    let k = data.class_count();
    let standardizer = Standardizer::fit(x.view());
    let z = standardizer.apply(x.view());
    let mut network = FfnnNetwork::init(data.dim(), params.hidden, k, derive_seed(params.seed, "ffnn-init"));
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(params.seed, "ffnn-shuffle"));
    let mut order: Vec<usize> = (0..y.len()).collect();
    let mut loss_trace = Vec::with_capacity(params.epochs);
    for epoch in 0..params.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(params.batch_size) {
            let xb = z.select(Axis(0), batch);
            let yb: Vec<usize> = batch.iter().map(|&i| y[i]).collect();
            let loss = network.step(xb.view(), &yb, params.learning_rate)?;
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss { epoch });
            }
            total += loss * batch.len() as f64;
        }
        loss_trace.push(total / y.len() as f64);
    }
    Ok(TrainedClassifier {
        class_count: k,
        dim: data.dim(),
        model: Model::Ffnn(FfnnModel { standardizer, network, loss_trace }),
    })
}
