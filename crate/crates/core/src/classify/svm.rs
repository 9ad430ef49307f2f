//! Soft-margin SVM with a Gaussian kernel, trained by SMO with
//! maximal-violating-pair working-set selection; multiclass by one-vs-one
//! voting.
//!
//! Inputs are z-scored on the training split before the kernel is applied.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use super::{ClassifierParams, LabeledDataset, Model, Standardizer, TrainedClassifier};
use crate::{Error, Result};

/// Weight of the margin tie-break channel in the score; below 0.5 so it can
/// never outvote a whole pairwise vote.
const MARGIN_WEIGHT: f64 = 0.49;
const TAU: f64 = 1e-12;

fn rbf(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>, gamma: f64) -> f64 {
    let d2: f64 = a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum();
    (-gamma * d2).exp()
}

/// One binary problem; `+1` is `positive`, `-1` is `negative`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinarySvm {
    pub positive: usize,
    pub negative: usize,
    /// Support vectors (rows with `alpha > 0`) in standardized space.
    pub support: Array2<f64>,
    /// `alpha_i * y_i` for each support vector.
    pub coef: Vec<f64>,
    pub bias: f64,
    /// Full dual solution on the training rows of this pair.
    pub alpha: Vec<f64>,
    pub targets: Vec<f64>,
    pub iterations: usize,
}

impl BinarySvm {
    /// Solves `min 1/2 a'Qa - e'a` s.t. `0 <= a <= c`, `y'a = 0`, stopping when
    /// the maximal KKT violation drops below `tol`.
    pub fn fit(
        x: ArrayView2<'_, f64>,
        y: &[f64],
        gamma: f64,
        c: f64,
        tol: f64,
        max_iter: usize,
    ) -> Result<(Array1<f64>, f64, usize)> {
        let n = y.len();
        let k = Array2::from_shape_fn((n, n), |(i, j)| rbf(x.row(i), x.row(j), gamma));
        let q = |i: usize, j: usize| y[i] * y[j] * k[[i, j]];
        let mut alpha = Array1::<f64>::zeros(n);
        let mut grad = Array1::<f64>::from_elem(n, -1.0);
        let in_up = |a: f64, yt: f64| (yt > 0.0 && a < c) || (yt < 0.0 && a > 0.0);
        let in_low = |a: f64, yt: f64| (yt > 0.0 && a > 0.0) || (yt < 0.0 && a < c);
        let mut iter = 0;
        loop {
            let (mut i, mut gmax) = (usize::MAX, f64::NEG_INFINITY);
            let (mut j, mut gmin) = (usize::MAX, f64::INFINITY);
            for t in 0..n {
                let v = -y[t] * grad[t];
                if in_up(alpha[t], y[t]) && v > gmax {
                    (i, gmax) = (t, v);
                }
                if in_low(alpha[t], y[t]) && v < gmin {
                    (j, gmin) = (t, v);
                }
            }
            if i == usize::MAX || j == usize::MAX || gmax - gmin < tol {
                break;
            }
            if iter >= max_iter {
                return Err(Error::NoConvergence { iterations: iter });
            }
            iter += 1;
            let (old_i, old_j) = (alpha[i], alpha[j]);
            if y[i] != y[j] {
                let quad = (k[[i, i]] + k[[j, j]] + 2.0 * k[[i, j]]).max(TAU);
                let delta = (-grad[i] - grad[j]) / quad;
                let diff = alpha[i] - alpha[j];
                alpha[i] += delta;
                alpha[j] += delta;
                if diff > 0.0 {
                    if alpha[j] < 0.0 {
                        alpha[j] = 0.0;
                        alpha[i] = diff;
                    }
                } else if alpha[i] < 0.0 {
                    alpha[i] = 0.0;
                    alpha[j] = -diff;
                }
                if diff > 0.0 {
                    if alpha[i] > c {
                        alpha[i] = c;
                        alpha[j] = c - diff;
                    }
                } else if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = c + diff;
                }
            } else {
                let quad = (k[[i, i]] + k[[j, j]] - 2.0 * k[[i, j]]).max(TAU);
                let delta = (grad[i] - grad[j]) / quad;
                let sum = alpha[i] + alpha[j];
                alpha[i] -= delta;
                alpha[j] += delta;
                if sum > c {
                    if alpha[i] > c {
                        alpha[i] = c;
                        alpha[j] = sum - c;
                    }
                } else if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = sum;
                }
                if sum > c {
                    if alpha[j] > c {
                        alpha[j] = c;
                        alpha[i] = sum - c;
                    }
                } else if alpha[i] < 0.0 {
                    alpha[i] = 0.0;
                    alpha[j] = sum;
                }
            }
            let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
            for t in 0..n {
                grad[t] += q(t, i) * di + q(t, j) * dj;
            }
        }
        // bias from free vectors, else the midpoint of the feasible interval
        let (mut sum, mut free) = (0.0, 0usize);
        let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
        for t in 0..n {
            let yg = y[t] * grad[t];
            if alpha[t] > 0.0 && alpha[t] < c {
                sum += yg;
                free += 1;
            } else if (alpha[t] >= c && y[t] < 0.0) || (alpha[t] <= 0.0 && y[t] > 0.0) {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        }
        let rho = if free > 0 { sum / free as f64 } else { (ub + lb) / 2.0 };
        Ok((alpha, -rho, iter))
    }

    pub fn decision(&self, point: ArrayView1<'_, f64>, gamma: f64) -> f64 {
        self.support
            .rows()
            .into_iter()
            .zip(&self.coef)
            .map(|(s, c)| c * rbf(s, point, gamma))
            .sum::<f64>()
            + self.bias
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub class_count: usize,
    pub kernel_scale: f64,
    pub box_c: f64,
    pub standardizer: Standardizer,
    /// Pairs `(a, b)` with `a < b`, lexicographic.
    pub machines: Vec<BinarySvm>,
}

impl SvmModel {
    fn gamma(&self) -> f64 {
        1.0 / (2.0 * self.kernel_scale * self.kernel_scale)
    }

    /// Pairwise votes plus `0.49 * tanh(mean signed margin)` per class.
    pub(crate) fn scores(&self, points: ArrayView2<'_, f64>) -> Array2<f64> {
        let z = self.standardizer.apply(points);
        let gamma = self.gamma();
        let k = self.class_count;
        let mut out = Array2::zeros((z.nrows(), k));
        for (i, row) in z.axis_iter(Axis(0)).enumerate() {
            let mut votes = vec![0.0; k];
            let mut margin = vec![0.0; k];
            let mut involved = vec![0usize; k];
            for m in &self.machines {
                let f = m.decision(row, gamma);
                if f > 0.0 {
                    votes[m.positive] += 1.0;
                } else {
                    votes[m.negative] += 1.0;
                }
                margin[m.positive] += f;
                margin[m.negative] -= f;
                involved[m.positive] += 1;
                involved[m.negative] += 1;
            }
            for c in 0..k {
                let mean = if involved[c] > 0 { margin[c] / involved[c] as f64 } else { 0.0 };
                out[[i, c]] = votes[c] + MARGIN_WEIGHT * mean.tanh();
            }
        }
        out
    }
}

pub fn svm_train(data: &LabeledDataset, params: &ClassifierParams) -> Result<TrainedClassifier> {
    let k = data.class_count();
    if k < 2 {
        return Err(Error::InvalidDataset("SVM needs at least 2 classes".into()));
    }
    if !(params.box_c > 0.0) {
        return Err(Error::InvalidConfig("box_c must be positive".into()));
    }
    let d = data.dim();
    let kernel_scale = params.kernel_scale.unwrap_or((d as f64).sqrt() / 4.0);
    if !(kernel_scale > 0.0) {
        return Err(Error::InvalidConfig("kernel_scale must be positive".into()));
    }
    let gamma = 1.0 / (2.0 * kernel_scale * kernel_scale);
    let (x, y) = data.train_split();
    let standardizer = Standardizer::fit(x.view());
    let z = standardizer.apply(x.view());
    let mut machines = Vec::with_capacity(k * (k - 1) / 2);
    for a in 0..k {
        for b in a + 1..k {
            let rows: Vec<usize> = (0..y.len()).filter(|&i| y[i] == a || y[i] == b).collect();
            let xs = z.select(Axis(0), &rows);
            let targets: Vec<f64> = rows.iter().map(|&i| if y[i] == a { 1.0 } else { -1.0 }).collect();
            let (alpha, bias, iterations) =
                BinarySvm::fit(xs.view(), &targets, gamma, params.box_c, params.svm_tol, params.svm_max_iter)?;
            let sv: Vec<usize> = (0..rows.len()).filter(|&i| alpha[i] > 0.0).collect();
            machines.push(BinarySvm {
                positive: a,
                negative: b,
                support: xs.select(Axis(0), &sv),
                coef: sv.iter().map(|&i| alpha[i] * targets[i]).collect(),
                bias,
                alpha: alpha.to_vec(),
                targets,
                iterations,
            });
        }
    }
    Ok(TrainedClassifier {
        class_count: k,
        dim: d,
        model: Model::Svm(SvmModel { class_count: k, kernel_scale, box_c: params.box_c, standardizer, machines }),
    })
}
