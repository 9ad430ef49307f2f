//! Dimensionality reduction of per-frame feature vectors.

mod pca;
mod sne;

use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub use pca::{covariance, pca_fit, symmetric_eigen, PcaModel};
pub use sne::{
    conditional_p_with_sigmas, conditional_q, joint_p, sne_conditional_p, sne_cost_and_gradient,
    sne_fit, sne_fit_conditional, sne_p_matrix, squared_distances, Embedding, SneConfig, SneKernel,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReducerKind {
    Sne,
    Pca,
}

impl ReducerKind {
    pub const ALL: [ReducerKind; 2] = [ReducerKind::Sne, ReducerKind::Pca];

    pub fn as_str(&self) -> &'static str {
        match self {
            ReducerKind::Sne => "sne",
            ReducerKind::Pca => "pca",
        }
    }
}

impl fmt::Display for ReducerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ReducerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sne" | "tsne" | "t-sne" => Ok(ReducerKind::Sne),
            "pca" => Ok(ReducerKind::Pca),
            other => Err(Error::Parse(format!("unknown reducer '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReducerConfig {
    pub kind: ReducerKind,
    /// PCA target dimension; the SNE dimension lives in `sne.target_dim`.
    pub pca_dim: usize,
    pub sne: SneConfig,
}

impl ReducerConfig {
    pub fn new(kind: ReducerKind) -> Self {
        Self {
            kind,
            pca_dim: 2,
            sne: SneConfig::default(),
        }
    }

    pub fn target_dim(&self) -> usize {
        match self.kind {
            ReducerKind::Pca => self.pca_dim,
            ReducerKind::Sne => self.sne.target_dim,
        }
    }
}

/// Reduced rows plus how they were obtained.
#[derive(Debug, Clone, PartialEq)]
pub struct Reduced {
    pub coords: Array2<f64>,
    /// True when test rows took part in fitting (SNE).
    pub transductive: bool,
    pub final_cost: Option<f64>,
    pub cost_trace: Vec<f64>,
}

/// Reduces train and test rows together.
///
/// PCA is fitted on the rows where `train_mask` is true and applied to all
/// rows. SNE has no out-of-sample map, so it embeds all rows jointly; the
/// mask only matters to downstream classifiers.
pub fn reduce_for_pipeline(
    data: ArrayView2<'_, f64>,
    train_mask: &[bool],
    config: &ReducerConfig,
) -> Result<Reduced> {
    if train_mask.len() != data.nrows() {
        return Err(Error::DimensionMismatch {
            expected: data.nrows(),
            got: train_mask.len(),
        });
    }
    match config.kind {
        ReducerKind::Pca => {
            let train_rows: Vec<usize> = (0..data.nrows()).filter(|&i| train_mask[i]).collect();
            let train = data.select(Axis(0), &train_rows);
            let model = pca_fit(train.view(), config.pca_dim)?;
            Ok(Reduced {
                coords: model.transform(data)?,
                transductive: false,
                final_cost: None,
                cost_trace: Vec::new(),
            })
        }
        ReducerKind::Sne => {
            let emb = sne_fit(data, &config.sne)?;
            Ok(Reduced {
                coords: emb.coords,
                transductive: true,
                final_cost: Some(emb.final_cost),
                cost_trace: emb.cost_trace,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn data(n: usize, seed: u64) -> Array2<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Array2::from_shape_simple_fn((n, 5), || rng.random_range(-1.0..1.0))
    }

    #[test]
    fn pca_path_ignores_test_rows() {
        let x = data(40, 1);
        let mask: Vec<bool> = (0..40).map(|i| i < 30).collect();
        let cfg = ReducerConfig::new(ReducerKind::Pca);
        let a = reduce_for_pipeline(x.view(), &mask, &cfg).unwrap();
        let mut y = x.clone();
        y.slice_mut(ndarray::s![30.., ..]).mapv_inplace(|v| v * 7.0 + 3.0);
        let b = reduce_for_pipeline(y.view(), &mask, &cfg).unwrap();
        assert_eq!(a.coords.slice(ndarray::s![..30, ..]), b.coords.slice(ndarray::s![..30, ..]));
        assert!(!a.transductive);
    }

    #[test]
    fn all_train_mask_equals_plain_fit() {
        let x = data(25, 2);
        let mask = vec![true; 25];
        let cfg = ReducerConfig::new(ReducerKind::Pca);
        let a = reduce_for_pipeline(x.view(), &mask, &cfg).unwrap();
        let plain = pca_fit(x.view(), 2).unwrap().transform(x.view()).unwrap();
        assert_eq!(a.coords, plain);

        let mut cfg = ReducerConfig::new(ReducerKind::Sne);
        cfg.sne.max_iter = 50;
        let a = reduce_for_pipeline(x.view(), &mask, &cfg).unwrap();
        let plain = sne_fit(x.view(), &cfg.sne).unwrap();
        assert_eq!(a.coords, plain.coords);
    }

    #[test]
    fn sne_path_keeps_row_count() {
        let x = data(30, 3);
        let mask: Vec<bool> = (0..30).map(|i| i % 3 != 0).collect();
        let mut cfg = ReducerConfig::new(ReducerKind::Sne);
        cfg.sne.max_iter = 30;
        let r = reduce_for_pipeline(x.view(), &mask, &cfg).unwrap();
        assert_eq!(r.coords.nrows(), 30);
        assert!(r.transductive);
        assert_eq!(r.final_cost, r.cost_trace.last().copied());
    }

    #[test]
    fn mask_length_checked() {
        let x = data(10, 4);
        assert!(reduce_for_pipeline(x.view(), &[true; 9], &ReducerConfig::new(ReducerKind::Pca)).is_err());
    }
}
