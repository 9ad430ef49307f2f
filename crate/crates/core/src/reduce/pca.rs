//! Principal component analysis via a cyclic Jacobi eigensolver on the
//! sample covariance matrix.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    pub mean_vector: Array1<f64>,
    /// `target_dim x d`, one unit eigenvector per row, largest eigenvalue first.
    pub components: Array2<f64>,
    /// All `d` covariance eigenvalues, descending, clamped at zero.
    pub eigenvalues: Vec<f64>,
}

impl PcaModel {
    pub fn target_dim(&self) -> usize {
        self.components.nrows()
    }

    pub fn feature_dim(&self) -> usize {
        self.components.ncols()
    }

    /// `(data - mean) * components^T`.
    pub fn transform(&self, data: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if data.ncols() != self.feature_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.feature_dim(),
                got: data.ncols(),
            });
        }
        let centered = &data - &self.mean_vector;
        Ok(centered.dot(&self.components.t()))
    }

    /// Maps projected rows back to feature space. Exact only when the model
    /// keeps every component.
    pub fn inverse_transform(&self, projected: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if projected.ncols() != self.target_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.target_dim(),
                got: projected.ncols(),
            });
        }
        Ok(projected.dot(&self.components) + &self.mean_vector)
    }
}

/// Sample covariance with the `n - 1` denominator.
pub fn covariance(data: ArrayView2<'_, f64>) -> (Array1<f64>, Array2<f64>) {
    let n = data.nrows();
    let mean = data.mean_axis(Axis(0)).expect("non-empty data");
    let centered = &data - &mean;
    let cov = centered.t().dot(&centered) / (n as f64 - 1.0);
    (mean, cov)
}

pub fn pca_fit(data: ArrayView2<'_, f64>, target_dim: usize) -> Result<PcaModel> {
    let (n, d) = data.dim();
    if n < 2 {
        return Err(Error::InvalidConfig(format!("PCA needs at least 2 rows, got {n}")));
    }
    if target_dim == 0 || target_dim > d.min(n - 1) {
        return Err(Error::InvalidConfig(format!(
            "target_dim {target_dim} outside [1, min(n-1, d) = {}]",
            d.min(n - 1)
        )));
    }
    if data.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidConfig("PCA input contains non-finite values".into()));
    }
    let (mean, cov) = covariance(data);
    if cov.diag().iter().all(|&v| v == 0.0) {
        return Err(Error::DegenerateData("all rows identical; covariance is zero".into()));
    }
    let (values, vectors) = symmetric_eigen(&cov);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));

    let mut components = Array2::zeros((target_dim, d));
    for (row, &idx) in order.iter().take(target_dim).enumerate() {
        let mut v = vectors.column(idx).to_owned();
        // sign convention: largest-magnitude entry positive
        let pivot = v
            .iter()
            .enumerate()
            .fold((0, 0.0f64), |best, (i, &x)| if x.abs() > best.1.abs() { (i, x) } else { best })
            .0;
        if v[pivot] < 0.0 {
            v.mapv_inplace(|x| -x);
        }
        components.row_mut(row).assign(&v);
    }
    let eigenvalues = order.iter().map(|&i| values[i].max(0.0)).collect();
    Ok(PcaModel {
        mean_vector: mean,
        components,
        eigenvalues,
    })
}

/// Eigen-decomposition of a real symmetric matrix by cyclic Jacobi rotations.
/// Returns eigenvalues and a matrix whose columns are the eigenvectors.
pub fn symmetric_eigen(m: &Array2<f64>) -> (Vec<f64>, Array2<f64>) {
    let n = m.nrows();
    let mut a = m.clone();
    let mut v = Array2::<f64>::eye(n);
    let scale: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[[i, j]] * a[[i, j]])
            .sum::<f64>()
            .sqrt();
        if off <= 1e-15 * scale || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[[p, q]];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[[q, q]] - a[[p, p]]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[[k, p]];
                    let akq = a[[k, q]];
                    a[[k, p]] = c * akp - s * akq;
                    a[[k, q]] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[[p, k]];
                    let aqk = a[[q, k]];
                    a[[p, k]] = c * apk - s * aqk;
                    a[[q, k]] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[[k, p]];
                    let vkq = v[[k, q]];
                    v[[k, p]] = c * vkp - s * vkq;
                    v[[k, q]] = s * vkp + c * vkq;
                }
            }
        }
    }
    ((0..n).map(|i| a[[i, i]]).collect(), v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;

    #[test]
    fn diagonal_line() {
        let x = array![[1.0, 1.0], [2.0, 2.0], [3.0, 3.0]];
        let m = pca_fit(x.view(), 1).unwrap();
        let h = 0.5f64.sqrt();
        assert!((m.components[[0, 0]] - h).abs() < 1e-12);
        assert!((m.components[[0, 1]] - h).abs() < 1e-12);
        assert!((m.eigenvalues[0] - 2.0).abs() < 1e-12);
        assert!(m.eigenvalues[1].abs() < 1e-12);
    }

    #[test]
    fn axis_aligned_gives_identity() {
        let x = array![[-3.0, 0.0], [3.0, 0.0], [0.0, 1.0], [0.0, -1.0], [0.0, 0.0]];
        let m = pca_fit(x.view(), 2).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((m.components[[i, j]] - e).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn identical_rows_degenerate() {
        let x = Array2::from_elem((5, 3), 1.5);
        assert!(matches!(pca_fit(x.view(), 1), Err(Error::DegenerateData(_))));
    }

    #[test]
    fn dimension_checks() {
        let x = array![[1.0, 2.0], [2.0, 1.0], [0.0, 0.5]];
        assert!(pca_fit(x.view(), 3).is_err());
        assert!(pca_fit(x.view(), 0).is_err());
        let m = pca_fit(x.view(), 1).unwrap();
        assert!(matches!(
            m.transform(array![[1.0, 2.0, 3.0]].view()),
            Err(Error::DimensionMismatch { expected: 2, got: 3 })
        ));
        let t = m.transform(m.mean_vector.view().insert_axis(Axis(0))).unwrap();
        assert!(t.iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn jacobi_reconstructs() {
        let a = array![[4.0, 1.0, -2.0], [1.0, 2.0, 0.5], [-2.0, 0.5, 3.0]];
        let (vals, vecs) = symmetric_eigen(&a);
        let recon = vecs.dot(&Array2::from_diag(&Array1::from(vals))).dot(&vecs.t());
        for (x, y) in recon.iter().zip(a.iter()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    fn matrix_strategy() -> impl Strategy<Value = Array2<f64>> {
        (3usize..30, 2usize..8).prop_flat_map(|(n, d)| {
            proptest::collection::vec(-10.0f64..10.0, n * d)
                .prop_map(move |v| Array2::from_shape_vec((n, d), v).unwrap())
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn pca_identities(x in matrix_strategy()) {
            let (n, d) = x.dim();
            let k = d.min(n - 1);
            let m = pca_fit(x.view(), k).unwrap();
            let (_, cov) = covariance(x.view());
            let trace: f64 = cov.diag().sum();
            prop_assert!((m.eigenvalues.iter().sum::<f64>() - trace).abs() <= 1e-8 * trace.max(1.0));
            prop_assert!(m.eigenvalues.windows(2).all(|w| w[0] >= w[1]));
            let gram = m.components.dot(&m.components.t());
            for i in 0..k {
                for j in 0..k {
                    let e = if i == j { 1.0 } else { 0.0 };
                    prop_assert!((gram[[i, j]] - e).abs() < 1e-8);
                }
            }
            let y = m.transform(x.view()).unwrap();
            let (_, cy) = covariance(y.view());
            for i in 0..k {
                for j in 0..k {
                    if i != j {
                        prop_assert!(cy[[i, j]].abs() < 1e-8 * trace.max(1.0));
                    }
                }
            }
            if k == d {
                let back = m.inverse_transform(y.view()).unwrap();
                for (a, b) in back.iter().zip(x.iter()) {
                    prop_assert!((a - b).abs() < 1e-8);
                }
            }
        }

        #[test]
        fn transform_is_affine(x in matrix_strategy(), alpha in -2.0f64..2.0) {
            let m = pca_fit(x.view(), 1).unwrap();
            let a = x.row(0).insert_axis(Axis(0)).to_owned();
            let b = x.row(1).insert_axis(Axis(0)).to_owned();
            let mix = &a * alpha + &b * (1.0 - alpha);
            let lhs = m.transform(mix.view()).unwrap();
            let rhs = m.transform(a.view()).unwrap() * alpha + m.transform(b.view()).unwrap() * (1.0 - alpha);
            for (p, q) in lhs.iter().zip(rhs.iter()) {
                prop_assert!((p - q).abs() < 1e-10 * (1.0 + p.abs()));
            }
        }
    }
}
