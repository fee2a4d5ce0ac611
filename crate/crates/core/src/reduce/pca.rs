use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;

/// Principal axes of a centred (unscaled) feature matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaModel {
    pub means: DVector<f64>,
    /// K x K, orthonormal columns ordered by explained variance.
    pub loadings: DMatrix<f64>,
    /// Sample variance (N - 1 denominator) along each axis, non-increasing.
    pub explained_variance: Vec<f64>,
}

impl PcaModel {
    pub fn transform(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if x.ncols() != self.means.len() {
            return Err(Error::Shape(format!(
                "PCA fitted on {} columns, got {}",
                self.means.len(),
                x.ncols()
            )));
        }
        Ok(center(x, &self.means) * &self.loadings)
    }
}

pub(crate) fn column_means(x: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_iterator(x.ncols(), x.column_iter().map(|c| c.mean()))
}

pub(crate) fn center(x: &DMatrix<f64>, means: &DVector<f64>) -> DMatrix<f64> {
    let mut c = x.clone();
    for (j, mut col) in c.column_iter_mut().enumerate() {
        col.add_scalar_mut(-means[j]);
    }
    c
}

/// Fits PCA and returns the scores of `x`, named `pc_1..pc_K`.
pub fn pca_fit_transform(x: &FeatureMatrix) -> Result<(PcaModel, FeatureMatrix)> {
    let values = x.values();
    let (n, k) = values.shape();
    if n < 2 {
        return Err(Error::invalid("PCA needs at least two rows"));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric(
            "PCA input contains non-finite values".into(),
        ));
    }
    let means = column_means(values);
    let xc = center(values, &means);
    let cov = (xc.transpose() * &xc) / (n as f64 - 1.0);
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .total_cmp(&eig.eigenvalues[a])
            .then(a.cmp(&b))
    });
    let mut loadings = DMatrix::zeros(k, k);
    let mut explained = Vec::with_capacity(k);
    for (c, &idx) in order.iter().enumerate() {
        let mut v = eig.eigenvectors.column(idx).into_owned();
        let pivot = v.iamax();
        if v[pivot] < 0.0 {
            v.neg_mut();
        }
        loadings.set_column(c, &v);
        explained.push(eig.eigenvalues[idx].max(0.0));
    }
    let scores = &xc * &loadings;
    let model = PcaModel {
        means,
        loadings,
        explained_variance: explained,
    };
    let fm = FeatureMatrix::with_prefix(x.subject_ids().to_vec(), "pc", scores)?;
    Ok((model, fm))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fm(rows: usize, cols: usize, data: &[f64]) -> FeatureMatrix {
        let ids = (0..rows).map(|i| format!("s{i}")).collect();
        FeatureMatrix::with_prefix(ids, "f", DMatrix::from_row_slice(rows, cols, data)).unwrap()
    }

    #[test]
    fn single_varying_column() {
        let x = fm(
            4,
            3,
            &[1.0, 5.0, 2.0, 1.0, 7.0, 2.0, 1.0, -1.0, 2.0, 1.0, 3.0, 2.0],
        );
        let (m, _) = pca_fit_transform(&x).unwrap();
        assert!(m.loadings[(1, 0)].abs() > 1.0 - 1e-9);
        assert_eq!(&m.explained_variance[1..], &[0.0, 0.0]);
    }

    #[test]
    fn reconstruction_and_orthonormality() {
        let x = fm(
            5,
            3,
            &[
                1.0, 2.0, 0.5, -1.0, 0.3, 2.0, 4.0, 1.0, -2.0, 0.0, 0.0, 1.0, 2.5, -1.5, 0.7,
            ],
        );
        let (m, scores) = pca_fit_transform(&x).unwrap();
        let xc = center(x.values(), &m.means);
        assert!((scores.values() * m.loadings.transpose() - xc).norm() < 1e-8);
        let eye = m.loadings.transpose() * &m.loadings;
        assert!((eye - DMatrix::identity(3, 3)).abs().max() < 1e-9);
        assert!(m.explained_variance.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn rejects_non_finite() {
        let x = fm(2, 1, &[1.0, f64::NAN]);
        assert!(pca_fit_transform(&x).is_err());
    }
}
