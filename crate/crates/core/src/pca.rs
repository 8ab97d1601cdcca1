//! Principal component analysis used to pre-reduce data before tree fitting.

use serde::{Deserialize, Serialize};

use crate::dataset::NumericMatrix;
use crate::linalg::{column_means, scatter_matrix, symmetric_eigen_desc};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pca {
    pub mean: Vec<f64>,
    /// Principal axes, one inner vector per component.
    pub components: Vec<Vec<f64>>,
    /// All covariance eigenvalues in descending order.
    pub eigenvalues: Vec<f64>,
}

impl Pca {
    pub fn fit(m: &NumericMatrix, n_components: usize) -> Result<Pca> {
        m.require_complete()?;
        if m.rows() < 2 {
            return Err(Error::InsufficientData("PCA needs at least 2 rows".into()));
        }
        if n_components == 0 || n_components > m.cols() {
            return Err(Error::InvalidArgument(format!(
                "cannot extract {n_components} components from {} columns",
                m.cols()
            )));
        }
        let mean = column_means(m.values(), m.rows(), m.cols());
        let mut scatter = scatter_matrix(m.values(), m.rows(), m.cols(), &mean);
        scatter /= (m.rows() - 1) as f64;
        let (eigenvalues, vectors) = symmetric_eigen_desc(&scatter);
        let components = (0..n_components)
            .map(|k| vectors.column(k).iter().copied().collect())
            .collect();
        Ok(Pca {
            mean,
            components,
            eigenvalues: eigenvalues.into_iter().map(|v| v.max(0.0)).collect(),
        })
    }

    pub fn n_components(&self) -> usize {
        self.components.len()
    }

    /// Fraction of total variance carried by the first `n` components.
    pub fn explained_variance_ratio(&self, n: usize) -> f64 {
        let total: f64 = self.eigenvalues.iter().sum();
        if total <= 0.0 {
            return 0.0;
        }
        self.eigenvalues.iter().take(n).sum::<f64>() / total
    }

    pub fn transform(&self, m: &NumericMatrix) -> Result<NumericMatrix> {
        m.require_complete()?;
        if m.cols() != self.mean.len() {
            return Err(Error::DimensionMismatch {
                expected: self.mean.len(),
                found: m.cols(),
            });
        }
        let k = self.n_components();
        let mut values = Vec::with_capacity(m.rows() * k);
        for r in 0..m.rows() {
            let row = m.row(r);
            for axis in &self.components {
                values.push(
                    row.iter()
                        .zip(&self.mean)
                        .zip(axis)
                        .map(|((x, mu), a)| (x - mu) * a)
                        .sum(),
                );
            }
        }
        let names = (1..=k).map(|i| format!("PC{i}")).collect();
        NumericMatrix::new(m.rows(), k, values, vec![false; m.rows() * k], names)
    }
}
