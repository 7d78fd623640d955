use std::collections::BTreeMap;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::{standardize, Reduced2D, Reducer};
use crate::error::{Error, Result};

/// Top principal axes of standardized data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaFit {
    /// `loadings[c]` is the unit axis of component c in the standardized input space.
    pub loadings: Vec<Vec<f64>>,
    /// Covariance eigenvalues of the kept components.
    pub variances: Vec<f64>,
    /// Share of total variance per kept component.
    pub explained_ratio: Vec<f64>,
}

impl PcaFit {
    /// Scores Z·V for already standardized rows.
    pub fn project(&self, z: &DMatrix<f64>) -> DMatrix<f64> {
        DMatrix::from_fn(z.nrows(), self.loadings.len(), |r, c| {
            self.loadings[c]
                .iter()
                .enumerate()
                .map(|(j, v)| z[(r, j)] * v)
                .sum()
        })
    }
}

/// Fits the leading `n_components` axes of standardized `x`. Each axis is signed so its
/// largest-magnitude loading is positive.
pub fn pca_fit(x: &DMatrix<f64>, n_components: usize) -> Result<PcaFit> {
    let (n, d) = x.shape();
    if n < 3 || d < 2 {
        return Err(Error::InvalidParameter(format!(
            "PCA needs N >= 3 and d >= 2, got {n}x{d}"
        )));
    }
    if n_components == 0 || n_components > d {
        return Err(Error::InvalidParameter(format!(
            "cannot keep {n_components} of {d} components"
        )));
    }
    let z = standardize(x);
    let cov = (z.transpose() * &z) / n as f64;
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .total_cmp(&eig.eigenvalues[a])
            .then(a.cmp(&b))
    });
    let total: f64 = eig.eigenvalues.iter().map(|v| v.max(0.0)).sum();

    let mut loadings = Vec::with_capacity(n_components);
    let mut variances = Vec::with_capacity(n_components);
    for &idx in order.iter().take(n_components) {
        let mut axis: Vec<f64> = eig.eigenvectors.column(idx).iter().copied().collect();
        let pivot = axis
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()).then(b.0.cmp(&a.0)))
            .map(|(i, _)| i)
            .unwrap();
        if axis[pivot] < 0.0 {
            axis.iter_mut().for_each(|v| *v = -*v);
        }
        loadings.push(axis);
        variances.push(eig.eigenvalues[idx].max(0.0));
    }
    let explained_ratio = variances
        .iter()
        .map(|v| if total > 0.0 { v / total } else { 0.0 })
        .collect();
    Ok(PcaFit {
        loadings,
        variances,
        explained_ratio,
    })
}

/// Projection of standardized `x` onto its two leading principal axes.
pub fn pca2(x: &DMatrix<f64>) -> Result<Reduced2D> {
    let fit = pca_fit(x, 2)?;
    let y = fit.project(&standardize(x));
    let params = BTreeMap::from([
        ("explained_ratio_1".to_string(), fit.explained_ratio[0]),
        ("explained_ratio_2".to_string(), fit.explained_ratio[1]),
    ]);
    Reduced2D::from_matrix(&y, Reducer::Pca, 0, params)
}
