//! Two-dimensional views of a latent space: PCA, exact t-SNE and UMAP, all deterministic
//! functions of (data, parameters, seed).

mod pca;
mod tsne;
mod umap;

pub use pca::{pca2, pca_fit, PcaFit};
pub use tsne::{tsne2, TsneConfig};
pub use umap::{fit_ab, umap2, UmapConfig};

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::DEGENERATE_VARIANCE;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Reducer {
    Pca,
    Tsne,
    Umap,
}

impl Reducer {
    pub const ALL: [Reducer; 3] = [Reducer::Pca, Reducer::Tsne, Reducer::Umap];

    /// Lower-case key used in file names and on the command line.
    pub fn key(self) -> &'static str {
        match self {
            Reducer::Pca => "pca",
            Reducer::Tsne => "tsne",
            Reducer::Umap => "umap",
        }
    }

    /// Column heading in report tables.
    pub fn label(self) -> &'static str {
        match self {
            Reducer::Pca => "PCA",
            Reducer::Tsne => "t-SNE",
            Reducer::Umap => "UMAP",
        }
    }
}

impl fmt::Display for Reducer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

impl FromStr for Reducer {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "pca" => Ok(Reducer::Pca),
            "tsne" | "t-sne" => Ok(Reducer::Tsne),
            "umap" => Ok(Reducer::Umap),
            other => Err(Error::InvalidParameter(format!(
                "unknown reducer '{other}'"
            ))),
        }
    }
}

/// A 2-D embedding together with everything needed to regenerate it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reduced2D {
    pub coords: Vec<[f64; 2]>,
    pub reducer: Reducer,
    pub seed: u64,
    pub params: BTreeMap<String, f64>,
    /// Optimisation loss recorded along the way (t-SNE: KL every 50 iterations).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub loss_trace: Vec<f64>,
}

impl Reduced2D {
    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.coords.len(), 2, |r, c| self.coords[r][c])
    }

    pub fn centroid(&self) -> [f64; 2] {
        let n = self.coords.len().max(1) as f64;
        let sx: f64 = self.coords.iter().map(|p| p[0]).sum();
        let sy: f64 = self.coords.iter().map(|p| p[1]).sum();
        [sx / n, sy / n]
    }

    fn from_matrix(
        y: &DMatrix<f64>,
        reducer: Reducer,
        seed: u64,
        params: BTreeMap<String, f64>,
    ) -> Result<Self> {
        let coords: Vec<[f64; 2]> = (0..y.nrows()).map(|r| [y[(r, 0)], y[(r, 1)]]).collect();
        if coords.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!(
                "{reducer} produced non-finite coordinates"
            )));
        }
        Ok(Reduced2D {
            coords,
            reducer,
            seed,
            params,
            loss_trace: Vec::new(),
        })
    }
}

/// Hyperparameters for every reducer; each reducer reads only its own.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ReduceConfig {
    pub tsne: TsneConfig,
    pub umap: UmapConfig,
    pub seed: u64,
}

pub fn reduce(x: &DMatrix<f64>, reducer: Reducer, config: &ReduceConfig) -> Result<Reduced2D> {
    match reducer {
        Reducer::Pca => {
            let mut r = pca2(x)?;
            r.seed = config.seed;
            Ok(r)
        }
        Reducer::Tsne => tsne2(x, &config.tsne, config.seed),
        Reducer::Umap => umap2(x, &config.umap, config.seed),
    }
}

/// Centres every column and scales it to unit population variance; constant columns are
/// only centred.
pub fn standardize(x: &DMatrix<f64>) -> DMatrix<f64> {
    let n = x.nrows() as f64;
    let mut z = x.clone();
    for mut col in z.column_iter_mut() {
        let mean = col.sum() / n;
        col.add_scalar_mut(-mean);
        let var = col.norm_squared() / n;
        if var > DEGENERATE_VARIANCE {
            col /= var.sqrt();
        }
    }
    z
}

/// Squared Euclidean distances between all rows, computed row-parallel.
pub(crate) fn pairwise_sq_distances(x: &DMatrix<f64>) -> Vec<Vec<f64>> {
    use rayon::prelude::*;
    let rows: Vec<Vec<f64>> = (0..x.nrows())
        .map(|r| x.row(r).iter().copied().collect())
        .collect();
    rows.par_iter()
        .map(|a| {
            rows.iter()
                .map(|b| a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum())
                .collect()
        })
        .collect()
}

/// Fraction of points whose nearest other point carries the same label.
pub fn one_nn_agreement(coords: &[[f64; 2]], labels: &[usize]) -> f64 {
    assert_eq!(coords.len(), labels.len(), "one label per point");
    let n = coords.len();
    if n < 2 {
        return 1.0;
    }
    let hits = (0..n)
        .filter(|&i| {
            let nearest = (0..n)
                .filter(|&j| j != i)
                .map(|j| {
                    let (dx, dy) = (coords[i][0] - coords[j][0], coords[i][1] - coords[j][1]);
                    (dx * dx + dy * dy, j)
                })
                .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
                .map(|(_, j)| j)
                .unwrap();
            labels[nearest] == labels[i]
        })
        .count();
    hits as f64 / n as f64
}
