//! The two quantitative probes of a latent space: per-dimension mutual information with
//! the style label, and least-squares hyperplane probes scored by APCC against every
//! acoustic feature.

mod mi;
mod probe;
pub mod special;

pub use mi::{mutual_info_cd, mutual_info_cd_seeded, DEFAULT_MI_NEIGHBORS, MIN_MI_SAMPLES};
pub use probe::{
    apcc, fit_probe, ols_fit, r_squared, Apcc, LinearFit, LinearProbe, DEGENERATE_VARIANCE,
};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::embeddings::JoinedDataset;
use crate::error::{Error, Result};

pub const DEFAULT_APCC_THRESHOLD: f64 = 0.5;

/// Mutual information in bits, rows = embedding dimension, columns = task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MiTable {
    pub tasks: Vec<String>,
    /// `values[dim][task]`; `None` where a task has fewer dimensions.
    pub values: Vec<Vec<Option<f64>>>,
}

impl MiTable {
    pub fn n_dims(&self) -> usize {
        self.values.len()
    }

    pub fn get(&self, dim: usize, task: &str) -> Option<f64> {
        let t = self.tasks.iter().position(|x| x == task)?;
        self.values.get(dim)?[t]
    }
}

pub fn mi_table(datasets: &[JoinedDataset], k: usize, seed: u64) -> Result<MiTable> {
    let n_dims = datasets
        .iter()
        .map(|d| d.embeddings.ncols())
        .max()
        .unwrap_or(0);
    let cells: Vec<(usize, usize)> = (0..n_dims)
        .flat_map(|dim| (0..datasets.len()).map(move |t| (dim, t)))
        .collect();
    let labels: Vec<Vec<usize>> = datasets.iter().map(|d| d.style_classes().0).collect();
    let results: Vec<Result<Option<f64>>> = cells
        .par_iter()
        .map(|&(dim, t)| {
            let ds = &datasets[t];
            if dim >= ds.embeddings.ncols() {
                return Ok(None);
            }
            let x: Vec<f64> = ds.embeddings.column(dim).iter().copied().collect();
            mutual_info_cd_seeded(&x, &labels[t], k, seed ^ dim as u64).map(Some)
        })
        .collect();
    let mut values = vec![vec![None; datasets.len()]; n_dims];
    for ((dim, t), r) in cells.into_iter().zip(results) {
        values[dim][t] = r?;
    }
    Ok(MiTable {
        tasks: datasets.iter().map(|d| d.task.clone()).collect(),
        values,
    })
}

/// In-sample APCC of the best hyperplane, rows = feature, columns = task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApccTable {
    pub features: Vec<String>,
    pub tasks: Vec<String>,
    /// `values[feature][task]`
    pub values: Vec<Vec<Apcc>>,
}

impl ApccTable {
    pub fn get(&self, feature: &str, task: &str) -> Option<f64> {
        let f = self.features.iter().position(|x| x == feature)?;
        let t = self.tasks.iter().position(|x| x == task)?;
        Some(self.values[f][t].value)
    }

    /// Builds a table from plain values, e.g. to re-apply selection to a stored table.
    pub fn from_values(features: Vec<String>, tasks: Vec<String>, values: Vec<Vec<f64>>) -> Self {
        let values = values
            .into_iter()
            .map(|row| {
                row.into_iter()
                    .map(|v| Apcc {
                        value: v,
                        degenerate: v == 0.0,
                    })
                    .collect()
            })
            .collect();
        ApccTable {
            features,
            tasks,
            values,
        }
    }
}

pub fn apcc_table(datasets: &[JoinedDataset]) -> Result<ApccTable> {
    let first = datasets
        .first()
        .ok_or_else(|| Error::InvalidParameter("apcc table needs at least one dataset".into()))?;
    let features = first.feature_names.clone();
    if let Some(other) = datasets.iter().find(|d| d.feature_names != features) {
        return Err(Error::Consistency(format!(
            "task '{}' carries different feature columns than '{}'",
            other.task, first.task
        )));
    }
    let cells: Vec<(usize, usize)> = (0..features.len())
        .flat_map(|f| (0..datasets.len()).map(move |t| (f, t)))
        .collect();
    let results: Vec<Result<Apcc>> = cells
        .par_iter()
        .map(|&(f, t)| {
            let ds = &datasets[t];
            let y: Vec<f64> = ds.features.column(f).iter().copied().collect();
            fit_probe(&ds.embeddings, &y, &features[f]).map(|p| p.apcc)
        })
        .collect();
    let mut values = vec![Vec::with_capacity(datasets.len()); features.len()];
    for ((f, _), r) in cells.into_iter().zip(results) {
        values[f].push(r?);
    }
    Ok(ApccTable {
        features,
        tasks: datasets.iter().map(|d| d.task.clone()).collect(),
        values,
    })
}

/// Features whose APCC strictly exceeds `threshold` in every task, in table order.
pub fn select_features(table: &ApccTable, threshold: f64) -> Vec<String> {
    let selected: Vec<String> = table
        .features
        .iter()
        .zip(&table.values)
        .filter(|(_, row)| {
            !row.is_empty() && row.iter().all(|a| !a.degenerate && a.value > threshold)
        })
        .map(|(name, _)| name.clone())
        .collect();
    if selected.is_empty() {
        log::warn!("no feature exceeds APCC {threshold} in every latent space");
    }
    selected
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(rows: &[(&str, [f64; 3])]) -> ApccTable {
        ApccTable::from_values(
            rows.iter().map(|r| r.0.to_string()).collect(),
            vec!["a".into(), "b".into(), "c".into()],
            rows.iter().map(|r| r.1.to_vec()).collect(),
        )
    }

    #[test]
    fn every_task_must_exceed_threshold() {
        let t = table(&[
            ("x", [0.6, 0.7, 0.4]),
            ("y", [0.6, 0.7, 0.51]),
            ("z", [0.9, 0.9, 0.5]),
        ]);
        assert_eq!(select_features(&t, 0.5), vec!["y".to_string()]);
    }

    #[test]
    fn zero_threshold_keeps_non_degenerate() {
        let t = table(&[("x", [0.01, 0.2, 0.3]), ("dead", [0.0, 0.5, 0.5])]);
        assert_eq!(select_features(&t, 0.0), vec!["x".to_string()]);
    }

    #[test]
    fn selection_preserves_table_order() {
        let t = table(&[("b", [0.9; 3]), ("a", [0.8; 3]), ("c", [0.7; 3])]);
        assert_eq!(select_features(&t, 0.5), vec!["b", "a", "c"]);
    }
}
