//! Feature gradients in a 2-D reduced space: a least-squares plane per feature, whose
//! weight vector points along the feature's steepest increase.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dimred::{Reduced2D, Reducer};
use crate::embeddings::JoinedDataset;
use crate::error::{Error, Result};
use crate::stats::{fit_probe, DEGENERATE_VARIANCE};

const MIN_GRADIENT_NORM: f64 = 1e-12;
const NULL_LEVEL: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureGradient {
    pub feature: String,
    /// Weights of the fitted plane on (x, y).
    pub gradient: [f64; 2],
    /// Unit vector along `gradient`, or zero when the plane is flat.
    pub direction: [f64; 2],
    pub apcc: f64,
    /// The fit does not beat the 99th percentile of R² for a pure-noise target.
    pub low_confidence: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientField {
    pub task: String,
    pub reducer: Reducer,
    pub gradients: Vec<FeatureGradient>,
}

impl GradientField {
    pub fn get(&self, feature: &str) -> Option<&FeatureGradient> {
        self.gradients.iter().find(|g| g.feature == feature)
    }

    /// Mean APCC over the fitted features, `None` when every feature was skipped.
    pub fn mean_apcc(&self) -> Option<f64> {
        if self.gradients.is_empty() {
            return None;
        }
        Some(self.gradients.iter().map(|g| g.apcc).sum::<f64>() / self.gradients.len() as f64)
    }
}

/// R² below which a two-predictor fit on `n` samples is indistinguishable from noise at
/// the 1% level: under the null R² ~ Beta(1, (n−3)/2), so P(R² > t) = (1−t)^((n−3)/2).
pub fn null_r2_threshold(n: usize) -> f64 {
    if n <= 3 {
        return 1.0;
    }
    1.0 - NULL_LEVEL.powf(2.0 / (n as f64 - 3.0))
}

/// Fits every selected feature of `data` on the reduced coordinates. Constant features are
/// skipped with a warning.
pub fn gradient_field(
    reduced: &Reduced2D,
    data: &JoinedDataset,
    selected: &[String],
) -> Result<GradientField> {
    if selected.is_empty() {
        return Err(Error::InvalidParameter(
            "gradient field needs at least one selected feature".into(),
        ));
    }
    if reduced.len() != data.len() {
        return Err(Error::Consistency(format!(
            "{} reduced points for {} utterances in task '{}'",
            reduced.len(),
            data.len(),
            data.task
        )));
    }
    let coords = reduced.matrix();
    let threshold = null_r2_threshold(data.len());
    let fitted: Vec<Result<Option<FeatureGradient>>> = selected
        .par_iter()
        .map(|name| {
            let y = data.feature(name).ok_or_else(|| {
                Error::Validation(format!(
                    "selected feature '{name}' missing from task '{}'",
                    data.task
                ))
            })?;
            let mean = y.iter().sum::<f64>() / y.len() as f64;
            let var = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / y.len() as f64;
            if var < DEGENERATE_VARIANCE {
                log::warn!(
                    "feature '{name}' is constant in task '{}'; no gradient",
                    data.task
                );
                return Ok(None);
            }
            let probe = fit_probe(&coords, &y, name)?;
            let gradient = [probe.fit.weights[0], probe.fit.weights[1]];
            let norm = gradient[0].hypot(gradient[1]);
            let direction = if norm > MIN_GRADIENT_NORM {
                [gradient[0] / norm, gradient[1] / norm]
            } else {
                [0.0, 0.0]
            };
            let apcc = probe.apcc.value;
            Ok(Some(FeatureGradient {
                feature: name.clone(),
                gradient,
                direction,
                apcc,
                low_confidence: apcc * apcc < threshold,
            }))
        })
        .collect();
    let mut gradients = Vec::with_capacity(selected.len());
    for g in fitted {
        if let Some(g) = g? {
            gradients.push(g);
        }
    }
    Ok(GradientField {
        task: data.task.clone(),
        reducer: reduced.reducer,
        gradients,
    })
}

/// Mean 2-D probe APCC per (task, reducer), tasks as rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApccAverageTable {
    pub tasks: Vec<String>,
    pub reducers: Vec<Reducer>,
    /// `values[task][reducer]`; `None` where no feature could be fitted.
    pub values: Vec<Vec<Option<f64>>>,
}

impl ApccAverageTable {
    pub fn get(&self, task: &str, reducer: Reducer) -> Option<f64> {
        let t = self.tasks.iter().position(|x| x == task)?;
        let r = self.reducers.iter().position(|x| *x == reducer)?;
        self.values[t][r]
    }
}

/// Assembles the table from gradient fields; each (task, reducer) pair must appear once.
pub fn apcc_average_table(
    fields: &[GradientField],
    tasks: &[String],
    reducers: &[Reducer],
) -> Result<ApccAverageTable> {
    let mut values = vec![vec![None; reducers.len()]; tasks.len()];
    let mut seen = vec![vec![false; reducers.len()]; tasks.len()];
    for f in fields {
        let t = tasks.iter().position(|x| *x == f.task).ok_or_else(|| {
            Error::Consistency(format!("gradient field for unknown task '{}'", f.task))
        })?;
        let r = reducers
            .iter()
            .position(|x| *x == f.reducer)
            .ok_or_else(|| {
                Error::Consistency(format!(
                    "gradient field for unlisted reducer '{}'",
                    f.reducer
                ))
            })?;
        if seen[t][r] {
            return Err(Error::Consistency(format!(
                "two gradient fields for ({}, {})",
                f.task, f.reducer
            )));
        }
        seen[t][r] = true;
        values[t][r] = f.mean_apcc();
    }
    Ok(ApccAverageTable {
        tasks: tasks.to_vec(),
        reducers: reducers.to_vec(),
        values,
    })
}
