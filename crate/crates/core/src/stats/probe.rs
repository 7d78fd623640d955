//! Least-squares hyperplane probes and the absolute Pearson correlation of their fit.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Below this variance a series is treated as constant.
pub const DEGENERATE_VARIANCE: f64 = 1e-24;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub weights: Vec<f64>,
    pub intercept: f64,
    /// Numerical rank of the centred design matrix.
    pub rank: usize,
}

impl LinearFit {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        self.intercept
            + self
                .weights
                .iter()
                .zip(row)
                .map(|(w, x)| w * x)
                .sum::<f64>()
    }

    pub fn predict(&self, x: &DMatrix<f64>) -> Vec<f64> {
        (0..x.nrows())
            .map(|r| {
                self.intercept
                    + (0..x.ncols())
                        .map(|c| self.weights[c] * x[(r, c)])
                        .sum::<f64>()
            })
            .collect()
    }
}

/// Minimises Σ(y − Xw − b)². The intercept is handled by centring; the centred system is
/// solved through an SVD pseudo-inverse, so rank-deficient designs get the minimum-norm
/// weights.
pub fn ols_fit(x: &DMatrix<f64>, y: &[f64]) -> Result<LinearFit> {
    let (n, d) = x.shape();
    if y.len() != n {
        return Err(Error::InvalidParameter(format!(
            "{n} design rows but {} targets",
            y.len()
        )));
    }
    if n <= d + 1 {
        return Err(Error::Underdetermined {
            samples: n,
            dims: d,
        });
    }
    let col_means: Vec<f64> = (0..d).map(|c| x.column(c).mean()).collect();
    let y_mean = y.iter().sum::<f64>() / n as f64;
    let centred = DMatrix::from_fn(n, d, |r, c| x[(r, c)] - col_means[c]);
    let target = DVector::from_iterator(n, y.iter().map(|v| v - y_mean));

    let svd = centred.svd(true, true);
    let max_sv = svd.singular_values.max();
    let tol = max_sv * n.max(d) as f64 * f64::EPSILON;
    let rank = svd.singular_values.iter().filter(|&&s| s > tol).count();
    let weights = if rank == 0 {
        DVector::zeros(d)
    } else {
        svd.solve(&target, tol)
            .map_err(|e| Error::Numerical(e.to_string()))?
    };
    if weights.iter().any(|w| !w.is_finite()) {
        return Err(Error::Numerical(
            "least-squares weights are not finite".into(),
        ));
    }
    let intercept = y_mean
        - weights
            .iter()
            .zip(&col_means)
            .map(|(w, m)| w * m)
            .sum::<f64>();
    Ok(LinearFit {
        weights: weights.iter().copied().collect(),
        intercept,
        rank,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Apcc {
    pub value: f64,
    /// Set when either side is constant; `value` is then 0.
    pub degenerate: bool,
}

/// |Pearson r| between predictions and ground truth.
pub fn apcc(pred: &[f64], truth: &[f64]) -> Apcc {
    assert_eq!(pred.len(), truth.len(), "apcc needs paired series");
    let n = pred.len() as f64;
    let mp = pred.iter().sum::<f64>() / n;
    let mt = truth.iter().sum::<f64>() / n;
    let (mut spp, mut stt, mut spt) = (0.0, 0.0, 0.0);
    for (p, t) in pred.iter().zip(truth) {
        let (dp, dt) = (p - mp, t - mt);
        spp += dp * dp;
        stt += dt * dt;
        spt += dp * dt;
    }
    if spp / n < DEGENERATE_VARIANCE || stt / n < DEGENERATE_VARIANCE {
        return Apcc {
            value: 0.0,
            degenerate: true,
        };
    }
    Apcc {
        value: (spt / (spp.sqrt() * stt.sqrt())).abs().min(1.0),
        degenerate: false,
    }
}

/// Coefficient of determination 1 − SS_res/SS_tot.
pub fn r_squared(pred: &[f64], truth: &[f64]) -> f64 {
    let mt = truth.iter().sum::<f64>() / truth.len() as f64;
    let ss_res: f64 = pred.iter().zip(truth).map(|(p, t)| (t - p).powi(2)).sum();
    let ss_tot: f64 = truth.iter().map(|t| (t - mt).powi(2)).sum();
    1.0 - ss_res / ss_tot
}

/// A fitted hyperplane for one target feature with its in-sample APCC.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearProbe {
    pub feature: String,
    pub fit: LinearFit,
    pub apcc: Apcc,
}

pub fn fit_probe(x: &DMatrix<f64>, y: &[f64], feature: &str) -> Result<LinearProbe> {
    let fit = ols_fit(x, y)?;
    let apcc = apcc(&fit.predict(x), y);
    Ok(LinearProbe {
        feature: feature.to_string(),
        fit,
        apcc,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn design(rows: &[[f64; 2]]) -> DMatrix<f64> {
        DMatrix::from_fn(rows.len(), 2, |r, c| rows[r][c])
    }

    const ROWS: [[f64; 2]; 6] = [
        [0.0, 1.0],
        [1.0, 0.5],
        [2.0, -1.0],
        [3.0, 2.0],
        [-1.0, 0.0],
        [0.5, 0.25],
    ];

    #[test]
    fn exact_plane_is_recovered() {
        let x = design(&ROWS);
        let y: Vec<f64> = ROWS.iter().map(|r| 2.0 * r[0] - 3.0 * r[1] + 1.0).collect();
        let fit = ols_fit(&x, &y).unwrap();
        assert!((fit.weights[0] - 2.0).abs() < 1e-9);
        assert!((fit.weights[1] + 3.0).abs() < 1e-9);
        assert!((fit.intercept - 1.0).abs() < 1e-9);
        for (p, t) in fit.predict(&x).iter().zip(&y) {
            assert!((p - t).abs() < 1e-9);
        }
    }

    #[test]
    fn constant_target_gives_zero_weights() {
        let fit = ols_fit(&design(&ROWS), &[4.5; 6]).unwrap();
        assert!(fit.weights.iter().all(|w| w.abs() < 1e-12));
        assert!((fit.intercept - 4.5).abs() < 1e-12);
    }

    #[test]
    fn underdetermined_is_rejected() {
        let x = design(&ROWS[..3]);
        assert!(matches!(
            ols_fit(&x, &[1.0, 2.0, 3.0]),
            Err(Error::Underdetermined { .. })
        ));
    }

    #[test]
    fn duplicated_column_gives_minimum_norm_split() {
        let x = DMatrix::from_fn(6, 3, |r, c| ROWS[r][c.min(1)]);
        let y: Vec<f64> = ROWS.iter().map(|r| r[0] + 4.0 * r[1]).collect();
        let fit = ols_fit(&x, &y).unwrap();
        assert_eq!(fit.rank, 2);
        assert!((fit.weights[1] - 2.0).abs() < 1e-9 && (fit.weights[2] - 2.0).abs() < 1e-9);
    }

    #[test]
    fn apcc_sign_and_affine_invariance() {
        let t = [1.0, 3.0, 2.0, 7.0, 5.0];
        assert!((apcc(&t, &t).value - 1.0).abs() < 1e-15);
        let neg: Vec<f64> = t.iter().map(|v| -v).collect();
        assert!((apcc(&neg, &t).value - 1.0).abs() < 1e-15);
        let aff: Vec<f64> = t.iter().map(|v| -0.3 * v + 11.0).collect();
        assert!((apcc(&aff, &t).value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn constant_series_is_degenerate() {
        let a = apcc(&[2.0; 4], &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(
            a,
            Apcc {
                value: 0.0,
                degenerate: true
            }
        );
    }
}
