//! Exact t-SNE with perplexity-calibrated Gaussian affinities and a Student-t output kernel.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{pairwise_sq_distances, pca2, standardize, Reduced2D, Reducer};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TsneConfig {
    pub perplexity: f64,
    pub n_iter: usize,
    pub exaggeration: f64,
    pub exaggeration_iters: usize,
    pub learning_rate: f64,
    pub momentum_early: f64,
    pub momentum_late: f64,
}

impl Default for TsneConfig {
    fn default() -> Self {
        TsneConfig {
            perplexity: 30.0,
            n_iter: 1000,
            exaggeration: 12.0,
            exaggeration_iters: 250,
            learning_rate: 200.0,
            momentum_early: 0.5,
            momentum_late: 0.8,
        }
    }
}

const ENTROPY_TOL: f64 = 1e-5;
const MAX_BISECTION: usize = 50;
const P_FLOOR: f64 = 1e-12;
const MIN_GAIN: f64 = 0.01;
const INIT_SCALE: f64 = 1e-4;
const TRACE_EVERY: usize = 50;

/// Row-conditional affinities p(j|i) whose entropy matches ln(perplexity).
fn conditional_affinities(dist: &[Vec<f64>], perplexity: f64) -> Vec<Vec<f64>> {
    let target = perplexity.ln();
    dist.par_iter()
        .enumerate()
        .map(|(i, row)| {
            // shifting by the nearest distance keeps exp() away from underflow
            let dmin = row
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, d)| *d)
                .fold(f64::INFINITY, f64::min);
            let (mut beta, mut lo, mut hi) = (1.0f64, f64::NEG_INFINITY, f64::INFINITY);
            let mut p = vec![0.0; row.len()];
            for _ in 0..MAX_BISECTION {
                let mut sum = 0.0;
                let mut weighted = 0.0;
                for (j, &d) in row.iter().enumerate() {
                    let d = d - dmin;
                    p[j] = if j == i { 0.0 } else { (-d * beta).exp() };
                    sum += p[j];
                    weighted += d * p[j];
                }
                let entropy = if sum > 0.0 {
                    sum.ln() + beta * weighted / sum
                } else {
                    0.0
                };
                if sum > 0.0 {
                    p.iter_mut().for_each(|v| *v /= sum);
                }
                let diff = entropy - target;
                if diff.abs() < ENTROPY_TOL {
                    break;
                }
                if diff > 0.0 {
                    lo = beta;
                    beta = if hi.is_finite() {
                        (beta + hi) / 2.0
                    } else {
                        beta * 2.0
                    };
                } else {
                    hi = beta;
                    beta = if lo.is_finite() {
                        (beta + lo) / 2.0
                    } else {
                        beta / 2.0
                    };
                }
            }
            p
        })
        .collect()
}

/// Student-t kernel 1/(1+|yi−yj|²) for every pair, row-parallel, with the fixed-order total.
fn student_kernel(y: &[[f64; 2]]) -> (Vec<Vec<f64>>, f64) {
    let num: Vec<Vec<f64>> = y
        .par_iter()
        .enumerate()
        .map(|(i, a)| {
            y.iter()
                .enumerate()
                .map(|(j, b)| {
                    if i == j {
                        0.0
                    } else {
                        let (dx, dy) = (a[0] - b[0], a[1] - b[1]);
                        1.0 / (1.0 + dx * dx + dy * dy)
                    }
                })
                .collect()
        })
        .collect();
    let row_sums: Vec<f64> = num.iter().map(|r| r.iter().sum()).collect();
    (num, row_sums.iter().sum())
}

fn kl_divergence(p: &[Vec<f64>], num: &[Vec<f64>], z: f64) -> f64 {
    let rows: Vec<f64> = p
        .par_iter()
        .zip(num)
        .map(|(pr, nr)| {
            pr.iter()
                .zip(nr)
                .filter(|(pv, _)| **pv > 0.0)
                .map(|(pv, nv)| pv * (pv / (nv / z).max(P_FLOOR)).ln())
                .sum::<f64>()
        })
        .collect();
    rows.iter().sum()
}

/// Exact t-SNE of standardized `x`, initialised from the PCA scores scaled down to σ = 1e-4.
/// The result depends on `seed` only through its provenance record: the initialisation is
/// already deterministic.
pub fn tsne2(x: &DMatrix<f64>, config: &TsneConfig, seed: u64) -> Result<Reduced2D> {
    let n = x.nrows();
    if !(config.perplexity > 0.0) || 3.0 * config.perplexity >= n as f64 {
        return Err(Error::InvalidParameter(format!(
            "perplexity {} infeasible for {n} points (need 0 < 3*perplexity < N)",
            config.perplexity
        )));
    }
    if config.learning_rate <= 0.0 || config.n_iter == 0 {
        return Err(Error::InvalidParameter(
            "t-SNE needs a positive learning rate and iteration count".into(),
        ));
    }
    let z = standardize(x);
    let dist = pairwise_sq_distances(&z);
    let cond = conditional_affinities(&dist, config.perplexity);
    let p: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    if i == j {
                        0.0
                    } else {
                        ((cond[i][j] + cond[j][i]) / (2.0 * n as f64)).max(P_FLOOR)
                    }
                })
                .collect()
        })
        .collect();

    let init = pca2(x)?;
    let m0 = init.coords.iter().map(|c| c[0]).sum::<f64>() / n as f64;
    let sd0 = (init.coords.iter().map(|c| (c[0] - m0).powi(2)).sum::<f64>() / n as f64).sqrt();
    let scale = if sd0 > 0.0 {
        INIT_SCALE / sd0
    } else {
        INIT_SCALE
    };
    let mut y: Vec<[f64; 2]> = init
        .coords
        .iter()
        .map(|c| [c[0] * scale, c[1] * scale])
        .collect();
    let mut update = vec![[0.0f64; 2]; n];
    let mut gains = vec![[1.0f64; 2]; n];
    let mut trace = Vec::new();

    for iter in 0..config.n_iter {
        let early = iter < config.exaggeration_iters;
        let exag = if early { config.exaggeration } else { 1.0 };
        let momentum = if early {
            config.momentum_early
        } else {
            config.momentum_late
        };
        let (num, zsum) = student_kernel(&y);
        if iter % TRACE_EVERY == 0 {
            trace.push(kl_divergence(&p, &num, zsum));
        }
        let grad: Vec<[f64; 2]> = (0..n)
            .into_par_iter()
            .map(|i| {
                let mut g = [0.0; 2];
                for j in 0..n {
                    let w = (exag * p[i][j] - num[i][j] / zsum) * num[i][j];
                    g[0] += w * (y[i][0] - y[j][0]);
                    g[1] += w * (y[i][1] - y[j][1]);
                }
                [4.0 * g[0], 4.0 * g[1]]
            })
            .collect();
        for i in 0..n {
            for d in 0..2 {
                gains[i][d] = if update[i][d] * grad[i][d] < 0.0 {
                    gains[i][d] + 0.2
                } else {
                    (gains[i][d] * 0.8).max(MIN_GAIN)
                };
                update[i][d] =
                    momentum * update[i][d] - config.learning_rate * gains[i][d] * grad[i][d];
                y[i][d] += update[i][d];
            }
        }
        let cx = y.iter().map(|c| c[0]).sum::<f64>() / n as f64;
        let cy = y.iter().map(|c| c[1]).sum::<f64>() / n as f64;
        y.iter_mut().for_each(|c| {
            c[0] -= cx;
            c[1] -= cy;
        });
    }
    let (num, zsum) = student_kernel(&y);
    trace.push(kl_divergence(&p, &num, zsum));

    let params = BTreeMap::from([
        ("perplexity".to_string(), config.perplexity),
        ("n_iter".to_string(), config.n_iter as f64),
        ("exaggeration".to_string(), config.exaggeration),
        (
            "exaggeration_iters".to_string(),
            config.exaggeration_iters as f64,
        ),
        ("learning_rate".to_string(), config.learning_rate),
    ]);
    let ymat = DMatrix::from_fn(n, 2, |r, c| y[r][c]);
    let mut out = Reduced2D::from_matrix(&ymat, Reducer::Tsne, seed, params)?;
    out.loss_trace = trace;
    Ok(out)
}
