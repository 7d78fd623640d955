//! UMAP: fuzzy kNN graph, spectral initialisation and negative-sampling SGD.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{pairwise_sq_distances, standardize, Reduced2D, Reducer};
use crate::error::{Error, Result};
use crate::rng::{self, SeededRng};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UmapConfig {
    pub n_neighbors: usize,
    pub min_dist: f64,
    pub spread: f64,
    pub n_epochs: usize,
    pub negative_samples: usize,
    pub initial_alpha: f64,
}

impl Default for UmapConfig {
    fn default() -> Self {
        UmapConfig {
            n_neighbors: 15,
            min_dist: 0.1,
            spread: 1.0,
            n_epochs: 500,
            negative_samples: 5,
            initial_alpha: 1.0,
        }
    }
}

const SMOOTH_K_TOL: f64 = 1e-5;
const SMOOTH_K_ITERS: usize = 64;
const MIN_K_DIST_SCALE: f64 = 1e-3;
const GRAD_CLIP: f64 = 4.0;
const INIT_NOISE: f64 = 1e-4;
/// Components up to this size get a dense eigendecomposition; larger ones use subspace
/// iteration.
const DENSE_EIGEN_LIMIT: usize = 2000;
const SUBSPACE_ITERS: usize = 300;

/// Least-squares fit of 1/(1 + a·d^(2b)) to the target membership curve: 1 below
/// `min_dist`, exp(−(d − min_dist)/spread) beyond, on 300 points over [0, 3·spread].
pub fn fit_ab(min_dist: f64, spread: f64) -> (f64, f64) {
    let xs: Vec<f64> = (0..300).map(|i| 3.0 * spread * i as f64 / 299.0).collect();
    let ys: Vec<f64> = xs
        .iter()
        .map(|&x| {
            if x < min_dist {
                1.0
            } else {
                (-(x - min_dist) / spread).exp()
            }
        })
        .collect();
    let residuals = |a: f64, b: f64| -> (Vec<f64>, Vec<[f64; 2]>) {
        let mut r = Vec::with_capacity(xs.len());
        let mut j = Vec::with_capacity(xs.len());
        for (&x, &y) in xs.iter().zip(&ys) {
            if x == 0.0 {
                r.push(1.0 - y);
                j.push([0.0, 0.0]);
                continue;
            }
            let p = x.powf(2.0 * b);
            let denom = 1.0 + a * p;
            r.push(1.0 / denom - y);
            let common = -1.0 / (denom * denom);
            j.push([common * p, common * a * p * 2.0 * x.ln()]);
        }
        (r, j)
    };
    let cost = |r: &[f64]| r.iter().map(|v| v * v).sum::<f64>();
    let (mut a, mut b, mut lambda) = (1.0, 1.0, 1e-3);
    let (mut r, mut jac) = residuals(a, b);
    let mut c = cost(&r);
    for _ in 0..500 {
        let (mut h, mut g) = ([[0.0; 2]; 2], [0.0; 2]);
        for (ri, ji) in r.iter().zip(&jac) {
            for p in 0..2 {
                g[p] += ji[p] * ri;
                for q in 0..2 {
                    h[p][q] += ji[p] * ji[q];
                }
            }
        }
        let mut improved = false;
        while lambda < 1e12 {
            let (h00, h11) = (h[0][0] * (1.0 + lambda), h[1][1] * (1.0 + lambda));
            let det = h00 * h11 - h[0][1] * h[1][0];
            if det.abs() < 1e-300 {
                lambda *= 10.0;
                continue;
            }
            let da = -(h11 * g[0] - h[0][1] * g[1]) / det;
            let db = -(h00 * g[1] - h[1][0] * g[0]) / det;
            let (na, nb) = (a + da, b + db);
            if na > 0.0 && nb > 0.0 {
                let (nr, nj) = residuals(na, nb);
                let nc = cost(&nr);
                if nc < c {
                    let rel = (c - nc) / c.max(1e-300);
                    a = na;
                    b = nb;
                    r = nr;
                    jac = nj;
                    c = nc;
                    lambda = (lambda / 10.0).max(1e-12);
                    improved = rel > 1e-15;
                    break;
                }
            }
            lambda *= 10.0;
        }
        if !improved {
            break;
        }
    }
    (a, b)
}

/// k nearest neighbours of every row (self first), with their distances.
fn knn(dist_sq: &[Vec<f64>], k: usize) -> (Vec<Vec<usize>>, Vec<Vec<f64>>) {
    let rows: Vec<(Vec<usize>, Vec<f64>)> = dist_sq
        .par_iter()
        .enumerate()
        .map(|(i, row)| {
            let mut others: Vec<usize> = (0..row.len()).filter(|&j| j != i).collect();
            others.sort_by(|&a, &b| row[a].total_cmp(&row[b]).then(a.cmp(&b)));
            let mut idx = vec![i];
            idx.extend(others.into_iter().take(k - 1));
            let d = idx.iter().map(|&j| row[j].max(0.0).sqrt()).collect();
            (idx, d)
        })
        .collect();
    rows.into_iter().unzip()
}

/// Per-point (sigma, rho): rho is the nearest nonzero neighbour distance, sigma makes the
/// smoothed neighbour memberships sum to log2(k).
fn smooth_knn(dists: &[Vec<f64>], k: usize) -> Vec<(f64, f64)> {
    let target = (k as f64).log2();
    let mean_all = dists.iter().flatten().sum::<f64>()
        / dists.iter().map(Vec::len).sum::<usize>().max(1) as f64;
    dists
        .iter()
        .map(|row| {
            let rho = row.iter().copied().find(|&d| d > 0.0).unwrap_or(0.0);
            let (mut lo, mut hi, mut mid) = (0.0f64, f64::INFINITY, 1.0f64);
            for _ in 0..SMOOTH_K_ITERS {
                let psum: f64 = row[1..]
                    .iter()
                    .map(|&d| {
                        let t = d - rho;
                        if t > 0.0 {
                            (-t / mid).exp()
                        } else {
                            1.0
                        }
                    })
                    .sum();
                if (psum - target).abs() < SMOOTH_K_TOL {
                    break;
                }
                if psum > target {
                    hi = mid;
                    mid = (lo + hi) / 2.0;
                } else {
                    lo = mid;
                    mid = if hi.is_finite() {
                        (lo + hi) / 2.0
                    } else {
                        mid * 2.0
                    };
                }
            }
            let mean_row = row.iter().sum::<f64>() / row.len() as f64;
            let floor = if rho > 0.0 {
                MIN_K_DIST_SCALE * mean_row
            } else {
                MIN_K_DIST_SCALE * mean_all
            };
            (mid.max(floor), rho)
        })
        .collect()
}

/// Symmetric fuzzy graph w = a + aᵀ − a∘aᵀ, one ordered map of neighbours per point.
fn fuzzy_graph(idx: &[Vec<usize>], dists: &[Vec<f64>], k: usize) -> Vec<BTreeMap<usize, f64>> {
    let n = idx.len();
    let params = smooth_knn(dists, k);
    let mut directed: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); n];
    for i in 0..n {
        let (sigma, rho) = params[i];
        for (&j, &d) in idx[i].iter().zip(&dists[i]) {
            if j == i {
                continue;
            }
            let w = if d - rho <= 0.0 || sigma == 0.0 {
                1.0
            } else {
                (-(d - rho) / sigma).exp()
            };
            directed[i].insert(j, w);
        }
    }
    let mut graph: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); n];
    for i in 0..n {
        for (&j, &w) in &directed[i] {
            let back = directed[j].get(&i).copied().unwrap_or(0.0);
            let s = w + back - w * back;
            if s > 0.0 {
                graph[i].insert(j, s);
                graph[j].insert(i, s);
            }
        }
    }
    graph
}

/// Connected-component label per node, numbered by first appearance.
fn components(graph: &[BTreeMap<usize, f64>]) -> Vec<usize> {
    let n = graph.len();
    let mut label = vec![usize::MAX; n];
    let mut next = 0;
    for start in 0..n {
        if label[start] != usize::MAX {
            continue;
        }
        let mut stack = vec![start];
        label[start] = next;
        while let Some(v) = stack.pop() {
            for &u in graph[v].keys() {
                if label[u] == usize::MAX {
                    label[u] = next;
                    stack.push(u);
                }
            }
        }
        next += 1;
    }
    label
}

/// Eigenvectors 2 and 3 (by ascending eigenvalue) of the normalized Laplacian of one
/// connected component, each signed so its largest-magnitude entry is positive.
fn spectral_component(
    graph: &[BTreeMap<usize, f64>],
    members: &[usize],
    stream: &mut SeededRng,
) -> Vec<[f64; 2]> {
    let m = members.len();
    let local: BTreeMap<usize, usize> = members.iter().enumerate().map(|(l, &g)| (g, l)).collect();
    let degree: Vec<f64> = members
        .iter()
        .map(|&g| graph[g].values().sum::<f64>())
        .collect();
    let inv_sqrt: Vec<f64> = degree
        .iter()
        .map(|d| if *d > 0.0 { 1.0 / d.sqrt() } else { 0.0 })
        .collect();
    let mut vecs: [Vec<f64>; 2] = if m <= DENSE_EIGEN_LIMIT {
        let mut lap = DMatrix::<f64>::identity(m, m);
        for (l, &g) in members.iter().enumerate() {
            for (&u, &w) in &graph[g] {
                let lu = local[&u];
                lap[(l, lu)] -= w * inv_sqrt[l] * inv_sqrt[lu];
            }
        }
        let eig = SymmetricEigen::new(lap);
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&a, &b| {
            eig.eigenvalues[a]
                .total_cmp(&eig.eigenvalues[b])
                .then(a.cmp(&b))
        });
        [1, 2].map(|k| eig.eigenvectors.column(order[k]).iter().copied().collect())
    } else {
        subspace_top(graph, members, &local, &inv_sqrt, &degree, stream)
    };
    for v in vecs.iter_mut() {
        let big = v
            .iter()
            .copied()
            .max_by(|a, b| a.abs().total_cmp(&b.abs()))
            .unwrap_or(1.0);
        if big < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
    }
    (0..m).map(|i| [vecs[0][i], vecs[1][i]]).collect()
}

/// Subspace iteration on I + D^-½ A D^-½ (spectrum in [0, 2]) with the trivial eigenvector
/// D^½·1 projected out; returns the two leading remaining eigenvectors.
fn subspace_top(
    graph: &[BTreeMap<usize, f64>],
    members: &[usize],
    local: &BTreeMap<usize, usize>,
    inv_sqrt: &[f64],
    degree: &[f64],
    stream: &mut SeededRng,
) -> [Vec<f64>; 2] {
    let m = members.len();
    let block = 4;
    let trivial = {
        let v: Vec<f64> = degree.iter().map(|d| d.sqrt()).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        DMatrix::from_iterator(m, 1, v.into_iter().map(|x| x / norm))
    };
    let apply = |v: &DMatrix<f64>| -> DMatrix<f64> {
        let mut out = v.clone();
        for (l, &g) in members.iter().enumerate() {
            for (&u, &w) in &graph[g] {
                let lu = local[&u];
                let s = w * inv_sqrt[l] * inv_sqrt[lu];
                for c in 0..v.ncols() {
                    out[(l, c)] += s * v[(lu, c)];
                }
            }
        }
        out
    };
    let deflate = |v: &mut DMatrix<f64>| {
        let proj = trivial.transpose() * &*v;
        *v -= &trivial * proj;
    };
    let mut v = DMatrix::from_iterator(m, block, rng::normal_vec(stream, m * block));
    deflate(&mut v);
    v = v.qr().q();
    for _ in 0..SUBSPACE_ITERS {
        let mut w = apply(&v);
        deflate(&mut w);
        v = w.qr().q();
    }
    let small = v.transpose() * apply(&v);
    let eig = SymmetricEigen::new(small);
    let mut order: Vec<usize> = (0..block).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .total_cmp(&eig.eigenvalues[a])
            .then(a.cmp(&b))
    });
    [0, 1].map(|k| {
        (&v * eig.eigenvectors.column(order[k]))
            .iter()
            .copied()
            .collect()
    })
}

/// Spectral layout of every component placed around the unit circle, then rescaled to a
/// ±10 box with a little seeded noise.
fn spectral_init(graph: &[BTreeMap<usize, f64>], stream: &mut SeededRng) -> Vec<[f64; 2]> {
    let n = graph.len();
    let labels = components(graph);
    let n_comp = labels.iter().max().map_or(0, |m| m + 1);
    let mut y = vec![[0.0; 2]; n];
    if n_comp > 1 {
        log::warn!("UMAP kNN graph has {n_comp} connected components; laying them out separately");
    }
    let meta: Vec<[f64; 2]> = (0..n_comp)
        .map(|c| {
            let t = 2.0 * std::f64::consts::PI * c as f64 / n_comp as f64;
            [t.cos(), t.sin()]
        })
        .collect();
    for c in 0..n_comp {
        let members: Vec<usize> = (0..n).filter(|&i| labels[i] == c).collect();
        let range = if n_comp > 1 {
            meta.iter()
                .enumerate()
                .filter(|(o, _)| *o != c)
                .map(|(_, p)| ((p[0] - meta[c][0]).powi(2) + (p[1] - meta[c][1]).powi(2)).sqrt())
                .fold(f64::INFINITY, f64::min)
                / 2.0
        } else {
            1.0
        };
        let coords: Vec<[f64; 2]> = if members.len() < 4 {
            members
                .iter()
                .map(|_| {
                    [
                        stream.random_range(-range..range),
                        stream.random_range(-range..range),
                    ]
                })
                .collect()
        } else {
            let raw = spectral_component(graph, &members, stream);
            let max_abs = raw.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
            let s = if max_abs > 0.0 { range / max_abs } else { 1.0 };
            raw.iter().map(|p| [p[0] * s, p[1] * s]).collect()
        };
        let centre = if n_comp > 1 { meta[c] } else { [0.0, 0.0] };
        for (&i, p) in members.iter().zip(coords) {
            y[i] = [p[0] + centre[0], p[1] + centre[1]];
        }
    }
    let max_abs = y.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    let expansion = if max_abs > 0.0 { 10.0 / max_abs } else { 1.0 };
    for p in y.iter_mut() {
        for v in p.iter_mut() {
            *v = *v * expansion + INIT_NOISE * rng::standard_normal(stream);
        }
    }
    // final rescale of every axis onto [0, 10]
    for d in 0..2 {
        let lo = y.iter().map(|p| p[d]).fold(f64::INFINITY, f64::min);
        let hi = y.iter().map(|p| p[d]).fold(f64::NEG_INFINITY, f64::max);
        let span = if hi > lo { hi - lo } else { 1.0 };
        y.iter_mut().for_each(|p| p[d] = 10.0 * (p[d] - lo) / span);
    }
    y
}

fn clip(v: f64) -> f64 {
    v.clamp(-GRAD_CLIP, GRAD_CLIP)
}

pub fn umap2(x: &DMatrix<f64>, config: &UmapConfig, seed: u64) -> Result<Reduced2D> {
    let n = x.nrows();
    if config.n_neighbors < 2 || config.n_neighbors >= n {
        return Err(Error::InvalidParameter(format!(
            "n_neighbors = {} must be in [2, N) with N = {n}",
            config.n_neighbors
        )));
    }
    if !(config.min_dist >= 0.0 && config.spread > 0.0 && config.min_dist <= config.spread) {
        return Err(Error::InvalidParameter(format!(
            "need 0 <= min_dist ({}) <= spread ({})",
            config.min_dist, config.spread
        )));
    }
    if config.n_epochs == 0 {
        return Err(Error::InvalidParameter(
            "UMAP needs at least one epoch".into(),
        ));
    }
    let z = standardize(x);
    let (idx, dists) = knn(&pairwise_sq_distances(&z), config.n_neighbors);
    let graph = fuzzy_graph(&idx, &dists, config.n_neighbors);
    let mut stream = rng::seeded(seed);
    let mut y = spectral_init(&graph, &mut stream);
    let (a, b) = fit_ab(config.min_dist, config.spread);

    let max_w = graph
        .iter()
        .flat_map(|m| m.values())
        .fold(0.0f64, |m, &w| m.max(w));
    let n_epochs = config.n_epochs as f64;
    let edges: Vec<(usize, usize, f64)> = graph
        .iter()
        .enumerate()
        .flat_map(|(i, m)| m.iter().map(move |(&j, &w)| (i, j, w)))
        .filter(|e| e.2 >= max_w / n_epochs)
        .collect();
    let eps: Vec<f64> = edges.iter().map(|e| max_w / e.2).collect();
    let eps_neg: Vec<f64> = eps
        .iter()
        .map(|e| e / config.negative_samples.max(1) as f64)
        .collect();
    let mut next_sample = eps.clone();
    let mut next_negative = eps_neg.clone();

    for epoch in 0..config.n_epochs {
        let alpha = config.initial_alpha * (1.0 - epoch as f64 / n_epochs);
        let e = epoch as f64;
        for (k, &(head, tail, _)) in edges.iter().enumerate() {
            if next_sample[k] > e {
                continue;
            }
            let diff = [y[head][0] - y[tail][0], y[head][1] - y[tail][1]];
            let d2 = diff[0] * diff[0] + diff[1] * diff[1];
            let coeff = if d2 > 0.0 {
                -2.0 * a * b * d2.powf(b - 1.0) / (a * d2.powf(b) + 1.0)
            } else {
                0.0
            };
            for d in 0..2 {
                let g = clip(coeff * diff[d]) * alpha;
                y[head][d] += g;
                y[tail][d] -= g;
            }
            next_sample[k] += eps[k];

            if config.negative_samples == 0 {
                continue;
            }
            let n_neg = ((e - next_negative[k]) / eps_neg[k]).floor().max(0.0) as usize;
            for _ in 0..n_neg {
                let other = stream.random_range(0..n);
                if other == head {
                    continue;
                }
                let diff = [y[head][0] - y[other][0], y[head][1] - y[other][1]];
                let d2 = diff[0] * diff[0] + diff[1] * diff[1];
                let coeff = if d2 > 0.0 {
                    2.0 * b / ((0.001 + d2) * (a * d2.powf(b) + 1.0))
                } else {
                    0.0
                };
                for d in 0..2 {
                    let g = if coeff > 0.0 {
                        clip(coeff * diff[d])
                    } else {
                        GRAD_CLIP
                    };
                    y[head][d] += g * alpha;
                }
            }
            next_negative[k] += n_neg as f64 * eps_neg[k];
        }
    }

    let params = BTreeMap::from([
        ("n_neighbors".to_string(), config.n_neighbors as f64),
        ("min_dist".to_string(), config.min_dist),
        ("spread".to_string(), config.spread),
        ("n_epochs".to_string(), config.n_epochs as f64),
        (
            "negative_samples".to_string(),
            config.negative_samples as f64,
        ),
        ("a".to_string(), a),
        ("b".to_string(), b),
    ]);
    let ymat = DMatrix::from_fn(n, 2, |r, c| y[r][c]);
    Reduced2D::from_matrix(&ymat, Reducer::Umap, seed, params)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ab_curve_for_default_min_dist() {
        let (a, b) = fit_ab(0.1, 1.0);
        assert!((a - 1.577).abs() < 5e-3, "a = {a}");
        assert!((b - 0.895).abs() < 5e-3, "b = {b}");
    }

    #[test]
    fn smooth_knn_hits_log2_k() {
        let dists = vec![vec![0.0, 0.5, 0.9, 1.3, 2.0, 2.2]];
        let (sigma, rho) = smooth_knn(&dists, 6)[0];
        assert_eq!(rho, 0.5);
        let s: f64 = dists[0][1..]
            .iter()
            .map(|d| (-(d - rho).max(0.0) / sigma).exp())
            .sum();
        assert!((s - 6f64.log2()).abs() < 1e-4, "{s}");
    }

    #[test]
    fn fuzzy_union_is_symmetric_and_bounded() {
        let x = DMatrix::from_fn(30, 3, |r, c| ((r * 13 + c * 7) % 17) as f64);
        let (idx, d) = knn(&pairwise_sq_distances(&standardize(&x)), 5);
        let g = fuzzy_graph(&idx, &d, 5);
        for (i, m) in g.iter().enumerate() {
            for (&j, &w) in m {
                assert!(w > 0.0 && w <= 1.0);
                assert_eq!(g[j][&i], w);
            }
        }
    }

    #[test]
    fn component_labels() {
        let mut g: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); 5];
        for (a, b) in [(0, 2), (1, 3), (3, 4)] {
            g[a].insert(b, 1.0);
            g[b].insert(a, 1.0);
        }
        assert_eq!(components(&g), vec![0, 1, 0, 1, 1]);
    }

    #[test]
    fn subspace_iteration_spans_dense_eigenvectors() {
        let mut g = rng::seeded(12);
        let x = DMatrix::from_iterator(150, 2, rng::normal_vec(&mut g, 300));
        let (idx, d) = knn(&pairwise_sq_distances(&standardize(&x)), 10);
        let graph = fuzzy_graph(&idx, &d, 10);
        assert_eq!(components(&graph).iter().max(), Some(&0));
        let members: Vec<usize> = (0..150).collect();
        let dense = spectral_component(&graph, &members, &mut g);
        let local: BTreeMap<usize, usize> = members.iter().map(|&i| (i, i)).collect();
        let degree: Vec<f64> = graph.iter().map(|m| m.values().sum()).collect();
        let inv_sqrt: Vec<f64> = degree.iter().map(|d| 1.0 / d.sqrt()).collect();
        let sub = subspace_top(&graph, &members, &local, &inv_sqrt, &degree, &mut g);
        // every dense eigenvector lies in the span of the iterated pair
        for k in 0..2 {
            let v: Vec<f64> = dense.iter().map(|p| p[k]).collect();
            let proj: f64 = sub
                .iter()
                .map(|s| s.iter().zip(&v).map(|(a, b)| a * b).sum::<f64>().powi(2))
                .sum();
            assert!(proj > 0.99, "component {k}: captured {proj}");
        }
    }

    #[test]
    fn parameter_errors() {
        let x = DMatrix::from_fn(10, 2, |r, c| (r + c) as f64);
        let bad_k = UmapConfig {
            n_neighbors: 10,
            ..Default::default()
        };
        assert!(umap2(&x, &bad_k, 0).is_err());
        let bad_d = UmapConfig {
            n_neighbors: 3,
            min_dist: 2.0,
            ..Default::default()
        };
        assert!(umap2(&x, &bad_d, 0).is_err());
    }
}
