use nalgebra::DMatrix;
use styleprobe::dimred::{
    one_nn_agreement, pca2, pca_fit, standardize, tsne2, umap2, TsneConfig, UmapConfig,
};
use styleprobe::rng;
use styleprobe::stats::{apcc, fit_probe};

/// Three unit-variance Gaussian clusters in 8-D whose means sit 10σ apart.
fn three_clusters(n: usize, seed: u64) -> (DMatrix<f64>, Vec<usize>) {
    let mut g = rng::seeded(seed);
    let labels: Vec<usize> = (0..n).map(|i| i % 3).collect();
    let x = DMatrix::from_fn(n, 8, |r, c| if c == labels[r] { 10.0 } else { 0.0 });
    let noise = DMatrix::from_iterator(n, 8, rng::normal_vec(&mut g, n * 8));
    (x + noise, labels)
}

#[test]
fn tsne_separates_three_clusters() {
    let (x, labels) = three_clusters(300, 1);
    let red = tsne2(&x, &TsneConfig::default(), 5).unwrap();
    assert_eq!(red.len(), 300);
    let agreement = one_nn_agreement(&red.coords, &labels);
    assert!(agreement >= 0.95, "{agreement}");
    let trace = &red.loss_trace;
    assert!(trace.last().unwrap() < trace.first().unwrap(), "{trace:?}");
}

#[test]
fn umap_separates_three_clusters() {
    let (x, labels) = three_clusters(300, 2);
    let red = umap2(&x, &UmapConfig::default(), 5).unwrap();
    let agreement = one_nn_agreement(&red.coords, &labels);
    assert!(agreement >= 0.95, "{agreement}");
}

#[test]
fn reducers_are_deterministic_under_seed() {
    let (x, _) = three_clusters(120, 3);
    let cfg = TsneConfig {
        perplexity: 20.0,
        n_iter: 300,
        ..Default::default()
    };
    assert_eq!(tsne2(&x, &cfg, 9).unwrap(), tsne2(&x, &cfg, 9).unwrap());
    let u = UmapConfig {
        n_epochs: 100,
        ..Default::default()
    };
    assert_eq!(umap2(&x, &u, 9).unwrap(), umap2(&x, &u, 9).unwrap());
}

#[test]
fn umap_keeps_duplicate_rows_together() {
    let mut g = rng::seeded(4);
    let mut x = DMatrix::from_iterator(200, 5, rng::normal_vec(&mut g, 1000));
    let first = x.row(0).into_owned();
    x.set_row(1, &first);
    let red = umap2(&x, &UmapConfig::default(), 11).unwrap();
    let dist = |a: [f64; 2], b: [f64; 2]| ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
    let mut all: Vec<f64> = Vec::new();
    for i in 0..200 {
        for j in i + 1..200 {
            all.push(dist(red.coords[i], red.coords[j]));
        }
    }
    all.sort_by(f64::total_cmp);
    let p5 = all[all.len() / 20];
    assert!(dist(red.coords[0], red.coords[1]) < p5);
}

#[test]
fn pca_isotropic_shares_are_balanced() {
    let mut g = rng::seeded(5);
    let x = DMatrix::from_iterator(5000, 4, rng::normal_vec(&mut g, 20_000));
    let fit = pca_fit(&x, 2).unwrap();
    let (a, b) = (fit.explained_ratio[0], fit.explained_ratio[1]);
    assert!((a - b).abs() / a < 0.10, "{a} {b}");
}

#[test]
fn pca_is_rotation_invariant_up_to_sign() {
    // Exact sample correlation [[1,.8,0,0],[.8,1,0,0],[0,0,1,.3],[0,0,.3,1]]: a rotation in
    // the (0,2) plane keeps every column at unit variance, so standardization commutes with it.
    let mut g = rng::seeded(6);
    let n = 400;
    let raw = DMatrix::from_iterator(n, 4, rng::normal_vec(&mut g, n * 4));
    let centred = standardize(&raw);
    let cov = centred.transpose() * &centred / n as f64;
    let whiten = cov.symmetric_eigen();
    let inv_sqrt = &whiten.eigenvectors
        * DMatrix::from_diagonal(&whiten.eigenvalues.map(|v| 1.0 / v.sqrt()))
        * whiten.eigenvectors.transpose();
    let white = &centred * inv_sqrt;
    let mut target = DMatrix::<f64>::identity(4, 4);
    target[(0, 1)] = 0.8;
    target[(1, 0)] = 0.8;
    target[(2, 3)] = 0.3;
    target[(3, 2)] = 0.3;
    let chol = target.cholesky().unwrap().l();
    let x = white * chol.transpose();

    let t = 0.9f64;
    let mut rot = DMatrix::<f64>::identity(4, 4);
    rot[(0, 0)] = t.cos();
    rot[(0, 2)] = -t.sin();
    rot[(2, 0)] = t.sin();
    rot[(2, 2)] = t.cos();
    let rotated = &x * rot;

    let a = pca2(&x).unwrap();
    let b = pca2(&rotated).unwrap();
    for c in 0..2 {
        let ca: Vec<f64> = a.coords.iter().map(|p| p[c]).collect();
        let cb: Vec<f64> = b.coords.iter().map(|p| p[c]).collect();
        let r = apcc(&ca, &cb).value;
        assert!(r >= 1.0 - 1e-9, "component {c}: {r}");
    }
}

#[test]
fn pca_probe_never_beats_full_space() {
    let mut g = rng::seeded(7);
    let n = 500;
    let x = DMatrix::from_iterator(n, 6, rng::normal_vec(&mut g, n * 6));
    let red = pca2(&x).unwrap();
    let z = standardize(&x);
    for f in 0..4 {
        let w = rng::normal_vec(&mut g, 6);
        let e = rng::normal_vec(&mut g, n);
        let y: Vec<f64> = (0..n)
            .map(|r| (0..6).map(|c| w[c] * x[(r, c)]).sum::<f64>() + e[r] * f as f64)
            .collect();
        let full = fit_probe(&z, &y, "f").unwrap().apcc.value;
        let flat = fit_probe(&red.matrix(), &y, "f").unwrap().apcc.value;
        assert!(flat <= full + 1e-9, "{flat} > {full}");
    }
}
