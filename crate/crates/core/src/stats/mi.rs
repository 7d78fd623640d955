//! Nearest-neighbour mutual information between a continuous variable and a discrete label.
//!
//! For every sample, the distance to its k-th nearest neighbour among samples of the same
//! class sets a radius; m counts all samples (any class, self included) strictly inside that
//! radius. Then
//!
//! I = ψ(N) − ⟨ψ(N_c)⟩ + ψ(k) − ⟨ψ(m)⟩  (nats)
//!
//! converted to bits and clamped at zero.

use std::f64::consts::LN_2;

use crate::error::{Error, Result};
use crate::rng;

use super::special::digamma;

pub const DEFAULT_MI_NEIGHBORS: usize = 3;
pub const MIN_MI_SAMPLES: usize = 20;
/// Tie-breaking noise relative to the sample standard deviation.
pub const JITTER_SCALE: f64 = 1e-10;
pub const DEFAULT_JITTER_SEED: u64 = 0;

/// Mutual information in bits with the default jitter seed.
pub fn mutual_info_cd(x: &[f64], labels: &[usize], k: usize) -> Result<f64> {
    mutual_info_cd_seeded(x, labels, k, DEFAULT_JITTER_SEED)
}

pub fn mutual_info_cd_seeded(x: &[f64], labels: &[usize], k: usize, seed: u64) -> Result<f64> {
    let n = x.len();
    if labels.len() != n {
        return Err(Error::InvalidParameter(format!(
            "{n} values but {} labels",
            labels.len()
        )));
    }
    if k == 0 {
        return Err(Error::InvalidParameter(
            "neighbour count k must be >= 1".into(),
        ));
    }
    if n < MIN_MI_SAMPLES {
        return Err(Error::InvalidParameter(format!(
            "need >= {MIN_MI_SAMPLES} samples, got {n}"
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Validation("non-finite value in MI input".into()));
    }
    let n_classes = labels.iter().max().map_or(0, |&m| m + 1);
    let mut class_members: Vec<Vec<usize>> = vec![Vec::new(); n_classes];
    for (i, &c) in labels.iter().enumerate() {
        class_members[c].push(i);
    }
    class_members.retain(|m| !m.is_empty());
    if class_members.len() < 2 {
        return Ok(0.0);
    }
    if let Some(small) = class_members.iter().find(|m| m.len() <= k) {
        return Err(Error::InvalidParameter(format!(
            "class of label {} has {} members, needs more than k = {k}",
            labels[small[0]],
            small.len()
        )));
    }

    let mean = x.iter().sum::<f64>() / n as f64;
    let sd = (x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64).sqrt();
    if sd == 0.0 {
        return Ok(0.0);
    }
    let mut stream = rng::seeded(seed);
    let values: Vec<f64> = x
        .iter()
        .map(|&v| v + JITTER_SCALE * sd * rng::standard_normal(&mut stream))
        .collect();

    let mut all_sorted = values.clone();
    all_sorted.sort_by(f64::total_cmp);

    let mut sum_class = 0.0;
    let mut sum_m = 0.0;
    for members in &class_members {
        let mut class_sorted: Vec<f64> = members.iter().map(|&i| values[i]).collect();
        class_sorted.sort_by(f64::total_cmp);
        let psi_class = digamma(members.len() as f64);
        for pos in 0..class_sorted.len() {
            let centre = class_sorted[pos];
            let radius = kth_neighbour_distance(&class_sorted, pos, k);
            let lo = all_sorted.partition_point(|&v| centre - v >= radius);
            let hi = all_sorted.partition_point(|&v| v - centre < radius);
            let m = hi.saturating_sub(lo).max(1);
            sum_class += psi_class;
            sum_m += digamma(m as f64);
        }
    }
    let nf = n as f64;
    let nats = digamma(nf) - sum_class / nf + digamma(k as f64) - sum_m / nf;
    Ok((nats / LN_2).max(0.0))
}

/// Distance from `sorted[pos]` to its k-th nearest other element, walking outwards.
fn kth_neighbour_distance(sorted: &[f64], pos: usize, k: usize) -> f64 {
    let centre = sorted[pos];
    let (mut left, mut right) = (pos, pos + 1);
    let mut dist = 0.0;
    for _ in 0..k {
        let dl = (left > 0).then(|| centre - sorted[left - 1]);
        let dr = (right < sorted.len()).then(|| sorted[right] - centre);
        match (dl, dr) {
            (Some(a), Some(b)) if a <= b => {
                dist = a;
                left -= 1;
            }
            (Some(a), None) => {
                dist = a;
                left -= 1;
            }
            (_, Some(b)) => {
                dist = b;
                right += 1;
            }
            (None, None) => break,
        }
    }
    dist
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kth_neighbour_walks_both_sides() {
        let v = [0.0, 1.0, 1.5, 4.0];
        assert_eq!(kth_neighbour_distance(&v, 1, 1), 0.5);
        assert_eq!(kth_neighbour_distance(&v, 1, 2), 1.0);
        assert_eq!(kth_neighbour_distance(&v, 1, 3), 3.0);
        assert_eq!(kth_neighbour_distance(&v, 0, 2), 1.5);
    }

    #[test]
    fn parameter_errors() {
        let x: Vec<f64> = (0..30).map(f64::from).collect();
        let mut y = vec![0usize; 30];
        y[0] = 1;
        y[1] = 1;
        assert!(mutual_info_cd(&x, &y, 3).is_err());
        assert!(mutual_info_cd(&x[..10], &y[..10], 3).is_err());
        assert!(mutual_info_cd(&x, &y, 0).is_err());
    }

    #[test]
    fn single_class_has_zero_information() {
        let x: Vec<f64> = (0..50).map(|i| (i as f64).sin()).collect();
        assert_eq!(mutual_info_cd(&x, &vec![2; 50], 3).unwrap(), 0.0);
    }

    #[test]
    fn deterministic_under_seed() {
        let x: Vec<f64> = (0..200).map(|i| ((i * 37) % 101) as f64).collect();
        let y: Vec<usize> = (0..200).map(|i| i % 4).collect();
        assert_eq!(
            mutual_info_cd(&x, &y, 3).unwrap(),
            mutual_info_cd(&x, &y, 3).unwrap()
        );
    }
}
