//! Utterance-level statistics over frame tracks.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scope {
    Voiced,
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Functionals {
    pub mean: f64,
    /// Coefficient of variation σ/|mean|; `None` when the mean is ~0.
    pub cv: Option<f64>,
    pub p20: f64,
    pub p50: f64,
    pub p80: f64,
}

/// Summarises `values` over in-scope frames. Non-finite values mark missing frames and are
/// excluded.
pub fn apply_functionals(values: &[f64], voicing: &[bool], scope: Scope) -> Result<Functionals> {
    debug_assert_eq!(values.len(), voicing.len());
    let mut kept: Vec<f64> = values
        .iter()
        .zip(voicing)
        .filter(|&(v, &voiced)| v.is_finite() && (scope == Scope::All || voiced))
        .map(|(&v, _)| v)
        .collect();
    if kept.is_empty() {
        return Err(Error::MissingFunctional(format!("{scope:?} frames")));
    }
    let n = kept.len() as f64;
    let mean = kept.iter().sum::<f64>() / n;
    let var = kept.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let cv = (mean.abs() >= 1e-12).then(|| var.sqrt() / mean.abs());
    kept.sort_by(f64::total_cmp);
    Ok(Functionals {
        mean,
        cv,
        p20: percentile_sorted(&kept, 20.0),
        p50: percentile_sorted(&kept, 50.0),
        p80: percentile_sorted(&kept, 80.0),
    })
}

/// Linear interpolation between closest ranks, position `p/100 · (n-1)`.
pub fn percentile_sorted(sorted: &[f64], p: f64) -> f64 {
    let pos = p / 100.0 * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn constant_track() {
        let f = apply_functionals(&[5.0; 7], &[true; 7], Scope::All).unwrap();
        assert_eq!(
            (f.mean, f.cv, f.p20, f.p50, f.p80),
            (5.0, Some(0.0), 5.0, 5.0, 5.0)
        );
    }

    #[test]
    fn median_of_one_to_hundred() {
        let v: Vec<f64> = (1..=100).map(f64::from).collect();
        let f = apply_functionals(&v, &[true; 100], Scope::All).unwrap();
        assert!((f.p50 - 50.5).abs() < 1e-12);
        assert!((f.mean - 50.5).abs() < 1e-12);
    }

    #[test]
    fn voiced_scope_ignores_unvoiced_frames() {
        let v = [1.0, 100.0, 3.0, 100.0];
        let voiced = [true, false, true, false];
        let f = apply_functionals(&v, &voiced, Scope::Voiced).unwrap();
        assert_eq!(f.mean, 2.0);
        assert_eq!(f.p50, 2.0);
    }

    #[test]
    fn missing_frames_are_excluded() {
        let f = apply_functionals(&[f64::NAN, 4.0, 6.0], &[true; 3], Scope::All).unwrap();
        assert_eq!(f.mean, 5.0);
    }

    #[test]
    fn empty_scope_and_zero_mean() {
        assert!(matches!(
            apply_functionals(&[1.0, 2.0], &[false, false], Scope::Voiced),
            Err(Error::MissingFunctional(_))
        ));
        let f = apply_functionals(&[-1.0, 1.0], &[true, true], Scope::All).unwrap();
        assert_eq!(f.cv, None);
    }

    proptest! {
        #[test]
        fn percentiles_are_monotone(v in prop::collection::vec(-1e3f64..1e3, 1..60)) {
            let f = apply_functionals(&v, &vec![true; v.len()], Scope::All).unwrap();
            prop_assert!(f.p20 <= f.p50 && f.p50 <= f.p80);
        }

        #[test]
        fn single_frame_functionals_equal_the_frame(x in -1e3f64..1e3) {
            let f = apply_functionals(&[x], &[true], Scope::Voiced).unwrap();
            prop_assert_eq!((f.mean, f.p20, f.p50, f.p80), (x, x, x, x));
        }
    }
}
