//! Formant centre frequencies from LPC pole angles.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rustfft::num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::audio::{resample, AudioClip};
use crate::error::Result;
use crate::frames::{FrameConfig, WindowFunction};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FormantConfig {
    pub analysis_rate: u32,
    pub lpc_order: usize,
    pub pre_emphasis: f64,
    /// Poles wider than this are not formants.
    pub max_bandwidth_hz: f64,
    /// Poles this close to DC or Nyquist are ignored.
    pub edge_margin_hz: f64,
    pub frame: FrameConfig,
}

impl Default for FormantConfig {
    fn default() -> Self {
        FormantConfig {
            analysis_rate: 8000,
            lpc_order: 10,
            pre_emphasis: 0.97,
            max_bandwidth_hz: 400.0,
            edge_margin_hz: 50.0,
            frame: FrameConfig::spectral(),
        }
    }
}

/// F1..F3 per frame; `None` where the frame was degenerate or had fewer than three
/// qualifying poles.
#[derive(Debug, Clone, PartialEq)]
pub struct FormantTrack {
    pub frame_times: Vec<f64>,
    pub formants: Vec<Option<[f64; 3]>>,
}

impl FormantTrack {
    /// Column `k` (0-based) with missing frames as NaN.
    pub fn column(&self, k: usize) -> Vec<f64> {
        self.formants
            .iter()
            .map(|f| f.map_or(f64::NAN, |v| v[k]))
            .collect()
    }
}

pub fn lpc_formants(clip: &AudioClip) -> Result<FormantTrack> {
    FormantConfig::default().track(clip)
}

impl FormantConfig {
    pub fn track(&self, clip: &AudioClip) -> Result<FormantTrack> {
        self.frame.validate()?;
        let resampled = resample(clip, self.analysis_rate)?;
        let sr = resampled.sample_rate;
        let x = &resampled.samples;
        let mut emphasized = Vec::with_capacity(x.len());
        for i in 0..x.len() {
            let prev = if i == 0 { 0.0 } else { x[i - 1] };
            emphasized.push(x[i] - self.pre_emphasis * prev);
        }
        let framing = self.frame.framing(sr);
        let window = WindowFunction::Hamming.coefficients(framing.window);
        let mut frame_times = Vec::new();
        let mut formants = Vec::new();
        for (i, frame) in framing.frames(&emphasized).enumerate() {
            frame_times.push(framing.centre_time(i, sr));
            let windowed: Vec<f64> = frame.iter().zip(&window).map(|(a, b)| a * b).collect();
            formants.push(
                lpc_coefficients(&windowed, self.lpc_order)
                    .and_then(|a| self.formants_from_lpc(&a, sr as f64)),
            );
        }
        Ok(FormantTrack {
            frame_times,
            formants,
        })
    }

    fn formants_from_lpc(&self, lpc: &[f64], sr: f64) -> Option<[f64; 3]> {
        let nyquist = sr / 2.0;
        let mut candidates: Vec<f64> = polynomial_roots(lpc)
            .into_iter()
            .filter(|z| z.im > 0.0)
            .filter_map(|z| {
                let freq = z.arg() * sr / (2.0 * PI);
                let bandwidth = -z.norm().ln() * sr / PI;
                let in_band = freq > self.edge_margin_hz && freq < nyquist - self.edge_margin_hz;
                (in_band && bandwidth < self.max_bandwidth_hz).then_some(freq)
            })
            .collect();
        if candidates.len() < 3 {
            return None;
        }
        candidates.sort_by(f64::total_cmp);
        Some([candidates[0], candidates[1], candidates[2]])
    }
}

/// Autocorrelation LPC via Levinson-Durbin. Returns `[1, a1, .., ap]` for the inverse filter
/// `A(z) = 1 + Σ a_k z^-k`, or `None` for a degenerate frame.
pub fn lpc_coefficients(frame: &[f64], order: usize) -> Option<Vec<f64>> {
    if frame.len() <= order {
        return None;
    }
    let mut r: Vec<f64> = (0..=order)
        .map(|lag| frame[lag..].iter().zip(frame).map(|(a, b)| a * b).sum())
        .collect();
    if !(r[0] > 0.0) || !r[0].is_finite() {
        return None;
    }
    // white-noise correction keeps the recursion stable on near-sinusoidal frames
    r[0] *= 1.0 + 1e-9;

    let mut a = vec![0.0; order + 1];
    a[0] = 1.0;
    let mut err = r[0];
    for i in 1..=order {
        let acc: f64 = r[i] + (1..i).map(|j| a[j] * r[i - j]).sum::<f64>();
        let k = -acc / err;
        let prev = a.clone();
        for j in 1..i {
            a[j] = prev[j] + k * prev[i - j];
        }
        a[i] = k;
        err *= 1.0 - k * k;
        if !(err > 0.0) {
            return None;
        }
    }
    Some(a)
}

/// Roots of `z^p + a1 z^(p-1) + .. + ap` from the companion matrix eigenvalues.
pub fn polynomial_roots(lpc: &[f64]) -> Vec<Complex<f64>> {
    let p = lpc.len() - 1;
    if p == 0 {
        return Vec::new();
    }
    let mut companion = DMatrix::<f64>::zeros(p, p);
    for j in 0..p {
        companion[(0, j)] = -lpc[j + 1] / lpc[0];
    }
    for i in 1..p {
        companion[(i, i - 1)] = 1.0;
    }
    companion
        .complex_eigenvalues()
        .iter()
        .map(|c| Complex::new(c.re, c.im))
        .collect()
}
