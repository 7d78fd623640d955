//! Mel filterbank, log-mel spectrogram and MFCCs.

use std::f64::consts::PI;

use crate::audio::AudioClip;
use crate::error::{Error, Result};
use crate::frames::{FrameConfig, PowerSpectrum};

pub const MFCC_FILTERS: usize = 26;
pub const MEL_LOW_HZ: f64 = 20.0;
/// Energies are floored here before the log, so silence maps to ln(1e-10).
pub const LOG_ENERGY_FLOOR: f64 = 1e-10;

pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Triangular filters evenly spaced on the mel scale, evaluated at FFT bin centres.
#[derive(Debug, Clone)]
pub struct MelFilterbank {
    weights: Vec<Vec<f64>>,
}

impl MelFilterbank {
    pub fn new(n_filters: usize, n_bins: usize, bin_hz: f64, low_hz: f64, high_hz: f64) -> Self {
        let (lo, hi) = (hz_to_mel(low_hz), hz_to_mel(high_hz));
        let edges: Vec<f64> = (0..n_filters + 2)
            .map(|i| mel_to_hz(lo + (hi - lo) * i as f64 / (n_filters + 1) as f64))
            .collect();
        let weights = (0..n_filters)
            .map(|m| {
                let (left, centre, right) = (edges[m], edges[m + 1], edges[m + 2]);
                (0..n_bins)
                    .map(|k| {
                        let f = k as f64 * bin_hz;
                        if f <= left || f >= right {
                            0.0
                        } else if f <= centre {
                            (f - left) / (centre - left)
                        } else {
                            (right - f) / (right - centre)
                        }
                    })
                    .collect()
            })
            .collect();
        MelFilterbank { weights }
    }

    pub fn n_filters(&self) -> usize {
        self.weights.len()
    }

    pub fn apply(&self, power: &[f64]) -> Vec<f64> {
        self.weights
            .iter()
            .map(|w| w.iter().zip(power).map(|(a, b)| a * b).sum())
            .collect()
    }
}

/// Orthonormal type-II DCT.
pub fn dct2_orthonormal(x: &[f64]) -> Vec<f64> {
    let n = x.len() as f64;
    (0..x.len())
        .map(|k| {
            let scale = if k == 0 {
                (1.0 / n).sqrt()
            } else {
                (2.0 / n).sqrt()
            };
            scale
                * x.iter()
                    .enumerate()
                    .map(|(i, &v)| v * (PI * k as f64 * (2 * i + 1) as f64 / (2.0 * n)).cos())
                    .sum::<f64>()
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameMatrix {
    pub frame_times: Vec<f64>,
    /// frames × values
    pub values: Vec<Vec<f64>>,
}

impl FrameMatrix {
    pub fn column(&self, j: usize) -> Vec<f64> {
        self.values.iter().map(|row| row[j]).collect()
    }
}

fn log_mel_frames(clip: &AudioClip, n_filters: usize) -> Result<FrameMatrix> {
    let cfg = FrameConfig::spectral();
    let framing = cfg.framing(clip.sample_rate);
    let spectrum = PowerSpectrum::new(framing.window, cfg.window_function);
    let bank = MelFilterbank::new(
        n_filters,
        spectrum.n_bins(),
        spectrum.bin_hz(1, clip.sample_rate),
        MEL_LOW_HZ,
        clip.sample_rate as f64 / 2.0,
    );
    let mut frame_times = Vec::new();
    let mut values = Vec::new();
    for (i, frame) in framing.frames(&clip.samples).enumerate() {
        frame_times.push(framing.centre_time(i, clip.sample_rate));
        let energies = bank.apply(&spectrum.compute(frame));
        values.push(
            energies
                .iter()
                .map(|e| e.max(LOG_ENERGY_FLOOR).ln())
                .collect(),
        );
    }
    Ok(FrameMatrix {
        frame_times,
        values,
    })
}

/// Log-mel energies on 25 ms / 10 ms frames.
pub fn mel_spectrogram(clip: &AudioClip, n_bins: usize) -> Result<FrameMatrix> {
    if n_bins == 0 {
        return Err(Error::InvalidParameter(
            "mel spectrogram needs at least one bin".into(),
        ));
    }
    log_mel_frames(clip, n_bins)
}

/// Coefficients 1..=n_coeffs of the DCT of 26 log-mel energies; coefficient 0 is dropped.
pub fn mfcc(clip: &AudioClip, n_coeffs: usize) -> Result<FrameMatrix> {
    if n_coeffs == 0 || n_coeffs >= MFCC_FILTERS {
        return Err(Error::InvalidParameter(format!(
            "mfcc count must be in 1..{MFCC_FILTERS}, got {n_coeffs}"
        )));
    }
    let log_mel = log_mel_frames(clip, MFCC_FILTERS)?;
    let values = log_mel
        .values
        .iter()
        .map(|row| dct2_orthonormal(row)[1..=n_coeffs].to_vec())
        .collect();
    Ok(FrameMatrix {
        frame_times: log_mel.frame_times,
        values,
    })
}
